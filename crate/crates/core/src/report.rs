use serde::{Deserialize, Serialize};

/// One named check: `worst` is the extreme observed value, `limit` the value it may not exceed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub worst: f64,
    pub limit: f64,
    pub margin: f64,
    pub witness: Option<Vec<f64>>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl Check {
    /// Passes when `worst <= limit`; NaN never passes.
    pub fn at_most(name: impl Into<String>, worst: f64, limit: f64, witness: Option<Vec<f64>>) -> Self {
        Self {
            name: name.into(),
            worst,
            limit,
            margin: limit - worst,
            witness,
            pass: worst <= limit,
            note: None,
        }
    }

    /// Passes when `worst < limit`.
    pub fn below(name: impl Into<String>, worst: f64, limit: f64, witness: Option<Vec<f64>>) -> Self {
        let mut c = Self::at_most(name, worst, limit, witness);
        c.pass = worst < limit;
        c
    }

    pub fn skipped(name: impl Into<String>, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            worst: 0.0,
            limit: 0.0,
            margin: 0.0,
            witness: None,
            pass: true,
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Report {
    pub fn new(checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { checks, pass }
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
        self.pass = self.checks.iter().all(|c| c.pass);
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn extend(&mut self, other: Report) {
        for c in other.checks {
            self.push(c);
        }
    }
}

/// Tracks the maximum of a quantity together with the point where it occurred.
#[derive(Clone, Debug)]
pub(crate) struct Worst {
    pub value: f64,
    pub at: Option<Vec<f64>>,
}

impl Worst {
    pub fn new() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            at: None,
        }
    }

    pub fn see(&mut self, v: f64, x: &[f64]) {
        if v > self.value || v.is_nan() && !self.value.is_nan() {
            self.value = v;
            self.at = Some(x.to_vec());
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        if other.value > self.value || other.value.is_nan() && !self.value.is_nan() {
            self.value = other.value;
            self.at = other.at;
        }
        self
    }

    /// The empty maximum is reported as 0.
    pub fn value_or_zero(&self) -> f64 {
        if self.value == f64::NEG_INFINITY {
            0.0
        } else {
            self.value
        }
    }
}
