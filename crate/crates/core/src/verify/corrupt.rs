//! Deliberate corruptions of solutions, each aimed at one family of checks.

use serde::{Deserialize, Serialize};

use crate::assembly::{MapSolution, Solution};
use crate::fields::{Bump, Expr, ScalarField};
use crate::geometry::Aabb;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    /// Every term of the field doubled.
    ScaleField,
    /// Lipschitz and sup certificates set to zero.
    ZeroCertificates,
    /// Lipschitz and sup certificates inflated past their allowed values.
    InflateCertificates,
    /// A registered bump of height `2 eps` away from the atoms.
    LargeTerm,
    /// A bump term outside every recorded support box.
    StrayTerm,
    /// One support box pushed across the boundary of `Omega`.
    BoxOutsideOmega,
    /// The first group copied onto the next net direction.
    DuplicateGroup,
    /// `K` replaced by every sampled atom.
    KeepAllAtoms,
    /// One id removed from the first nonempty ledger part.
    DeleteLedgerId,
    /// The ledger total overstated.
    LedgerTotal,
    /// A ledger part charged beyond its budget.
    OverspendPart,
    /// Separation budget raised to `eps / 2`.
    SkewThirds,
    /// Ledger `eps` lowered to the dropped mass.
    ShrinkEps,
}

impl Corruption {
    pub const ALL: [Corruption; 13] = [
        Corruption::ScaleField,
        Corruption::ZeroCertificates,
        Corruption::InflateCertificates,
        Corruption::LargeTerm,
        Corruption::StrayTerm,
        Corruption::BoxOutsideOmega,
        Corruption::DuplicateGroup,
        Corruption::KeepAllAtoms,
        Corruption::DeleteLedgerId,
        Corruption::LedgerTotal,
        Corruption::OverspendPart,
        Corruption::SkewThirds,
        Corruption::ShrinkEps,
    ];

    /// Checks that must fail once the corruption is applied.
    pub fn targets(self) -> &'static [&'static str] {
        match self {
            Corruption::ScaleField => &["divergence_exact", "divergence_fd"],
            Corruption::ZeroCertificates => &["sup_certificate_dominates_grid", "lipschitz_pairs", "lipschitz_grid_gradient"],
            Corruption::InflateCertificates => &["sup_certificate", "lipschitz_certificate"],
            Corruption::LargeTerm => &["sup_grid"],
            Corruption::StrayTerm => &["support_outside_boxes"],
            Corruption::BoxOutsideOmega => &["support_boxes_inside_omega"],
            Corruption::DuplicateGroup => &["locality"],
            Corruption::KeepAllAtoms => &["ledger_mass_balance"],
            Corruption::DeleteLedgerId => &["ledger_recomputed"],
            Corruption::LedgerTotal => &["ledger_sum"],
            Corruption::OverspendPart => &["ledger_parts_within_budget"],
            Corruption::SkewThirds => &["ledger_thirds"],
            Corruption::ShrinkEps => &["ledger_total_below_eps"],
        }
    }
}

/// A box in the low corner of `omega`, a tenth of its extent on each axis.
fn corner_box<T: Real>(omega: &Aabb<T>, inset: T) -> Aabb<T> {
    let d = omega.dim();
    let lo: Vec<T> = (0..d).map(|k| omega.lo[k] + omega.extent(k) * inset).collect();
    let hi: Vec<T> = (0..d).map(|k| lo[k] + omega.extent(k) * T::lit(0.1)).collect();
    Aabb::new(lo, hi)
}

fn bump_term<T: Real>(outer: &Aabb<T>, height: T) -> ScalarField<T> {
    let inner = outer.inflate_uniform(-outer.diameter() * T::lit(0.1));
    let b = Bump::new(outer.clone(), inner).expect("corner box is not degenerate");
    ScalarField::with_support(Expr::scale(height, Expr::bump(b)), outer.clone())
}

fn unit_axis<T: Real>(d: usize) -> Vec<T> {
    let mut v = vec![T::zero(); d];
    v[0] = T::one();
    v
}

pub fn corrupt_solution<T: Real>(sol: &Solution<T>, c: Corruption) -> Solution<T> {
    let mut s = sol.clone();
    let d = s.omega.dim();
    let eps = s.eps;
    match c {
        Corruption::ScaleField => {
            for t in &mut s.field.terms {
                t.scalar.expr = Expr::scale(T::lit(2.0), t.scalar.expr.clone());
            }
            for g in &mut s.groups {
                g.u = Expr::scale(T::lit(2.0), g.u.clone());
                g.stage_fields = g.stage_fields.iter().map(|f| Expr::scale(T::lit(2.0), f.clone())).collect();
            }
        }
        Corruption::ZeroCertificates => {
            s.certified_lip = T::zero();
            s.certified_sup = T::zero();
        }
        Corruption::InflateCertificates => {
            s.certified_lip = T::lit(10.0) * (T::one() + s.delta) * s.m.max(T::one());
            s.certified_sup = T::lit(2.0) * eps;
        }
        Corruption::LargeTerm => {
            let b = corner_box(&s.omega, T::lit(0.05));
            s.field.push(bump_term(&b, T::lit(2.0) * eps), unit_axis(d));
            if let Some(g) = s.groups.first_mut() {
                g.boxes.push(b);
            }
        }
        Corruption::StrayTerm => {
            let b = corner_box(&s.omega, T::lit(0.05));
            s.field.push(bump_term(&b, eps * T::lit(0.1)), unit_axis(d));
        }
        Corruption::BoxOutsideOmega => {
            if let Some(b) = s.groups.first_mut().and_then(|g| g.boxes.first_mut()) {
                b.hi[0] = s.omega.hi[0] + s.omega.extent(0);
            }
        }
        Corruption::DuplicateGroup => {
            if let Some(g) = s.groups.first().cloned() {
                let mut h = g.clone();
                let n = s.net.directions.len();
                h.net_index = (g.net_index + 1) % n;
                h.direction = s.net.directions[h.net_index].as_slice().to_vec();
                s.field.push(ScalarField::new(h.u.clone()), h.direction.clone());
                s.groups.push(h);
            }
        }
        Corruption::KeepAllAtoms => {
            s.k = s.atoms.clone();
        }
        Corruption::DeleteLedgerId => {
            let led = &mut s.ledger;
            let parts = std::iter::once(&mut led.partition)
                .chain(std::iter::once(&mut led.separation))
                .chain(led.groups.iter_mut());
            for p in parts {
                if !p.dropped_ids.is_empty() {
                    p.dropped_ids.pop();
                    break;
                }
            }
        }
        Corruption::LedgerTotal => {
            s.ledger.total_dropped += s.ledger.eps * 0.01;
        }
        Corruption::OverspendPart => {
            let p = &mut s.ledger.partition;
            p.budget = p.dropped_mass * 0.5;
        }
        Corruption::SkewThirds => {
            s.ledger.separation.budget = s.ledger.eps / 2.0;
        }
        Corruption::ShrinkEps => {
            s.ledger.eps = s.ledger.total_dropped;
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapCorruption {
    /// Displacement of `Phi` doubled, inner assembly untouched.
    ScaleMap,
    /// Displacement and inner assembly both doubled.
    ScaleBoth,
    /// `Phi` folded onto itself across `x1 = 0`.
    Fold,
    /// Displacement term outside every support box.
    StrayDisplacement,
    /// Lipschitz and sup certificates set to zero.
    ZeroCertificates,
    /// Lipschitz and sup certificates inflated past their allowed values.
    InflateCertificates,
    /// A registered displacement bump of height `2 eps`.
    LargeDisplacement,
    /// One support box of the inner solution pushed across the boundary of `Omega`.
    BoxOutsideOmega,
    /// The inner solution's first group copied onto the next net direction.
    DuplicateGroup,
}

impl MapCorruption {
    pub const ALL: [MapCorruption; 9] = [
        MapCorruption::ScaleMap,
        MapCorruption::ScaleBoth,
        MapCorruption::Fold,
        MapCorruption::StrayDisplacement,
        MapCorruption::ZeroCertificates,
        MapCorruption::InflateCertificates,
        MapCorruption::LargeDisplacement,
        MapCorruption::BoxOutsideOmega,
        MapCorruption::DuplicateGroup,
    ];

    pub fn targets(self) -> &'static [&'static str] {
        match self {
            MapCorruption::ScaleMap => &["det_direct", "det_routes_agree"],
            MapCorruption::ScaleBoth => &["det_direct", "det_rank_one"],
            MapCorruption::Fold => &["injectivity"],
            MapCorruption::StrayDisplacement => &["identity_outside_support"],
            MapCorruption::ZeroCertificates => &["sup_certificate_dominates_grid", "lipschitz_pairs"],
            MapCorruption::InflateCertificates => &["sup_certificate", "lipschitz_certificate"],
            MapCorruption::LargeDisplacement => &["sup_grid"],
            MapCorruption::BoxOutsideOmega => &["support_boxes_inside_omega"],
            MapCorruption::DuplicateGroup => &["locality"],
        }
    }
}

pub fn corrupt_map<T: Real>(sol: &MapSolution<T>, c: MapCorruption) -> MapSolution<T> {
    let mut s = sol.clone();
    let d = s.inner.omega.dim();
    let two = T::lit(2.0);
    let scale_disp = |s: &mut MapSolution<T>| {
        for t in &mut s.map.displacement.terms {
            t.scalar.expr = Expr::scale(two, t.scalar.expr.clone());
        }
    };
    match c {
        MapCorruption::ScaleMap => scale_disp(&mut s),
        MapCorruption::ScaleBoth => {
            scale_disp(&mut s);
            s.inner = corrupt_solution(&s.inner, Corruption::ScaleField);
        }
        MapCorruption::Fold => {
            // x1 -> x1^2 is two-to-one
            let x1 = Expr::coord(0);
            let e = Expr::sub(Expr::product(x1.clone(), x1.clone()), x1);
            s.map.displacement.push(ScalarField::new(e), unit_axis(d));
            s.diffeo = true;
        }
        MapCorruption::StrayDisplacement => {
            let b = corner_box(&s.inner.omega, T::lit(0.05));
            s.map.displacement.push(bump_term(&b, s.eps * T::lit(0.1)), unit_axis(d));
        }
        MapCorruption::ZeroCertificates => {
            s.certified_lip = T::zero();
            s.certified_sup = T::zero();
        }
        MapCorruption::InflateCertificates => {
            s.certified_lip = T::lit(10.0) * (T::one() + s.delta) * s.l.max(T::one());
            s.certified_sup = two * s.eps;
        }
        MapCorruption::LargeDisplacement => {
            let b = corner_box(&s.inner.omega, T::lit(0.05));
            s.map.displacement.push(bump_term(&b, two * s.eps), unit_axis(d));
            if let Some(g) = s.inner.groups.first_mut() {
                g.boxes.push(b);
            }
        }
        MapCorruption::BoxOutsideOmega => s.inner = corrupt_solution(&s.inner, Corruption::BoxOutsideOmega),
        MapCorruption::DuplicateGroup => s.inner = corrupt_solution(&s.inner, Corruption::DuplicateGroup),
    }
    s
}
