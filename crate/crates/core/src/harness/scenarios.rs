use std::f64::consts::PI;
use std::fmt;

use super::{
    check_decreasing, fit_rate, log_law, observe_gated, sweep_unchecked, Column, ConfigFamily, HarnessError,
    LogLawCheck, Observables, RateFit, RateModel, RowStatus, Settings, SweepTable,
};
use crate::geometry::{split_odd_even, BoundaryData, Shape};

/// Tolerance on fitted exponents.
pub const EXPONENT_TOL: f64 = 0.1;
/// Tolerance on the spread of log-law ratios.
pub const LOG_LAW_TOL: f64 = 0.15;
/// `|Q| / scale` below which Q_ε counts as zero.
pub const Q_VANISH: f64 = 1e-8;

/// Half the exponent of the gap profile `t(y) ≈ ε + c |y|^(2m)`.
pub fn flatness_order(shape: &Shape) -> f64 {
    match shape {
        Shape::Disk { .. } | Shape::Ellipse { .. } => 1.0,
        Shape::Profile { exponent, .. } => 0.5 * exponent,
    }
}

/// Asymptotic law `y ~ ε^p |ln ε|^q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Law {
    pub p: f64,
    pub q: f64,
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.p == 0.0, self.q == 0.0) {
            (true, true) => write!(f, "bounded"),
            (false, true) => write!(f, "eps^{:.4}", self.p),
            (true, false) => write!(f, "|ln eps|^{}", self.q),
            (false, false) => write!(f, "eps^{:.4} |ln eps|^{}", self.p, self.q),
        }
    }
}

/// Expected laws of `grad_sup`, `c_diff` and `-a11` in dimension `n` for
/// flatness order `m`.
pub fn expected_law(n: usize, m: f64) -> [(Column, Law); 3] {
    let s = (n as f64 - 1.0) / (2.0 * m);
    let (grad, cdiff, a11) = if (s - 1.0).abs() < 1e-9 {
        (Law { p: -1.0, q: -1.0 }, Law { p: 0.0, q: -1.0 }, Law { p: 0.0, q: 1.0 })
    } else if s < 1.0 {
        (Law { p: -s, q: 0.0 }, Law { p: 1.0 - s, q: 0.0 }, Law { p: s - 1.0, q: 0.0 })
    } else {
        (Law { p: -1.0, q: 0.0 }, Law { p: 0.0, q: 0.0 }, Law { p: 0.0, q: 0.0 })
    };
    [(Column::GradSup, grad), (Column::CDiff, cdiff), (Column::NegA11, a11)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawCheck {
    pub column: Column,
    pub law: Law,
    pub fit: Option<RateFit>,
    pub log_law: Option<LogLawCheck>,
    pub pass: bool,
}

fn check_law(table: &SweepTable, column: Column, law: Law) -> LawCheck {
    let fit = fit_rate(table, column, RateModel::Power).ok();
    if law.q == 0.0 {
        let pass = fit.is_some_and(|f| (f.exponent - law.p).abs() <= EXPONENT_TOL);
        LawCheck { column, law, fit, log_law: None, pass }
    } else {
        let ll = log_law(table, column, law.p, law.q).ok();
        let pass = ll.as_ref().is_some_and(|c| c.spread <= LOG_LAW_TOL);
        LawCheck { column, law, fit, log_law: ll, pass }
    }
}

fn q_scale(o: &Observables) -> f64 {
    let f = &o.flux;
    f.b[0].abs().max(f.b[1].abs()) * f.outer_flux[0].abs().max(f.outer_flux[1].abs())
}

#[derive(Debug)]
pub struct BlowupVerdict {
    pub table: SweepTable,
    pub flatness: f64,
    pub checks: Vec<LawCheck>,
    /// `|Q_ε| / scale` at the smallest usable ε.
    pub q_relative: f64,
    pub q_nonzero: bool,
    /// Every fitted law matches the expected one.
    pub agrees: bool,
    /// Q_ε stays away from zero and the gradient follows the blow-up law.
    pub blowup: bool,
}

fn verdict(table: SweepTable, flatness: f64) -> BlowupVerdict {
    let checks: Vec<LawCheck> =
        expected_law(table.ambient_dim, flatness).iter().map(|&(c, l)| check_law(&table, c, l)).collect();
    let q_relative = table.usable().last().map_or(0.0, |(_, o)| {
        let s = q_scale(o);
        if s > 0.0 { o.flux.q_eps.abs() / s } else { 0.0 }
    });
    let q_nonzero = q_relative > Q_VANISH;
    let agrees = checks.iter().all(|c| c.pass);
    let blowup = q_nonzero && checks[0].pass;
    BlowupVerdict { table, flatness, checks, q_relative, q_nonzero, agrees, blowup }
}

fn require_symmetric(family: &ConfigFamily) -> Result<(), HarnessError> {
    if !family.outer.is_mirror_symmetric() || family.shape1 != family.shape2 {
        return Err(HarnessError::InvalidInput("blow-up scenarios need a mirror-symmetric configuration".into()));
    }
    Ok(())
}

/// Checks that the odd part of `phi` is nonzero and of one sign on the
/// half `x > 0` of the outer boundary.
fn check_odd_sign(family: &ConfigFamily, phi: &BoundaryData) -> Result<(), HarnessError> {
    let (odd, _) = split_odd_even(phi, &family.outer)?;
    let r = family.outer.radius;
    let values: Vec<f64> = (1..256)
        .map(|i| {
            let t = -0.5 * PI + PI * i as f64 / 256.0;
            odd.eval([r * t.cos(), r * t.sin()])
        })
        .collect();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(HarnessError::InvalidInput("phi has no odd part".into()));
    }
    let tol = 1e-12 * scale;
    if values.iter().any(|v| *v > tol) && values.iter().any(|v| *v < -tol) {
        return Err(HarnessError::InvalidInput("odd part of phi changes sign on the half boundary".into()));
    }
    Ok(())
}

/// ε-sweep on a symmetric configuration with fitted rates compared to the
/// expected laws for the dimension and flatness order.
pub fn blowup_scenario(
    family: &ConfigFamily,
    phi: &BoundaryData,
    eps_list: &[f64],
    settings: &Settings,
) -> Result<BlowupVerdict, HarnessError> {
    require_symmetric(family)?;
    check_odd_sign(family, phi)?;
    check_decreasing(eps_list, 4)?;
    let table = sweep_unchecked(family, eps_list, phi, settings)?;
    Ok(verdict(table, flatness_order(&family.shape1)))
}

#[derive(Debug)]
pub struct QStarReport {
    pub table: SweepTable,
    pub eps: Vec<f64>,
    pub q: Vec<f64>,
    /// `|Q_{i+1} - Q_i|`
    pub differences: Vec<f64>,
    pub scale: f64,
    pub vanishing: bool,
    pub sign_stable: bool,
    pub differences_decrease: bool,
    /// Tail settled away from zero.
    pub stabilized: bool,
}

/// Q_ε along a translating family.
pub fn qstar_convergence(
    family: &ConfigFamily,
    eps_list: &[f64],
    phi: &BoundaryData,
    settings: &Settings,
) -> Result<QStarReport, HarnessError> {
    check_decreasing(eps_list, 3)?;
    let table = sweep_unchecked(family, eps_list, phi, settings)?;
    let (eps, q): (Vec<f64>, Vec<f64>) = table.usable().map(|(e, o)| (e, o.flux.q_eps)).unzip();
    let scale = table.usable().map(|(_, o)| q_scale(o)).fold(0.0, f64::max);
    let differences: Vec<f64> = q.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let vanishing = q.iter().all(|v| v.abs() <= Q_VANISH * scale);
    let sign_stable = !vanishing && (q.iter().all(|v| *v > 0.0) || q.iter().all(|v| *v < 0.0));
    let differences_decrease = differences.windows(2).all(|w| w[1] <= w[0]);
    let stabilized = sign_stable
        && differences.last().zip(q.last()).is_some_and(|(d, v)| *d <= 0.05 * v.abs());
    Ok(QStarReport { table, eps, q, differences, scale, vanishing, sign_stable, differences_decrease, stabilized })
}

#[derive(Debug, Clone)]
pub struct RadiusRow {
    pub radius: f64,
    pub obs: Observables,
    pub status: RowStatus,
}

#[derive(Debug)]
pub struct WholeSpaceReport {
    pub rows: Vec<RadiusRow>,
    /// `|Q(R_{i+1}) - Q(R_i)|`
    pub differences: Vec<f64>,
    /// Observed `d_i / d_{i+1}`.
    pub decay_ratios: Vec<f64>,
    /// `(R_{i+1} / R_i)^(n-1)` for the same pairs.
    pub predicted_ratios: Vec<f64>,
    pub vanishing: bool,
    /// Observed decay at least half the predicted one at every step.
    pub decay_ok: bool,
    pub verdict: BlowupVerdict,
}

/// Approximates the whole-space problem with entire harmonic `h` by balls
/// `B_R` carrying `phi = h`.
pub fn whole_space_experiment(
    family: &ConfigFamily,
    h: &BoundaryData,
    epsilon: f64,
    radii: &[f64],
    eps_list: &[f64],
    settings: &Settings,
) -> Result<WholeSpaceReport, HarnessError> {
    let n = family.ambient_dim;
    BoundaryData::harmonic(h.monomials(), n)
        .map_err(|_| HarnessError::InvalidInput(format!("H is not harmonic in dimension {n}")))?;
    if radii.len() < 2 || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::InvalidInput("radii must be positive and strictly increasing".into()));
    }
    check_decreasing(eps_list, 4)?;
    let ball = |r: f64| {
        let mut f = family.with_outer_radius(r);
        f.outer.center = [0.0, 0.0];
        f
    };
    require_symmetric(&ball(radii[0]))?;

    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let config = ball(r).at(epsilon)?;
        let (obs, status, _) = observe_gated(&config, h, settings)?;
        rows.push(RadiusRow { radius: r, obs, status });
    }
    let q: Vec<f64> = rows.iter().map(|r| r.obs.flux.q_eps).collect();
    let scale = rows.iter().map(|r| q_scale(&r.obs)).fold(0.0, f64::max);
    let vanishing = q.iter().all(|v| v.abs() <= Q_VANISH * scale);
    let differences: Vec<f64> = q.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let decay_ratios: Vec<f64> = differences.windows(2).map(|w| w[0] / w[1]).collect();
    let predicted_ratios: Vec<f64> =
        radii.windows(2).skip(1).map(|w| (w[1] / w[0]).powi(n as i32 - 1)).collect();
    let decay_ok = vanishing
        || (!decay_ratios.is_empty()
            && decay_ratios.iter().zip(&predicted_ratios).all(|(o, p)| *o >= 0.5 * p));

    let table = sweep_unchecked(&ball(radii[radii.len() - 1]), eps_list, h, settings)?;
    let verdict = verdict(table, flatness_order(&family.shape1));
    Ok(WholeSpaceReport { rows, differences, decay_ratios, predicted_ratios, vanishing, decay_ok, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Monomial;
    use crate::harness::{log_grid, MeshPolicy};

    #[test]
    fn law_table() {
        let [g, c, a] = expected_law(2, 1.0);
        assert_eq!(g.1, Law { p: -0.5, q: 0.0 });
        assert_eq!(c.1, Law { p: 0.5, q: 0.0 });
        assert_eq!(a.1, Law { p: -0.5, q: 0.0 });
        let [g, _, a] = expected_law(3, 1.0);
        assert_eq!(g.1, Law { p: -1.0, q: -1.0 });
        assert_eq!(a.1, Law { p: 0.0, q: 1.0 });
        let [g, _, a] = expected_law(4, 1.0);
        assert_eq!(g.1, Law { p: -1.0, q: 0.0 });
        assert_eq!(a.1, Law { p: 0.0, q: 0.0 });
        let [g, _, _] = expected_law(2, 2.0);
        assert_eq!(g.1, Law { p: -0.25, q: 0.0 });
    }

    #[test]
    fn sign_condition_is_enforced() {
        let fam = ConfigFamily::symmetric(Shape::Disk { radius: 1.0 }, 5.0, 2);
        let eps = log_grid(-2.0, -3.5, 4);
        let s = Settings::default();
        let even = BoundaryData::Polynomial(vec![Monomial::new(1.0, 2, 0)]);
        assert!(matches!(blowup_scenario(&fam, &even, &eps, &s), Err(HarnessError::InvalidInput(_))));
        // x^3 - 3 x y^2 is odd but changes sign on the right half circle
        let mixed = BoundaryData::Polynomial(vec![Monomial::new(1.0, 3, 0), Monomial::new(-3.0, 1, 2)]);
        assert!(matches!(blowup_scenario(&fam, &mixed, &eps, &s), Err(HarnessError::InvalidInput(_))));
    }

    #[test]
    fn even_data_has_vanishing_q_and_odd_scales_linearly() {
        let fam = ConfigFamily::symmetric(Shape::Disk { radius: 1.0 }, 5.0, 2);
        let eps = [1e-1, 3e-2, 1e-2];
        let s = Settings { policy: MeshPolicy { levels: 1, ..Default::default() }, ..Default::default() };
        let even = BoundaryData::Polynomial(vec![Monomial::new(1.0, 2, 0), Monomial::new(-1.0, 0, 2)]);
        let r = qstar_convergence(&fam, &eps, &even, &s).unwrap();
        assert!(r.vanishing && !r.stabilized);
        let a = qstar_convergence(&fam, &eps, &BoundaryData::Linear([1.0, 0.0]), &s).unwrap();
        let b = qstar_convergence(&fam, &eps, &BoundaryData::Linear([2.0, 0.0]), &s).unwrap();
        assert!(a.sign_stable);
        for (x, y) in a.q.iter().zip(&b.q) {
            assert!((y - 2.0 * x).abs() <= 1e-9 * x.abs());
        }
    }
}
