use super::{Column, HarnessError, SweepTable};

/// Minimum number of points for any fit.
const MIN_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateModel {
    /// `y = C ε^p`
    Power,
    /// `y = C (ε |ln ε|)^p`, with `p = -1` the law `C / (ε |ln ε|)`
    PowerLog,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub model: RateModel,
    pub exponent: f64,
    pub coefficient: f64,
    /// Largest relative deviation of the data from the fitted law.
    pub residual: f64,
    /// In log coordinates.
    pub r_squared: f64,
    pub points: usize,
}

impl RateFit {
    pub fn predict(&self, eps: f64) -> f64 {
        self.coefficient * abscissa(self.model, eps).powf(self.exponent)
    }
}

fn abscissa(model: RateModel, eps: f64) -> f64 {
    match model {
        RateModel::Power => eps,
        RateModel::PowerLog => eps * eps.ln().abs(),
    }
}

/// Least squares in log coordinates.
pub fn fit_points(eps: &[f64], y: &[f64], model: RateModel) -> Result<RateFit, HarnessError> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(y)
        .filter(|(e, v)| **e > 0.0 && **e < 1.0 && **v > 0.0 && v.is_finite())
        .map(|(e, v)| (abscissa(model, *e).ln(), v.ln()))
        .collect();
    if pts.len() < MIN_POINTS {
        return Err(HarnessError::InsufficientData { needed: MIN_POINTS, got: pts.len() });
    }
    let m = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = pts.iter().map(|(_, y)| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(HarnessError::InsufficientData { needed: MIN_POINTS, got: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let residual = pts
        .iter()
        .map(|(x, y)| ((intercept + slope * x - y).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(RateFit { model, exponent: slope, coefficient: intercept.exp(), residual, r_squared, points: pts.len() })
}

/// Fit over the usable rows of a sweep.
pub fn fit_rate(table: &SweepTable, column: Column, model: RateModel) -> Result<RateFit, HarnessError> {
    let (eps, y) = table.column(column);
    fit_points(&eps, &y, model)
}

/// Stability of `y / (ε^p |ln ε|^q)` across a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLawCheck {
    pub ratios: Vec<f64>,
    pub mean: f64,
    /// `max |ratio / mean - 1|`
    pub spread: f64,
}

pub fn log_law_points(eps: &[f64], y: &[f64], p: f64, q: f64) -> Result<LogLawCheck, HarnessError> {
    if eps.len() < MIN_POINTS {
        return Err(HarnessError::InsufficientData { needed: MIN_POINTS, got: eps.len() });
    }
    let ratios: Vec<f64> = eps.iter().zip(y).map(|(e, v)| v / (e.powf(p) * e.ln().abs().powf(q))).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = ratios.iter().map(|r| (r / mean - 1.0).abs()).fold(0.0, f64::max);
    Ok(LogLawCheck { ratios, mean, spread })
}

pub fn log_law(table: &SweepTable, column: Column, p: f64, q: f64) -> Result<LogLawCheck, HarnessError> {
    let (eps, y) = table.column(column);
    log_law_points(&eps, &y, p, q)
}

/// Row-wise check of `|C1 - C2| / ε <= grad_sup <= C (|C1 - C2| / ε + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    pub lower_holds: bool,
    /// `min grad_sup / (c_diff / ε)`, at least 1 when the lower bound holds
    pub lower_margin: f64,
    /// Smallest constant making the upper bound hold on every row.
    pub constant: f64,
    /// Largest relative slack of the upper bound.
    pub residual: f64,
}

pub fn sandwich(table: &SweepTable) -> Result<Sandwich, HarnessError> {
    let rows: Vec<(f64, f64)> = table.usable().map(|(e, o)| (o.flux.c_diff / e, o.grad.value)).collect();
    if rows.is_empty() {
        return Err(HarnessError::InsufficientData { needed: 1, got: 0 });
    }
    let lower_margin = rows.iter().map(|(c, g)| g / c).fold(f64::INFINITY, f64::min);
    let constant = rows.iter().map(|(c, g)| g / (c + 1.0)).fold(0.0, f64::max);
    let residual = rows.iter().map(|(c, g)| (constant * (c + 1.0) - g) / g).fold(0.0, f64::max);
    Ok(Sandwich { lower_holds: lower_margin >= 1.0, lower_margin, constant, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::log_grid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn synthetic_power_law() {
        let eps = log_grid(-2.0, -4.0, 5);
        let y: Vec<f64> = eps.iter().map(|e| 3.0 * e.powf(-0.5)).collect();
        let f = fit_points(&eps, &y, RateModel::Power).unwrap();
        assert_relative_eq!(f.exponent, -0.5, epsilon = 1e-12);
        assert_relative_eq!(f.coefficient, 3.0, max_relative = 1e-10);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        assert!(f.residual < 1e-10);
    }

    #[test]
    fn synthetic_power_log_law() {
        let eps = log_grid(-2.0, -5.0, 7);
        let y: Vec<f64> = eps.iter().map(|e| 7.0 / (e * e.ln().abs())).collect();
        let f = fit_points(&eps, &y, RateModel::PowerLog).unwrap();
        assert!((f.coefficient - 7.0).abs() < 1e-6);
        assert_relative_eq!(f.exponent, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn too_few_points() {
        let e = [1e-2, 1e-3, 1e-4];
        assert!(matches!(
            fit_points(&e, &[1.0, 2.0, 3.0], RateModel::Power),
            Err(HarnessError::InsufficientData { needed: 4, got: 3 })
        ));
        // non-positive values do not count
        assert!(fit_points(&[1e-2, 1e-3, 1e-4, 1e-5], &[1.0, 2.0, 0.0, 3.0], RateModel::Power).is_err());
    }

    #[test]
    fn log_law_of_exact_data() {
        let eps = log_grid(-2.0, -5.0, 7);
        let y: Vec<f64> = eps.iter().map(|e| 0.5 * e.ln().abs()).collect();
        let c = log_law_points(&eps, &y, 0.0, 1.0).unwrap();
        assert!(c.spread < 1e-14);
        assert_relative_eq!(c.mean, 0.5, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn recovers_any_exponent(p in -2.0f64..1.0, c in 0.1f64..100.0) {
            let eps = log_grid(-1.5, -4.5, 6);
            let y: Vec<f64> = eps.iter().map(|e| c * e.powf(p)).collect();
            let f = fit_points(&eps, &y, RateModel::Power).unwrap();
            prop_assert!((f.exponent - p).abs() < 1e-10);
            prop_assert!((f.coefficient / c - 1.0).abs() < 1e-9);
        }
    }
}
