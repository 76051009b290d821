use std::fmt;
use std::sync::Arc;

use super::AssemblyError;
use crate::geometry::Point;
use crate::mesh::Region;

pub type MatrixFn = Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;

/// Conductivity tensor field.
#[derive(Clone)]
pub enum CoefficientField {
    Identity,
    /// Scalar conductivity per region, indexed GAP, BULK, INC1_INT, INC2_INT.
    ScalarByRegion([f64; 4]),
    /// Symmetric matrix field with declared ellipticity bounds.
    MatrixValued { field: MatrixFn, lambda: f64, big_lambda: f64 },
    /// `k * inclusion` inside the inclusions and `matrix` outside.
    Transmission { k: f64, inclusion: Box<CoefficientField>, matrix: Box<CoefficientField> },
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientField::Identity => write!(f, "Identity"),
            CoefficientField::ScalarByRegion(k) => write!(f, "ScalarByRegion({k:?})"),
            CoefficientField::MatrixValued { lambda, big_lambda, .. } => {
                write!(f, "MatrixValued {{ lambda: {lambda}, big_lambda: {big_lambda} }}")
            }
            CoefficientField::Transmission { k, inclusion, matrix } => {
                write!(f, "Transmission {{ k: {k}, inclusion: {inclusion:?}, matrix: {matrix:?} }}")
            }
        }
    }
}

fn region_index(r: Region) -> usize {
    match r {
        Region::Gap => 0,
        Region::Bulk => 1,
        Region::Inc1Int => 2,
        Region::Inc2Int => 3,
    }
}

impl CoefficientField {
    /// Scalar `k` in the inclusions and 1 in the matrix.
    pub fn high_contrast(k: f64) -> Self {
        CoefficientField::ScalarByRegion([1.0, 1.0, k, k])
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            CoefficientField::Identity => CoefficientField::ScalarByRegion([s; 4]),
            CoefficientField::ScalarByRegion(k) => CoefficientField::ScalarByRegion(k.map(|v| s * v)),
            CoefficientField::MatrixValued { field, lambda, big_lambda } => {
                let f = field.clone();
                CoefficientField::MatrixValued {
                    field: Arc::new(move |p| f(p).map(|row| row.map(|v| s * v))),
                    lambda: s * lambda,
                    big_lambda: s * big_lambda,
                }
            }
            CoefficientField::Transmission { k, inclusion, matrix } => CoefficientField::Transmission {
                k: *k,
                inclusion: Box::new(inclusion.scaled(s)),
                matrix: Box::new(matrix.scaled(s)),
            },
        }
    }

    /// Whether the tensor is constant on each element, so one evaluation
    /// at the centroid is exact.
    pub fn is_piecewise_constant(&self) -> bool {
        match self {
            CoefficientField::Identity | CoefficientField::ScalarByRegion(_) => true,
            CoefficientField::MatrixValued { .. } => false,
            CoefficientField::Transmission { inclusion, matrix, .. } => {
                inclusion.is_piecewise_constant() && matrix.is_piecewise_constant()
            }
        }
    }

    /// Tensor at `p` in an element of `region`, checked for symmetry and
    /// ellipticity.
    pub fn eval(&self, region: Region, p: Point) -> Result<[[f64; 2]; 2], AssemblyError> {
        let bad = || AssemblyError::EllipticityViolated { x: p[0], y: p[1] };
        match self {
            CoefficientField::Identity => Ok([[1.0, 0.0], [0.0, 1.0]]),
            CoefficientField::ScalarByRegion(k) => {
                let v = k[region_index(region)];
                if v > 0.0 && v.is_finite() {
                    Ok([[v, 0.0], [0.0, v]])
                } else {
                    Err(bad())
                }
            }
            CoefficientField::MatrixValued { field, lambda, big_lambda } => {
                let a = field(p);
                let (lo, hi) = sym_eigen(a).ok_or_else(bad)?;
                let slack = 1e-12 * big_lambda.abs();
                if lo < lambda - slack || hi > big_lambda + slack || !(*lambda > 0.0) {
                    return Err(bad());
                }
                Ok(a)
            }
            CoefficientField::Transmission { k, inclusion, matrix } => {
                if region.is_inclusion() {
                    if !(*k > 0.0 && k.is_finite()) {
                        return Err(bad());
                    }
                    Ok(inclusion.eval(region, p)?.map(|row| row.map(|v| k * v)))
                } else {
                    matrix.eval(region, p)
                }
            }
        }
    }
}

/// Eigenvalues of a symmetric 2x2 matrix; `None` if not symmetric.
fn sym_eigen(a: [[f64; 2]; 2]) -> Option<(f64, f64)> {
    let scale = a[0][0].abs().max(a[1][1].abs()).max(a[0][1].abs()).max(f64::MIN_POSITIVE);
    if (a[0][1] - a[1][0]).abs() > 1e-12 * scale || a.iter().flatten().any(|v| !v.is_finite()) {
        return None;
    }
    let m = 0.5 * (a[0][0] + a[1][1]);
    let d = (0.25 * (a[0][0] - a[1][1]).powi(2) + a[0][1] * a[0][1]).sqrt();
    Some((m - d, m + d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_bounds_are_checked() {
        let good = CoefficientField::MatrixValued {
            field: Arc::new(|_| [[2.0, 0.5], [0.5, 1.0]]),
            lambda: 0.5,
            big_lambda: 3.0,
        };
        assert!(good.eval(Region::Bulk, [0.0, 0.0]).is_ok());
        let asym = CoefficientField::MatrixValued {
            field: Arc::new(|_| [[2.0, 0.5], [0.0, 1.0]]),
            lambda: 0.5,
            big_lambda: 3.0,
        };
        assert!(asym.eval(Region::Bulk, [0.0, 0.0]).is_err());
        let weak = CoefficientField::MatrixValued {
            field: Arc::new(|p| [[p[0], 0.0], [0.0, 1.0]]),
            lambda: 0.5,
            big_lambda: 3.0,
        };
        assert!(matches!(
            weak.eval(Region::Bulk, [0.1, 0.0]),
            Err(AssemblyError::EllipticityViolated { .. })
        ));
    }

    #[test]
    fn transmission_scales_inclusions() {
        let c = CoefficientField::Transmission {
            k: 10.0,
            inclusion: Box::new(CoefficientField::Identity),
            matrix: Box::new(CoefficientField::Identity),
        };
        assert_eq!(c.eval(Region::Inc2Int, [0.0, 0.0]).unwrap()[0][0], 10.0);
        assert_eq!(c.eval(Region::Gap, [0.0, 0.0]).unwrap()[0][0], 1.0);
    }
}
