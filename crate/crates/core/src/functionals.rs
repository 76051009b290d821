//! Scalar observables: flux matrix and vector, α, |C1 − C2|, Q_ε,
//! energies, gradient sup-norm and the analytic gap comparators.

use thiserror::Error;

use crate::assembly::{flux::flux_from_residual, stiffness::element_tensor, AssemblyError, CoefficientField, ScalarField};
use crate::geometry::{Configuration, GeometryError, Point};
use crate::mesh::{BoundaryTag, Region};
use crate::solvers::CellSolutions;

/// Relative asymmetry of the flux matrix beyond which the mesh is
/// considered unresolved.
pub const RECIPROCITY_LIMIT: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("flux: reciprocity broken, |a12 - a21| / |a12| = {0:e}")]
    ReciprocityBroken(f64),
    #[error("flux: sign table violated ({0})")]
    SignViolation(String),
    #[error("flux: system singular (det = {det:e})")]
    SingularSystem { det: f64 },
    #[error("quadrature: not converged (estimated error {error:e})")]
    QuadratureNotConverged { error: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// Fluxes of the cell solutions. `a[i][j]` is the flux of `v_{j+1}`
/// through the boundary of inclusion `i+1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxReport {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    /// `b` recomputed from the outer fluxes of v1, v2 weighted by φ.
    pub b_dual: [f64; 2],
    pub outer_flux: [f64; 2],
    pub alpha: f64,
    pub det: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_diff: f64,
    pub q_eps: f64,
}

impl FluxReport {
    pub fn reciprocity_defect(&self) -> f64 {
        (self.a[0][1] - self.a[1][0]).abs() / self.a[0][1].abs()
    }
}

pub fn flux_report(cells: &CellSolutions) -> Result<FluxReport, FunctionalError> {
    let op = &cells.operator;
    let mesh = &cells.v1.mesh;
    let inc1 = mesh.tagged_nodes(BoundaryTag::Inc1);
    let inc2 = mesh.tagged_nodes(BoundaryTag::Inc2);
    let outer = mesh.tagged_nodes(BoundaryTag::Outer);
    let r1 = op.apply(&cells.v1.values);
    let r2 = op.apply(&cells.v2.values);
    let r3 = op.apply(&cells.v3.values);

    let a = [
        [flux_from_residual(&r1, &inc1, BoundaryTag::Inc1), flux_from_residual(&r2, &inc1, BoundaryTag::Inc1)],
        [flux_from_residual(&r1, &inc2, BoundaryTag::Inc2), flux_from_residual(&r2, &inc2, BoundaryTag::Inc2)],
    ];
    let b = [flux_from_residual(&r3, &inc1, BoundaryTag::Inc1), flux_from_residual(&r3, &inc2, BoundaryTag::Inc2)];
    let outer_flux = [flux_from_residual(&r1, &outer, BoundaryTag::Outer), flux_from_residual(&r2, &outer, BoundaryTag::Outer)];
    let dual = |r: &[f64]| -outer.iter().map(|&i| cells.phi.eval(mesh.nodes[i]) * r[i]).sum::<f64>();
    let b_dual = [dual(&r1), dual(&r2)];

    let recip = (a[0][1] - a[1][0]).abs() / a[0][1].abs();
    if !(recip <= RECIPROCITY_LIMIT) {
        return Err(FunctionalError::ReciprocityBroken(recip));
    }
    if !(a[0][0] < 0.0 && a[1][1] < 0.0 && a[0][1] > 0.0 && a[1][0] > 0.0) {
        return Err(FunctionalError::SignViolation(format!(
            "a11 = {:e}, a22 = {:e}, a12 = {:e}, a21 = {:e}",
            a[0][0], a[1][1], a[0][1], a[1][0]
        )));
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !(det > 1e-12 * a[0][0].abs() * a[1][1].abs()) {
        return Err(FunctionalError::SingularSystem { det });
    }
    let c1 = (-b[0] * a[1][1] + b[1] * a[0][1]) / det;
    let c2 = (-b[1] * a[0][0] + b[0] * a[1][0]) / det;
    let alpha = (a[0][0] + a[0][1]) / (a[1][1] + a[0][1]);
    let c_diff = (b[0] - alpha * b[1]).abs() / (a[0][0] - alpha * a[0][1]).abs();
    let q_eps = b[0] * outer_flux[1] - b[1] * outer_flux[0];
    Ok(FluxReport { a, b, b_dual, outer_flux, alpha, det, c1, c2, c_diff, q_eps })
}

/// |C1 − C2| from the α form of the 2×2 system.
pub fn c_diff(report: &FluxReport) -> f64 {
    report.c_diff
}

/// Blow-up functional `b1 · outer2 − b2 · outer1`.
pub fn q_epsilon(report: &FluxReport) -> f64 {
    report.q_eps
}

/// `∫ w ∇uᵀ A ∇u` over elements whose region passes `filter`, with `w` the
/// axisymmetric weight. No factor 1/2.
pub fn energy(
    field: &ScalarField,
    coeff: &CoefficientField,
    ambient_dim: usize,
    filter: impl Fn(Region) -> bool,
) -> Result<f64, FunctionalError> {
    let mesh = &field.mesh;
    let mut total = 0.0;
    for e in 0..mesh.elements.len() {
        if !filter(mesh.element_region[e]) {
            continue;
        }
        let m = element_tensor(mesh, e, coeff, ambient_dim)?;
        let g = field.gradient(e);
        total += g[0] * (m[0][0] * g[0] + m[0][1] * g[1]) + g[1] * (m[1][0] * g[0] + m[1][1] * g[1]);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSup {
    pub value: f64,
    /// centroid of the maximising element
    pub location: Point,
    pub element: usize,
    pub region: Region,
}

/// Largest element-gradient magnitude over the filtered elements.
pub fn grad_sup_norm(field: &ScalarField, filter: impl Fn(Region) -> bool) -> GradientSup {
    let mesh = &field.mesh;
    let mut best = GradientSup { value: -1.0, location: [0.0, 0.0], element: 0, region: Region::Bulk };
    for e in 0..mesh.elements.len() {
        let region = mesh.element_region[e];
        if !filter(region) {
            continue;
        }
        let g = field.gradient(e);
        let v = g[0].hypot(g[1]);
        if v > best.value {
            best = GradientSup { value: v, location: mesh.centroid(e), element: e, region };
        }
    }
    best.value = best.value.max(0.0);
    best
}

/// Adaptive Gauss–Kronrod (7/15) quadrature to relative tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64, FunctionalError> {
    const XK: [f64; 8] = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_5,
        0.0,
    ];
    const WK: [f64; 8] = [
        0.022_935_322_010_529_22,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_2,
        0.140_653_259_715_525_9,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_728_0,
    ];
    const WG: [f64; 4] = [
        0.129_484_966_168_869_7,
        0.279_705_391_489_276_7,
        0.381_830_050_505_118_9,
        0.417_959_183_673_469_4,
    ];
    let gk = |a: f64, b: f64| {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut k = WK[7] * fc;
        let mut g = WG[3] * fc;
        for j in 0..7 {
            let s = f(c - h * XK[j]) + f(c + h * XK[j]);
            k += WK[j] * s;
            if j % 2 == 1 {
                g += WG[j / 2] * s;
            }
        }
        (k * h, ((k - g) * h).abs())
    };
    let mut stack = vec![(a, b, 0usize)];
    let mut total = 0.0f64;
    let mut err_total = 0.0f64;
    let whole = gk(a, b).0.abs();
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err) = gk(lo, hi);
        let local_tol = tol * whole.max(total.abs()) * ((hi - lo) / (b - a)).max(1e-6);
        if err <= local_tol || err <= 1e-15 * v.abs() {
            total += v;
            err_total += err;
        } else if depth >= 60 {
            return Err(FunctionalError::QuadratureNotConverged { error: err });
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    if !(err_total <= 100.0 * tol * total.abs().max(f64::MIN_POSITIVE)) {
        return Err(FunctionalError::QuadratureNotConverged { error: err_total });
    }
    Ok(total)
}

/// `∫_{|y|<r/2} dy / t(y)` for `n = 2` and `∫_0^{r/2} y^{n-2} / t(y) dy`
/// for `n >= 3`, with `t` the gap thickness.
pub fn gap_integral_profile(t: impl Fn(f64) -> f64, r: f64, ambient_dim: usize) -> Result<f64, FunctionalError> {
    let half = 0.5 * r;
    if ambient_dim <= 2 {
        Ok(2.0 * integrate(|y| 1.0 / t(y), 0.0, half, 1e-12)?)
    } else {
        let p = ambient_dim as i32 - 2;
        integrate(|y| y.powi(p) / t(y), 0.0, half, 1e-12)
    }
}

/// Gap integral of a configuration over its gap window. For two-sided
/// symmetric bodies this is `∫ dy / (g − f + ε)`.
pub fn gap_integral(config: &Configuration, ambient_dim: usize) -> Result<f64, FunctionalError> {
    gap_integral_profile(|y| config.gap_thickness(y), config.window_radius, ambient_dim)
}

/// Comparator `w̄ = −(x − g(y) − ε/2) / (g(y) − f(y) + ε)`: 1 on the left
/// inclusion, 0 on the right one, affine in x across the gap.
pub fn wbar(config: &Configuration, p: Point) -> Result<f64, FunctionalError> {
    let t = crate::geometry::gap_profile(config, p[1])?;
    Ok((config.right_boundary_x(p[1]) - p[0]) / t)
}

/// `∫ |∂_y w̄|²` over the gap window `|y| < r/2` (weighted by `y^{n-2}`
/// on the half window for n ≥ 3). The x-integral is done in closed form.
pub fn wbar_transverse_energy(config: &Configuration, ambient_dim: usize) -> Result<f64, FunctionalError> {
    let s1 = &config.inclusion1.shape;
    let s2 = &config.inclusion2.shape;
    let density = |y: f64| {
        let t = config.gap_thickness(y);
        let xr = s2.depth_slope(y);
        let tp = s1.depth_slope(y) + s2.depth_slope(y);
        (xr * xr - xr * tp + tp * tp / 3.0) / t
    };
    let half = 0.5 * config.window_radius;
    if ambient_dim <= 2 {
        Ok(2.0 * integrate(density, 0.0, half, 1e-10)?)
    } else {
        let p = ambient_dim as i32 - 2;
        integrate(|y| y.powi(p) * density(y), 0.0, half, 1e-10)
    }
}
