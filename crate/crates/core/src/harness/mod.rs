//! Experiment orchestration: ε-sweeps with a two-level mesh gate, rate
//! fits, the k-limit study, Q_ε sequences, blow-up verdicts and the
//! whole-space truncation.

mod fit;
mod klimit;
mod scenarios;

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::CoefficientField;
use crate::functionals::{energy, flux_report, grad_sup_norm, FluxReport, FunctionalError, GradientSup};
use crate::geometry::{BoundaryData, Configuration, GeometryError, OuterDomain, Point, Shape};
use crate::mesh::{generate_mesh, MeshError, MeshParams, Region};
use crate::solvers::{reconstruct_from_decomposition, solve_cell_problems, SolveOptions, SolverError};

pub use fit::{fit_points, fit_rate, log_law, log_law_points, sandwich, LogLawCheck, RateFit, RateModel, Sandwich};
pub use klimit::{klimit_experiment, KLimitRow, KLimitTable};
pub use scenarios::{
    blowup_scenario, expected_law, flatness_order, qstar_convergence, whole_space_experiment, BlowupVerdict, Law,
    LawCheck, QStarReport, RadiusRow, WholeSpaceReport, EXPONENT_TOL, LOG_LAW_TOL, Q_VANISH,
};

/// Default relative agreement required between consecutive mesh levels.
pub const MESH_GATE: f64 = 0.02;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("harness: insufficient data ({got} usable points, need {needed})")]
    InsufficientData { needed: usize, got: usize },
    #[error("harness: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

impl HarnessError {
    pub fn is_budget(&self) -> bool {
        matches!(self, HarnessError::Mesh(MeshError::BudgetExceeded { .. }))
    }
}

/// Two inclusion shapes translated towards each other along the x axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFamily {
    pub outer: OuterDomain,
    pub shape1: Shape,
    pub shape2: Shape,
    pub ambient_dim: usize,
}

impl ConfigFamily {
    pub fn symmetric(shape: Shape, outer_radius: f64, ambient_dim: usize) -> Self {
        Self { outer: OuterDomain::disk([0.0, 0.0], outer_radius), shape1: shape.clone(), shape2: shape, ambient_dim }
    }

    pub fn at(&self, epsilon: f64) -> Result<Configuration, GeometryError> {
        Configuration::place(self.outer, self.shape1.clone(), self.shape2.clone(), epsilon, self.ambient_dim)
    }

    pub fn with_outer_radius(&self, radius: f64) -> Self {
        Self { outer: OuterDomain { radius, ..self.outer }, ..self.clone() }
    }
}

/// Mesh hierarchy: level `l` shrinks `h_bulk` by `2^(l/2)` and grows the gap
/// layer count by the same factor, so the gap resolution follows ε.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshPolicy {
    pub base: MeshParams,
    pub levels: usize,
    pub gate: f64,
}

impl Default for MeshPolicy {
    fn default() -> Self {
        Self { base: MeshParams::default(), levels: 2, gate: MESH_GATE }
    }
}

impl MeshPolicy {
    pub fn params(&self, level: usize) -> MeshParams {
        let f = 2f64.powf(0.5 * level as f64);
        let layers = (self.base.layers() as f64 * f).ceil() as usize;
        MeshParams { h_bulk: self.base.h_bulk / f, gap_layers_min: layers.div_ceil(2) * 2, ..self.base.clone() }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.base.validate()?;
        if self.levels == 0 || self.levels > 4 {
            return Err(HarnessError::InvalidInput(format!("mesh levels must lie in 1..=4, got {}", self.levels)));
        }
        if !(self.gate > 0.0 && self.gate < 1.0) {
            return Err(HarnessError::InvalidInput(format!("mesh gate must lie in (0, 1), got {}", self.gate)));
        }
        Ok(())
    }
}

/// Everything a sweep or scenario needs besides geometry and data.
#[derive(Debug, Clone)]
pub struct Settings {
    pub policy: MeshPolicy,
    pub solve: SolveOptions,
    pub coeff: CoefficientField,
}

impl Default for Settings {
    fn default() -> Self {
        Self { policy: MeshPolicy::default(), solve: SolveOptions::default(), coeff: CoefficientField::Identity }
    }
}

/// Observables of one perfect-conductivity solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub flux: FluxReport,
    pub grad: GradientSup,
    /// `I_∞[u] = ½ ∫ w |∇u|²` over the matrix region.
    pub energy: f64,
    pub nodes: usize,
}

impl Observables {
    pub fn argmax(&self) -> Point {
        self.grad.location
    }
}

pub fn observe(
    config: &Configuration,
    params: &MeshParams,
    phi: &BoundaryData,
    settings: &Settings,
) -> Result<Observables, HarnessError> {
    let mesh = Arc::new(generate_mesh(config, params)?);
    let cells = solve_cell_problems(config, &mesh, phi, &settings.coeff, settings.solve)?;
    let flux = flux_report(&cells)?;
    let sol = reconstruct_from_decomposition(&cells, &flux)?;
    let grad = grad_sup_norm(&sol.u, Region::is_matrix);
    let energy = 0.5 * energy(&sol.u, &settings.coeff, config.ambient_dim, Region::is_matrix)?;
    Ok(Observables { flux, grad, energy, nodes: mesh.num_nodes() })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    /// Consecutive mesh levels agree within the gate.
    Accepted,
    /// Single-level policy, no gate applied.
    Unchecked,
    /// Values reported but excluded from fits.
    Flagged(String),
    /// No values: the row ran out of node budget.
    Aborted(String),
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub eps: f64,
    pub obs: Option<Observables>,
    pub status: RowStatus,
    /// Largest relative disagreement between the two finest levels.
    pub gate_deviation: Option<f64>,
    pub seconds: f64,
}

impl SweepRow {
    pub fn usable(&self) -> bool {
        matches!(self.status, RowStatus::Accepted | RowStatus::Unchecked) && self.obs.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    GradSup,
    CDiff,
    NegA11,
    A12,
    NegA22,
    B1,
    B2,
    QEps,
    Energy,
}

impl Column {
    pub fn value(self, o: &Observables) -> f64 {
        let f = &o.flux;
        match self {
            Column::GradSup => o.grad.value,
            Column::CDiff => f.c_diff,
            Column::NegA11 => -f.a[0][0],
            Column::A12 => f.a[0][1],
            Column::NegA22 => -f.a[1][1],
            Column::B1 => f.b[0],
            Column::B2 => f.b[1],
            Column::QEps => f.q_eps,
            Column::Energy => o.energy,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Column::GradSup => "grad_sup",
            Column::CDiff => "c_diff",
            Column::NegA11 => "-a11",
            Column::A12 => "a12",
            Column::NegA22 => "-a22",
            Column::B1 => "b1",
            Column::B2 => "b2",
            Column::QEps => "q_eps",
            Column::Energy => "energy",
        }
    }
}

#[derive(Debug)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub ambient_dim: usize,
    pub policy: MeshPolicy,
    /// First fatal error in ε order; rows after it are dropped.
    pub failure: Option<HarnessError>,
}

impl SweepTable {
    pub fn usable(&self) -> impl Iterator<Item = (f64, &Observables)> {
        self.rows.iter().filter(|r| r.usable()).map(|r| (r.eps, r.obs.as_ref().unwrap()))
    }

    /// `(eps, value)` over usable rows.
    pub fn column(&self, col: Column) -> (Vec<f64>, Vec<f64>) {
        self.usable().map(|(e, o)| (e, col.value(o))).unzip()
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// `n` log-uniform values from `10^from` down to `10^to`.
pub fn log_grid(from: f64, to: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![10f64.powf(from)];
    }
    (0..n).map(|i| 10f64.powf(from + (to - from) * i as f64 / (n - 1) as f64)).collect()
}

pub(crate) fn check_decreasing(eps: &[f64], min_len: usize) -> Result<(), HarnessError> {
    if eps.len() < min_len {
        return Err(HarnessError::InvalidInput(format!("need at least {min_len} epsilon values, got {}", eps.len())));
    }
    if eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(HarnessError::InvalidInput("epsilon values must be positive and strictly decreasing".into()));
    }
    Ok(())
}

fn relative_gap(fine: f64, coarse: f64, floor: f64) -> f64 {
    (fine - coarse).abs() / fine.abs().max(floor).max(f64::MIN_POSITIVE)
}

/// Largest relative change of the gated observables between two levels.
pub fn level_deviation(fine: &Observables, coarse: &Observables) -> f64 {
    let f = &fine.flux;
    let c_floor = 1e-6 * f.c1.abs().max(f.c2.abs());
    let q_floor = 1e-6 * f.b[0].abs().max(f.b[1].abs()) * f.outer_flux[0].abs().max(f.outer_flux[1].abs());
    [
        relative_gap(fine.grad.value, coarse.grad.value, 0.0),
        relative_gap(f.c_diff, coarse.flux.c_diff, c_floor),
        relative_gap(f.a[0][0], coarse.flux.a[0][0], 0.0),
        relative_gap(f.q_eps.abs(), coarse.flux.q_eps.abs(), q_floor),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Solves on the policy's levels from coarse to fine and gates the two
/// finest. Values come from the finest level that fits the node budget.
pub fn observe_gated(
    config: &Configuration,
    phi: &BoundaryData,
    settings: &Settings,
) -> Result<(Observables, RowStatus, Option<f64>), HarnessError> {
    let policy = &settings.policy;
    let mut coarse: Option<Observables> = None;
    for level in 0..policy.levels {
        let obs = match observe(config, &policy.params(level), phi, settings) {
            Ok(o) => o,
            Err(e) if e.is_budget() && coarse.is_some() => {
                return Ok((coarse.unwrap(), RowStatus::Flagged(format!("level {level} exceeds the node budget")), None));
            }
            Err(e) => return Err(e),
        };
        if level + 1 == policy.levels {
            return Ok(match coarse {
                None => (obs, RowStatus::Unchecked, None),
                Some(c) => {
                    let dev = level_deviation(&obs, &c);
                    let status = if dev <= policy.gate {
                        RowStatus::Accepted
                    } else {
                        RowStatus::Flagged(format!("levels disagree by {:.2}%", 100.0 * dev))
                    };
                    (obs, status, Some(dev))
                }
            });
        }
        coarse = Some(obs);
    }
    unreachable!("policy has at least one level")
}

/// One row per ε; rows run concurrently and are assembled in ε order.
pub fn sweep_epsilon(
    family: &ConfigFamily,
    eps_list: &[f64],
    phi: &BoundaryData,
    settings: &Settings,
) -> Result<SweepTable, HarnessError> {
    check_decreasing(eps_list, 4)?;
    sweep_unchecked(family, eps_list, phi, settings)
}

pub(crate) fn sweep_unchecked(
    family: &ConfigFamily,
    eps_list: &[f64],
    phi: &BoundaryData,
    settings: &Settings,
) -> Result<SweepTable, HarnessError> {
    settings.policy.validate()?;
    // geometry problems are configuration errors, reported before any work
    let configs: Vec<Configuration> = eps_list.iter().map(|&e| family.at(e)).collect::<Result<_, _>>()?;
    let results: Vec<(Result<(Observables, RowStatus, Option<f64>), HarnessError>, f64)> = configs
        .par_iter()
        .map(|c| {
            let t = Instant::now();
            let r = observe_gated(c, phi, settings);
            (r, t.elapsed().as_secs_f64())
        })
        .collect();

    let mut rows = Vec::with_capacity(eps_list.len());
    let mut failure = None;
    for (&eps, (res, seconds)) in eps_list.iter().zip(results) {
        match res {
            Ok((obs, status, gate_deviation)) => {
                rows.push(SweepRow { eps, obs: Some(obs), status, gate_deviation, seconds })
            }
            Err(e) if e.is_budget() => rows.push(SweepRow {
                eps,
                obs: None,
                status: RowStatus::Aborted(e.to_string()),
                gate_deviation: None,
                seconds,
            }),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    Ok(SweepTable { rows, ambient_dim: family.ambient_dim, policy: settings.policy.clone(), failure })
}
