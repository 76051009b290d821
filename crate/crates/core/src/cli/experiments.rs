use std::collections::BTreeMap;
use std::sync::Arc;

use super::output::{sweep_csv, Cell, CsvTable, Metadata};
use super::{Experiment, Report, RunConfig, RunError};
use crate::functionals::{energy, grad_sup_norm, FluxReport};
use crate::harness::{
    blowup_scenario, expected_law, fit_rate, flatness_order, klimit_experiment, observe_gated, qstar_convergence,
    sandwich, whole_space_experiment, BlowupVerdict, Column, LawCheck, RateModel, RowStatus, SweepTable, EXPONENT_TOL,
    LOG_LAW_TOL, Q_VANISH,
};
use crate::mesh::{generate_mesh, Region};
use crate::solvers::solve_perfect_constrained;

/// Experiments addressable by name.
pub struct Registry {
    entries: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::standard()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    /// solve, decompose, sweep, klimit, qstar, blowup and wholespace.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Solve));
        r.register(Box::new(Decompose));
        r.register(Box::new(Sweep));
        r.register(Box::new(KLimit));
        r.register(Box::new(QStar));
        r.register(Box::new(Blowup));
        r.register(Box::new(WholeSpace));
        r
    }

    /// Adds an experiment, replacing any previous one of the same name.
    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.entries.insert(e.name(), e);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Experiment> {
        self.entries.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

fn status_text(s: &RowStatus) -> String {
    match s {
        RowStatus::Accepted => "accepted".into(),
        RowStatus::Unchecked => "unchecked".into(),
        RowStatus::Flagged(w) => format!("flagged: {w}"),
        RowStatus::Aborted(w) => format!("aborted: {w}"),
    }
}

fn push_flux(meta: &mut Metadata, f: &FluxReport) {
    meta.push_float("a11", f.a[0][0]);
    meta.push_float("a12", f.a[0][1]);
    meta.push_float("a21", f.a[1][0]);
    meta.push_float("a22", f.a[1][1]);
    meta.push_float("b1", f.b[0]);
    meta.push_float("b2", f.b[1]);
    meta.push_float("b1_dual", f.b_dual[0]);
    meta.push_float("b2_dual", f.b_dual[1]);
    meta.push_float("outer_flux1", f.outer_flux[0]);
    meta.push_float("outer_flux2", f.outer_flux[1]);
    meta.push_float("alpha", f.alpha);
    meta.push_float("det", f.det);
    meta.push_float("c1", f.c1);
    meta.push_float("c2", f.c2);
    meta.push_float("c_diff", f.c_diff);
    meta.push_float("q_eps", f.q_eps);
    meta.push_float("reciprocity_defect", f.reciprocity_defect());
}

fn push_statuses(meta: &mut Metadata, table: &SweepTable) {
    for (i, row) in table.rows.iter().enumerate() {
        meta.push(format!("row{i}.status"), status_text(&row.status));
        if let Some(d) = row.gate_deviation {
            meta.push_float(format!("row{i}.gate_deviation"), d);
        }
    }
}

fn push_policy(meta: &mut Metadata, cfg: &RunConfig) {
    meta.push("mesh_levels", cfg.numerics.mesh_levels);
    meta.push("mesh_gate", cfg.numerics.mesh_gate);
    meta.push("exponent_tol", EXPONENT_TOL);
    meta.push("log_law_tol", LOG_LAW_TOL);
    meta.push("q_vanish", Q_VANISH);
}

fn push_checks(meta: &mut Metadata, checks: &[LawCheck]) {
    for c in checks {
        let name = c.column.name();
        meta.push(format!("law.{name}.expected"), c.law);
        if let Some(f) = &c.fit {
            meta.push_float(format!("law.{name}.exponent"), f.exponent);
            meta.push_float(format!("law.{name}.r_squared"), f.r_squared);
        }
        if let Some(l) = &c.log_law {
            meta.push_float(format!("law.{name}.log_ratio_spread"), l.spread);
        }
        meta.push(format!("law.{name}.pass"), c.pass);
    }
}

fn push_verdict(meta: &mut Metadata, v: &BlowupVerdict) {
    meta.push("flatness_order", v.flatness);
    push_checks(meta, &v.checks);
    meta.push_float("q_relative", v.q_relative);
    meta.push("q_nonzero", v.q_nonzero);
    meta.push("laws_agree", v.agrees);
    meta.push("blowup", v.blowup);
}

/// Sweep CSV plus the table's failure, if any, as a run error.
fn sweep_report(mut table: SweepTable, cfg: &RunConfig, meta: Metadata) -> Report {
    let csv = sweep_csv(&table, cfg.output.timings);
    let failure = table.failure.take().map(|e| RunError::from_harness(e, "numerics.eps_list"));
    Report { tables: vec![csv], metadata: meta, failure }
}

struct Solve;

impl Experiment for Solve {
    fn name(&self) -> &'static str {
        "solve"
    }

    fn summary(&self) -> &'static str {
        "perfect-conductivity solution at geometry.epsilon on the base mesh"
    }

    fn run(&self, cfg: &RunConfig) -> Result<Report, RunError> {
        let conf = cfg.family().at(cfg.geometry.epsilon).map_err(RunError::from_geometry)?;
        let mesh = Arc::new(generate_mesh(&conf, &cfg.mesh_params()).map_err(RunError::from_mesh)?);
        let settings = cfg.settings();
        let sol = solve_perfect_constrained(&conf, &mesh, &cfg.phi, &settings.coeff, settings.solve)
            .map_err(|e| RunError::Numerical { stage: "solve".into(), message: e.to_string() })?;
        let grad = grad_sup_norm(&sol.u, Region::is_matrix);
        let i_inf = 0.5
            * energy(&sol.u, &settings.coeff, conf.ambient_dim, Region::is_matrix)
                .map_err(|e| RunError::Numerical { stage: "energy".into(), message: e.to_string() })?;

        let mut csv = CsvTable::new(&["x", "y", "u"]);
        for (p, v) in mesh.nodes.iter().zip(&sol.u.values) {
            csv.push_row(vec![Cell::Float(p[0]), Cell::Float(p[1]), Cell::Float(*v)]);
        }
        let mut meta = Metadata::default();
        meta.push("nodes", mesh.num_nodes());
        meta.push("elements", mesh.num_elements());
        meta.push_float("c1", sol.c1);
        meta.push_float("c2", sol.c2);
        meta.push_float("flux_residual1", sol.flux_residuals[0]);
        meta.push_float("flux_residual2", sol.flux_residuals[1]);
        meta.push_float("grad_sup", grad.value);
        meta.push_float("argmax_x", grad.location[0]);
        meta.push_float("argmax_y", grad.location[1]);
        meta.push_float("energy", i_inf);
        Ok(Report { tables: vec![csv], metadata: meta, failure: None })
    }
}

struct Decompose;

impl Experiment for Decompose {
    fn name(&self) -> &'static str {
        "decompose"
    }

    fn summary(&self) -> &'static str {
        "cell problems, flux matrix and constants at geometry.epsilon"
    }

    fn run(&self, cfg: &RunConfig) -> Result<Report, RunError> {
        let eps = cfg.geometry.epsilon;
        let conf = cfg.family().at(eps).map_err(RunError::from_geometry)?;
        let (obs, status, dev) =
            observe_gated(&conf, &cfg.phi, &cfg.settings()).map_err(|e| RunError::from_harness(e, "geometry"))?;
        let table = SweepTable {
            rows: vec![crate::harness::SweepRow { eps, obs: Some(obs), status: status.clone(), gate_deviation: dev, seconds: 0.0 }],
            ambient_dim: conf.ambient_dim,
            policy: cfg.settings().policy,
            failure: None,
        };
        let mut meta = Metadata::default();
        push_flux(&mut meta, &obs.flux);
        meta.push("status", status_text(&status));
        if let Some(d) = dev {
            meta.push_float("gate_deviation", d);
        }
        Ok(Report { tables: vec![sweep_csv(&table, cfg.output.timings)], metadata: meta, failure: None })
    }
}

struct Sweep;

impl Experiment for Sweep {
    fn name(&self) -> &'static str {
        "sweep"
    }

    fn summary(&self) -> &'static str {
        "observables over numerics.eps_list with rate fits"
    }

    fn run(&self, cfg: &RunConfig) -> Result<Report, RunError> {
        let family = cfg.family();
        let table = crate::harness::sweep_epsilon(&family, &cfg.numerics.eps_list, &cfg.phi, &cfg.settings())
            .map_err(|e| RunError::from_harness(e, "numerics.eps_list"))?;
        let mut meta = Metadata::default();
        push_policy(&mut meta, cfg);
        let m = flatness_order(&family.shape1);
        for (col, law) in expected_law(cfg.geometry.ambient_dim, m) {
            meta.push(format!("law.{}.expected", col.name()), law);
        }
        for col in [Column::GradSup, Column::CDiff, Column::NegA11] {
            for (model, tag) in [(RateModel::Power, "power"), (RateModel::PowerLog, "powerlog")] {
                if let Ok(f) = fit_rate(&table, col, model) {
                    meta.push_float(format!("fit.{}.{tag}.exponent", col.name()), f.exponent);
                    meta.push_float(format!("fit.{}.{tag}.coefficient", col.name()), f.coefficient);
                    meta.push_float(format!("fit.{}.{tag}.r_squared", col.name()), f.r_squared);
                }
            }
        }
        if let Ok(s) = sandwich(&table) {
            meta.push("sandwich.lower_holds", s.lower_holds);
            meta.push_float("sandwich.lower_margin", s.lower_margin);
            meta.push_float("sandwich.constant", s.constant);
            meta.push_float("sandwich.residual", s.residual);
        }
        push_statuses(&mut meta, &table);
        Ok(sweep_report(table, cfg, meta))
    }
}

struct KLimit;

impl Experiment for KLimit {
    fn name(&self) -> &'static str {
        "klimit"
    }

    fn summary(&self) -> &'static str {
        "finite-k transmission problems approaching the perfect conductor"
    }

    fn run(&self, cfg: &RunConfig) -> Result<Report, RunError> {
        let conf = cfg.family().at(cfg.geometry.epsilon).map_err(RunError::from_geometry)?;
        let t = klimit_experiment(&conf, &cfg.phi, &cfg.numerics.k_list, &cfg.mesh_params(), &cfg.settings())
            .map_err(|e| RunError::from_harness(e, "numerics.k_list"))?;
        let mut csv = CsvTable::new(&["k", "i_k", "gap", "h1_distance", "interior_energy", "interior_term"]);
        for r in &t.rows {
            csv.push_row(
                [r.k, r.i_k, r.gap, r.h1_distance, r.interior_energy, r.interior_term].map(Cell::Float).to_vec(),
            );
        }
        let mut meta = Metadata::default();
        meta.push_float("i_inf", t.i_inf);
        meta.push("nodes", t.nodes);
        let k: Vec<f64> = t.rows.iter().map(|r| r.k).collect();
        for (name, y) in [
            ("gap", t.rows.iter().map(|r| r.gap).collect::<Vec<_>>()),
            ("interior_energy", t.rows.iter().map(|r| r.interior_energy).collect()),
        ] {
            // slopes in k, fitted as powers of 1/k
            let inv: Vec<f64> = k.iter().map(|v| 1.0 / v).collect();
            if let Ok(f) = crate::harness::fit_points(&inv, &y, RateModel::Power) {
                meta.push_float(format!("slope.{name}"), -f.exponent);
            }
        }
        Ok(Report { tables: vec![csv], metadata: meta, failure: None })
    }
}

struct QStar;

impl Experiment for QStar {
    fn name(&self) -> &'static str {
        "qstar"
    }

    fn summary(&self) -> &'static str {
        "Q_eps along the translating family"
    }

    fn run(&self, cfg: &RunConfig) -> Result<Report, RunError> {
        let r = qstar_convergence(&cfg.family(), &cfg.numerics.eps_list, &cfg.phi, &cfg.settings())
            .map_err(|e| RunError::from_harness(e, "numerics.eps_list"))?;
        let mut meta = Metadata::default();
        push_policy(&mut meta, cfg);
        meta.push_float("q_scale", r.scale);
        for (i, d) in r.differences.iter().enumerate() {
            meta.push_float(format!("q_difference{i}"), *d);
        }
        meta.push("vanishing", r.vanishing);
        meta.push("sign_stable", r.sign_stable);
        meta.push("differences_decrease", r.differences_decrease);
        meta.push("stabilized", r.stabilized);
        push_statuses(&mut meta, &r.table);
        Ok(sweep_report(r.table, cfg, meta))
    }
}

struct Blowup;

impl Experiment for Blowup {
    fn name(&self) -> &'static str {
        "blowup"
    }

    fn summary(&self) -> &'static str {
        "blow-up verdict on a symmetric configuration"
    }

    fn run(&self, cfg: &RunConfig) -> Result<Report, RunError> {
        let family = cfg.family();
        if !family.outer.is_mirror_symmetric() || family.shape1 != family.shape2 {
            return Err(RunError::config("geometry", "blowup needs identical inclusions and a centred outer domain"));
        }
        let v = blowup_scenario(&family, &cfg.phi, &cfg.numerics.eps_list, &cfg.settings())
            .map_err(|e| RunError::from_harness(e, "phi.data"))?;
        let mut meta = Metadata::default();
        push_policy(&mut meta, cfg);
        push_verdict(&mut meta, &v);
        push_statuses(&mut meta, &v.table);
        Ok(sweep_report(v.table, cfg, meta))
    }
}

struct WholeSpace;

impl Experiment for WholeSpace {
    fn name(&self) -> &'static str {
        "wholespace"
    }

    fn summary(&self) -> &'static str {
        "whole-space problem truncated to balls of growing radius"
    }

    fn run(&self, cfg: &RunConfig) -> Result<Report, RunError> {
        let n = &cfg.numerics;
        let r = whole_space_experiment(&cfg.family(), &cfg.phi, cfg.geometry.epsilon, &n.radii, &n.eps_list, &cfg.settings())
            .map_err(|e| RunError::from_harness(e, "phi.data"))?;
        let mut radial = CsvTable::new(&["radius", "q_eps", "b1", "b2", "outer1", "outer2", "grad_sup", "nodes"]);
        for row in &r.rows {
            let f = &row.obs.flux;
            let mut cells: Vec<Cell> =
                [row.radius, f.q_eps, f.b[0], f.b[1], f.outer_flux[0], f.outer_flux[1], row.obs.grad.value]
                    .map(Cell::Float)
                    .to_vec();
            cells.push(Cell::Int(row.obs.nodes));
            radial.push_row(cells);
            if let RowStatus::Flagged(w) = &row.status {
                radial.push_comment(format!("flagged radius={}: {w}", row.radius));
            }
        }
        let mut meta = Metadata::default();
        push_policy(&mut meta, cfg);
        for (i, d) in r.differences.iter().enumerate() {
            meta.push_float(format!("q_difference{i}"), *d);
        }
        for (i, (o, p)) in r.decay_ratios.iter().zip(&r.predicted_ratios).enumerate() {
            meta.push_float(format!("decay_ratio{i}"), *o);
            meta.push_float(format!("predicted_ratio{i}"), *p);
        }
        meta.push("vanishing", r.vanishing);
        meta.push("decay_ok", r.decay_ok);
        push_verdict(&mut meta, &r.verdict);
        push_statuses(&mut meta, &r.verdict.table);
        let mut report = sweep_report(r.verdict.table, cfg, meta);
        report.tables[0].suffix = Some("sweep".into());
        report.tables.insert(0, radial);
        Ok(report)
    }
}
