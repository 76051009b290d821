//! Plain-text run configuration: `[section]` headers and `key = value`
//! lines, `#` comments. Keys are addressed as `section.key` in overrides;
//! `experiment` is the only top-level key.

use std::fmt::Write as _;
use std::path::PathBuf;

use super::RunError;
use crate::assembly::CoefficientField;
use crate::geometry::{BoundaryData, GeometryError, Monomial, OuterDomain, Shape};
use crate::harness::{log_grid, ConfigFamily, MeshPolicy, Settings};
use crate::mesh::MeshParams;
use crate::solvers::SolveOptions;

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryBlock {
    pub outer_radius: f64,
    /// x coordinate of the outer centre; it always lies on the axis
    pub outer_center: f64,
    pub inclusion1: Shape,
    pub inclusion2: Shape,
    pub epsilon: f64,
    pub ambient_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub tol: f64,
    pub maxit: usize,
    pub h_bulk: f64,
    pub gap_layers: usize,
    pub grading_ratio: f64,
    pub strip_aspect: f64,
    pub min_angle: f64,
    pub node_budget: usize,
    pub mesh_levels: usize,
    pub mesh_gate: f64,
    pub eps_list: Vec<f64>,
    pub k_list: Vec<f64>,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub name: String,
    pub timings: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: String,
    pub geometry: GeometryBlock,
    pub phi: BoundaryData,
    pub numerics: Numerics,
    pub output: OutputBlock,
}

const KEYS: &[&str] = &[
    "experiment",
    "geometry.outer_radius",
    "geometry.outer_center",
    "geometry.inclusion1",
    "geometry.inclusion2",
    "geometry.epsilon",
    "geometry.ambient_dim",
    "phi.data",
    "numerics.tol",
    "numerics.maxit",
    "numerics.h_bulk",
    "numerics.gap_layers",
    "numerics.grading_ratio",
    "numerics.strip_aspect",
    "numerics.min_angle",
    "numerics.node_budget",
    "numerics.mesh_levels",
    "numerics.mesh_gate",
    "numerics.eps_list",
    "numerics.k_list",
    "numerics.radii",
    "output.dir",
    "output.name",
    "output.timings",
];

fn err(key: &str, message: impl Into<String>) -> RunError {
    RunError::Config { key: key.to_string(), message: message.into() }
}

/// `key = value` pairs in file order, keys qualified by section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: Vec<(String, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, RunError> {
        let mut raw = RawConfig::default();
        let mut section = String::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, format!("line {}: malformed section header", no + 1)))?
                    .trim();
                if !KEYS.iter().any(|k| k.starts_with(&format!("{name}."))) {
                    return Err(err(name, format!("line {}: unknown section", no + 1)));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(line, format!("line {}: expected key = value", no + 1)))?;
            let key = if section.is_empty() { k.trim().to_string() } else { format!("{section}.{}", k.trim()) };
            raw.insert(&key, v.trim(), Some(no + 1))?;
        }
        Ok(raw)
    }

    fn insert(&mut self, key: &str, value: &str, line: Option<usize>) -> Result<(), RunError> {
        if !KEYS.contains(&key) {
            return Err(err(key, "unknown key"));
        }
        if let Some(slot) = self.entries.iter_mut().find(|(k, _)| k == key) {
            if let Some(no) = line {
                return Err(err(key, format!("line {no}: duplicate key")));
            }
            slot.1 = value.to_string();
        } else {
            self.entries.push((key.to_string(), value.to_string()));
        }
        Ok(())
    }

    /// Applies a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), RunError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| err(assignment, "override must have the form section.key=value"))?;
        self.insert(k.trim(), v.trim(), None)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, RunError> {
    v.parse::<f64>().map_err(|_| err(key, format!("expected a number, got {v:?}")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, RunError> {
    v.parse::<usize>().map_err(|_| err(key, format!("expected a non-negative integer, got {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, RunError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(err(key, format!("expected true or false, got {v:?}"))),
    }
}

/// Comma-separated numbers, or `logspace FROM TO COUNT` in decades.
pub fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, RunError> {
    let words: Vec<&str> = v.split_whitespace().collect();
    if words.first() == Some(&"logspace") {
        if words.len() != 4 {
            return Err(err(key, "logspace takes FROM TO COUNT"));
        }
        let count = parse_usize(key, words[3])?;
        if count == 0 {
            return Err(err(key, "logspace count must be positive"));
        }
        return Ok(log_grid(parse_f64(key, words[1])?, parse_f64(key, words[2])?, count));
    }
    v.split(',').map(|s| parse_f64(key, s.trim())).collect()
}

pub fn parse_shape(key: &str, v: &str) -> Result<Shape, RunError> {
    let w: Vec<&str> = v.split_whitespace().collect();
    let nums = |n: usize| -> Result<Vec<f64>, RunError> {
        if w.len() != n + 1 {
            return Err(err(key, format!("{} takes {n} parameter(s)", w[0])));
        }
        w[1..].iter().map(|s| parse_f64(key, s)).collect()
    };
    let shape = match w.first().copied() {
        Some("disk") => Shape::Disk { radius: nums(1)?[0] },
        Some("ellipse") => {
            let p = nums(2)?;
            Shape::Ellipse { semi_x: p[0], semi_y: p[1] }
        }
        Some("profile") => {
            let p = nums(3)?;
            Shape::Profile { exponent: p[0], lambda: p[1], closure: p[2] }
        }
        _ => return Err(err(key, format!("unknown shape {v:?}; use disk R, ellipse A B or profile BETA LAMBDA CLOSURE"))),
    };
    shape.validate().map_err(|e| err(key, e.to_string()))?;
    Ok(shape)
}

fn shape_text(s: &Shape) -> String {
    match s {
        Shape::Disk { radius } => format!("disk {radius}"),
        Shape::Ellipse { semi_x, semi_y } => format!("ellipse {semi_x} {semi_y}"),
        Shape::Profile { exponent, lambda, closure } => format!("profile {exponent} {lambda} {closure}"),
    }
}

fn parse_terms(key: &str, words: &[&str]) -> Result<Vec<Monomial>, RunError> {
    if words.is_empty() {
        return Err(err(key, "expected at least one COEF:PX:PY term"));
    }
    words
        .iter()
        .map(|t| {
            let parts: Vec<&str> = t.split(':').collect();
            if parts.len() != 3 {
                return Err(err(key, format!("term {t:?} is not COEF:PX:PY")));
            }
            let px = parts[1].parse::<u32>().map_err(|_| err(key, format!("bad power in {t:?}")))?;
            let py = parts[2].parse::<u32>().map_err(|_| err(key, format!("bad power in {t:?}")))?;
            Ok(Monomial::new(parse_f64(key, parts[0])?, px, py))
        })
        .collect()
}

/// `constant C`, `linear B1 B2`, `polynomial TERMS...` or `harmonic
/// TERMS...`, each term `COEF:PX:PY` for `COEF x^PX y^PY`.
pub fn parse_phi(key: &str, v: &str, ambient_dim: usize) -> Result<BoundaryData, RunError> {
    let w: Vec<&str> = v.split_whitespace().collect();
    match w.first().copied() {
        Some("constant") if w.len() == 2 => Ok(BoundaryData::Constant(parse_f64(key, w[1])?)),
        Some("linear") if w.len() == 3 => Ok(BoundaryData::Linear([parse_f64(key, w[1])?, parse_f64(key, w[2])?])),
        Some("polynomial") => Ok(BoundaryData::Polynomial(parse_terms(key, &w[1..])?)),
        Some("harmonic") => BoundaryData::harmonic(parse_terms(key, &w[1..])?, ambient_dim)
            .map_err(|e| err(key, e.to_string())),
        _ => Err(err(key, format!("cannot read boundary data {v:?}"))),
    }
}

fn phi_text(phi: &BoundaryData) -> String {
    let terms = |t: &[Monomial]| t.iter().map(|m| format!("{}:{}:{}", m.coef, m.px, m.py)).collect::<Vec<_>>().join(" ");
    match phi {
        BoundaryData::Constant(c) => format!("constant {c}"),
        BoundaryData::Linear(b) => format!("linear {} {}", b[0], b[1]),
        BoundaryData::Polynomial(t) => format!("polynomial {}", terms(t)),
        BoundaryData::Harmonic(t) => format!("harmonic {}", terms(t)),
    }
}

fn list_text(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, RunError> {
        let get = |k: &str, default: &str| raw.get(k).unwrap_or(default).to_string();
        let experiment = raw.get("experiment").ok_or_else(|| err("experiment", "missing"))?.to_string();
        let f = |k: &str, d: &str| parse_f64(k, &get(k, d));
        let u = |k: &str, d: &str| parse_usize(k, &get(k, d));

        let ambient_dim = u("geometry.ambient_dim", "2")?;
        let geometry = GeometryBlock {
            outer_radius: f("geometry.outer_radius", "5")?,
            outer_center: f("geometry.outer_center", "0")?,
            inclusion1: parse_shape("geometry.inclusion1", &get("geometry.inclusion1", "disk 1"))?,
            inclusion2: parse_shape("geometry.inclusion2", &get("geometry.inclusion2", "disk 1"))?,
            epsilon: f("geometry.epsilon", "0.01")?,
            ambient_dim,
        };
        let phi = parse_phi("phi.data", &get("phi.data", "linear 1 0"), ambient_dim)?;
        let numerics = Numerics {
            tol: f("numerics.tol", "1e-10")?,
            maxit: u("numerics.maxit", "500000")?,
            h_bulk: f("numerics.h_bulk", "0.25")?,
            gap_layers: u("numerics.gap_layers", "8")?,
            grading_ratio: f("numerics.grading_ratio", "1.2")?,
            strip_aspect: f("numerics.strip_aspect", "1")?,
            min_angle: f("numerics.min_angle", "20")?,
            node_budget: u("numerics.node_budget", "500000")?,
            mesh_levels: u("numerics.mesh_levels", "2")?,
            mesh_gate: f("numerics.mesh_gate", "0.02")?,
            eps_list: parse_list("numerics.eps_list", &get("numerics.eps_list", "logspace -2 -4 5"))?,
            k_list: parse_list("numerics.k_list", &get("numerics.k_list", "logspace 1 6 6"))?,
            radii: parse_list("numerics.radii", &get("numerics.radii", "4, 8, 16"))?,
        };
        let output = OutputBlock {
            dir: PathBuf::from(get("output.dir", ".")),
            name: get("output.name", &experiment),
            timings: parse_bool("output.timings", &get("output.timings", "false"))?,
        };
        let cfg = RunConfig { experiment, geometry, phi, numerics, output };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, RunError> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    /// Checks value ranges; list shapes are checked by the experiments
    /// that use them.
    pub fn validate(&self) -> Result<(), RunError> {
        let g = &self.geometry;
        let n = &self.numerics;
        let positive = |k: &str, v: f64| {
            if v > 0.0 && v.is_finite() { Ok(()) } else { Err(err(k, format!("must be positive and finite, got {v}"))) }
        };
        if !g.epsilon.is_finite() {
            return Err(err("geometry.epsilon", "must be finite"));
        }
        if g.epsilon <= 0.0 {
            return Err(err("geometry.epsilon", GeometryError::OverlapOrTouching { gap: g.epsilon }.to_string()));
        }
        positive("geometry.outer_radius", g.outer_radius)?;
        if !g.outer_center.is_finite() {
            return Err(err("geometry.outer_center", "must be finite"));
        }
        if g.ambient_dim < 2 {
            return Err(err("geometry.ambient_dim", format!("must be at least 2, got {}", g.ambient_dim)));
        }
        positive("numerics.tol", n.tol)?;
        if n.tol >= 1.0 {
            return Err(err("numerics.tol", "must be below 1"));
        }
        if n.maxit == 0 {
            return Err(err("numerics.maxit", "must be positive"));
        }
        let params = self.mesh_params();
        params.validate().map_err(|e| err("numerics", e.to_string()))?;
        if n.mesh_levels == 0 || n.mesh_levels > 4 {
            return Err(err("numerics.mesh_levels", "must lie in 1..=4"));
        }
        if !(n.mesh_gate > 0.0 && n.mesh_gate < 1.0) {
            return Err(err("numerics.mesh_gate", "must lie in (0, 1)"));
        }
        for (k, list) in [("numerics.eps_list", &n.eps_list), ("numerics.k_list", &n.k_list), ("numerics.radii", &n.radii)] {
            if list.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(err(k, "values must be positive and finite"));
            }
        }
        if self.output.name.is_empty() || self.output.name.contains(['/', '\\']) {
            return Err(err("output.name", "must be a plain file stem"));
        }
        Ok(())
    }

    pub fn mesh_params(&self) -> MeshParams {
        let n = &self.numerics;
        MeshParams {
            h_bulk: n.h_bulk,
            gap_layers_min: n.gap_layers,
            grading_ratio: n.grading_ratio,
            include_interiors: false,
            strip_aspect: n.strip_aspect,
            min_angle_deg: n.min_angle,
            node_budget: n.node_budget,
        }
    }

    pub fn settings(&self) -> Settings {
        Settings {
            policy: MeshPolicy { base: self.mesh_params(), levels: self.numerics.mesh_levels, gate: self.numerics.mesh_gate },
            solve: SolveOptions { tol: self.numerics.tol, maxit: self.numerics.maxit },
            coeff: CoefficientField::Identity,
        }
    }

    pub fn family(&self) -> ConfigFamily {
        let g = &self.geometry;
        ConfigFamily {
            outer: OuterDomain::disk([g.outer_center, 0.0], g.outer_radius),
            shape1: g.inclusion1.clone(),
            shape2: g.inclusion2.clone(),
            ambient_dim: g.ambient_dim,
        }
    }

    /// Canonical text; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (k, v) in self.entries() {
            match k.split_once('.') {
                None => {
                    let _ = writeln!(out, "{k} = {v}");
                }
                Some((sec, key)) => {
                    if sec != section {
                        let _ = writeln!(out, "\n[{sec}]");
                        section = sec;
                    }
                    let _ = writeln!(out, "{key} = {v}");
                }
            }
        }
        out
    }

    /// Every key with its canonical value, in declaration order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let g = &self.geometry;
        let n = &self.numerics;
        let values = vec![
            self.experiment.clone(),
            g.outer_radius.to_string(),
            g.outer_center.to_string(),
            shape_text(&g.inclusion1),
            shape_text(&g.inclusion2),
            g.epsilon.to_string(),
            g.ambient_dim.to_string(),
            phi_text(&self.phi),
            n.tol.to_string(),
            n.maxit.to_string(),
            n.h_bulk.to_string(),
            n.gap_layers.to_string(),
            n.grading_ratio.to_string(),
            n.strip_aspect.to_string(),
            n.min_angle.to_string(),
            n.node_budget.to_string(),
            n.mesh_levels.to_string(),
            n.mesh_gate.to_string(),
            list_text(&n.eps_list),
            list_text(&n.k_list),
            list_text(&n.radii),
            self.output.dir.display().to_string(),
            self.output.name.clone(),
            self.output.timings.to_string(),
        ];
        KEYS.iter().copied().zip(values).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
experiment = sweep
# two unit disks
[geometry]
epsilon = 1e-3
inclusion2 = ellipse 0.7 1.2

[phi]
data = polynomial 1:1:0 -0.5:2:0

[numerics]
eps_list = logspace -2 -3 4
";

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.experiment, "sweep");
        assert_eq!(c.geometry.epsilon, 1e-3);
        assert_eq!(c.geometry.inclusion1, Shape::Disk { radius: 1.0 });
        assert_eq!(c.geometry.inclusion2, Shape::Ellipse { semi_x: 0.7, semi_y: 1.2 });
        assert_eq!(c.numerics.eps_list.len(), 4);
        assert_eq!(c.output.name, "sweep");
        assert!(!c.output.timings);
    }

    #[test]
    fn round_trip_is_lossless() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        let text = c.to_text();
        let d = RunConfig::parse(&text).unwrap();
        assert_eq!(c, d);
        assert_eq!(text, d.to_text());
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let e = RunConfig::parse("experiment = solve\n[geometry]\nepsilonn = 1\n").unwrap_err();
        assert!(e.to_string().contains("geometry.epsilonn"));
        let e = RunConfig::parse("experiment = solve\n[mystery]\nx = 1\n").unwrap_err();
        assert!(e.to_string().contains("mystery"));
        let e = RunConfig::parse("experiment = solve\nexperiment = sweep\n").unwrap_err();
        assert!(e.to_string().contains("duplicate"));
    }

    #[test]
    fn zero_epsilon_names_the_key() {
        let e = RunConfig::parse("experiment = sweep\n[geometry]\nepsilon = 0\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("epsilon"));
    }

    #[test]
    fn overrides_replace_values() {
        let mut raw = RawConfig::parse(SAMPLE).unwrap();
        raw.set("geometry.epsilon=0.05").unwrap();
        raw.set("output.timings = true").unwrap();
        let c = RunConfig::from_raw(&raw).unwrap();
        assert_eq!(c.geometry.epsilon, 0.05);
        assert!(c.output.timings);
        assert!(raw.set("geometry.bogus=1").is_err());
        assert!(raw.set("no_equals_sign").is_err());
    }

    #[test]
    fn harmonic_data_is_checked() {
        let bad = "experiment = solve\n[phi]\ndata = harmonic 1:2:0\n";
        assert!(RunConfig::parse(bad).unwrap_err().to_string().contains("phi.data"));
        let ok = "experiment = solve\n[phi]\ndata = harmonic 1:2:0 -1:0:2\n";
        assert!(RunConfig::parse(ok).is_ok());
    }
}
