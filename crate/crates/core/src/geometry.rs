//! Outer domains, convex inclusion bodies and boundary data.
//!
//! All bodies are described in a local "facing frame": the extreme point of
//! the body towards the gap sits at the origin and the body lies in `x <= 0`.
//! Near the origin the boundary is the graph `x = -depth(y)`. A validated
//! [`Configuration`] places the left body with its extreme point at
//! `(-eps/2, 0)` facing `+x` and the right body mirrored at `(eps/2, 0)`.

use std::f64::consts::PI;

use thiserror::Error;

pub type Point = [f64; 2];

/// Relative tolerance used when validating analytic distances.
pub const GEOMETRIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("epsilon: inclusions overlap or touch (gap {gap:e})")]
    OverlapOrTouching { gap: f64 },
    #[error("clearance: distance to outer boundary {distance:e} does not exceed r0 = {r0:e}")]
    ClearanceViolated { distance: f64, r0: f64 },
    #[error("convexity: {0}")]
    ConvexityViolated(String),
    #[error("epsilon: requested gap {requested:e} but bodies are {measured:e} apart")]
    GapMismatch { requested: f64, measured: f64 },
    #[error("alignment: {0}")]
    Misaligned(String),
    #[error("gap window: |y| = {y:e} exceeds window radius {radius:e}")]
    OutsideGapWindow { y: f64, radius: f64 },
    #[error("symmetry: outer domain is not mirror symmetric in x1")]
    AsymmetricDomain,
    #[error("boundary data: {0}")]
    InvalidBoundaryData(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterDomain {
    pub center: Point,
    pub radius: f64,
}

impl OuterDomain {
    pub fn disk(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn is_mirror_symmetric(&self) -> bool {
        self.center[0].abs() <= GEOMETRIC_TOLERANCE * self.radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disk { radius: f64 },
    Ellipse { semi_x: f64, semi_y: f64 },
    /// Flat body: `depth(y) = lambda |y|^exponent` for `|y| <= closure`,
    /// closed by a circular arc matched with continuous tangent.
    Profile { exponent: f64, lambda: f64, closure: f64 },
}

/// Derived constants of the circular closure of a profile body.
#[derive(Debug, Clone, Copy)]
struct ProfileArc {
    /// slope of the flat graph at the closure height
    slope: f64,
    radius: f64,
    /// x coordinate of the arc centre in the facing frame
    center_x: f64,
}

impl Shape {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = |c: bool, msg: &str| {
            if c {
                Ok(())
            } else {
                Err(GeometryError::ConvexityViolated(msg.to_string()))
            }
        };
        match *self {
            Shape::Disk { radius } => ok(radius > 0.0 && radius.is_finite(), "disk radius must be positive"),
            Shape::Ellipse { semi_x, semi_y } => ok(
                semi_x > 0.0 && semi_y > 0.0 && semi_x.is_finite() && semi_y.is_finite(),
                "ellipse semi-axes must be positive",
            ),
            Shape::Profile { exponent, lambda, closure } => {
                ok(exponent >= 2.0 && exponent.is_finite(), "profile exponent must be >= 2")?;
                ok(lambda > 0.0 && lambda.is_finite(), "profile lambda must be positive")?;
                ok(closure > 0.0 && closure.is_finite(), "profile closure radius must be positive")
            }
        }
    }

    fn profile_arc(&self) -> Option<ProfileArc> {
        match *self {
            Shape::Profile { exponent, lambda, closure } => {
                let slope = lambda * exponent * closure.powf(exponent - 1.0);
                let radius = closure * (1.0 + 1.0 / (slope * slope)).sqrt();
                let center_x = -lambda * closure.powf(exponent) - closure / slope;
                Some(ProfileArc { slope, radius, center_x })
            }
            _ => None,
        }
    }

    /// Distance from the body's reference centre to its extreme point.
    pub fn reach(&self) -> f64 {
        match *self {
            Shape::Disk { radius } => radius,
            Shape::Ellipse { semi_x, .. } => semi_x,
            Shape::Profile { .. } => -self.profile_arc().unwrap().center_x,
        }
    }

    /// Largest |y| for which the facing half of the boundary is a graph over y.
    pub fn graph_limit(&self) -> f64 {
        match *self {
            Shape::Disk { radius } => radius,
            Shape::Ellipse { semi_y, .. } => semi_y,
            Shape::Profile { .. } => self.profile_arc().unwrap().radius,
        }
    }

    /// Horizontal recession of the facing boundary at height `y`
    /// (the body's contribution to the gap profile).
    pub fn depth(&self, y: f64) -> f64 {
        let ay = y.abs();
        match *self {
            Shape::Disk { radius } => {
                // radius - sqrt(radius^2 - y^2), written to avoid cancellation
                let s = (radius * radius - ay * ay).max(0.0).sqrt();
                ay * ay / (radius + s)
            }
            Shape::Ellipse { semi_x, semi_y } => {
                let q = (ay / semi_y).min(1.0);
                let s = (1.0 - q * q).max(0.0).sqrt();
                semi_x * q * q / (1.0 + s)
            }
            Shape::Profile { exponent, lambda, closure } => {
                if ay <= closure {
                    lambda * ay.powf(exponent)
                } else {
                    let arc = self.profile_arc().unwrap();
                    let s = (arc.radius * arc.radius - ay * ay).max(0.0).sqrt();
                    -(arc.center_x + s)
                }
            }
        }
    }

    /// d depth / dy.
    pub fn depth_slope(&self, y: f64) -> f64 {
        let sign = if y < 0.0 { -1.0 } else { 1.0 };
        let ay = y.abs();
        let d = match *self {
            Shape::Disk { radius } => ay / (radius * radius - ay * ay).max(f64::MIN_POSITIVE).sqrt(),
            Shape::Ellipse { semi_x, semi_y } => {
                let q = (1.0 - (ay / semi_y).powi(2)).max(f64::MIN_POSITIVE).sqrt();
                semi_x * ay / (semi_y * semi_y * q)
            }
            Shape::Profile { exponent, lambda, closure } => {
                if ay <= closure {
                    lambda * exponent * ay.powf(exponent - 1.0)
                } else {
                    let arc = self.profile_arc().unwrap();
                    ay / (arc.radius * arc.radius - ay * ay).max(f64::MIN_POSITIVE).sqrt()
                }
            }
        };
        sign * d
    }

    /// Boundary point in the facing frame; `theta = 0` is the extreme point
    /// and `theta` runs counter-clockwise over `[-pi, pi]`.
    pub fn local_point(&self, theta: f64) -> Point {
        match *self {
            Shape::Disk { radius } => [radius * (theta.cos() - 1.0), radius * theta.sin()],
            Shape::Ellipse { semi_x, semi_y } => [semi_x * (theta.cos() - 1.0), semi_y * theta.sin()],
            Shape::Profile { exponent, lambda, closure } => {
                let arc = self.profile_arc().unwrap();
                let split = arc.slope.atan();
                if theta.abs() <= split {
                    let y = closure * theta / split;
                    [-lambda * y.abs().powf(exponent), y]
                } else {
                    [arc.center_x + arc.radius * theta.cos(), arc.radius * theta.sin()]
                }
            }
        }
    }

    /// Parameter of the facing-half boundary point at height `y`.
    pub fn theta_at_height(&self, y: f64) -> f64 {
        match *self {
            Shape::Disk { radius } => (y / radius).clamp(-1.0, 1.0).asin(),
            Shape::Ellipse { semi_y, .. } => (y / semi_y).clamp(-1.0, 1.0).asin(),
            Shape::Profile { closure, .. } => {
                let arc = self.profile_arc().unwrap();
                if y.abs() <= closure {
                    arc.slope.atan() * y / closure
                } else {
                    (y / arc.radius).clamp(-1.0, 1.0).asin()
                }
            }
        }
    }

    /// Whether a facing-frame point lies inside the closed body.
    pub fn contains_local(&self, p: Point) -> bool {
        match *self {
            Shape::Disk { radius } => {
                let dx = p[0] + radius;
                dx * dx + p[1] * p[1] <= radius * radius
            }
            Shape::Ellipse { semi_x, semi_y } => {
                let dx = (p[0] + semi_x) / semi_x;
                let dy = p[1] / semi_y;
                dx * dx + dy * dy <= 1.0
            }
            Shape::Profile { closure, .. } => {
                let arc = self.profile_arc().unwrap();
                let dx = p[0] - arc.center_x;
                let in_circle = dx * dx + p[1] * p[1] <= arc.radius * arc.radius;
                if p[1].abs() <= closure {
                    // left of the flat graph and right of the arc's far side
                    p[0] <= -self.depth(p[1]) && dx >= -(arc.radius * arc.radius - p[1] * p[1]).max(0.0).sqrt()
                } else {
                    in_circle
                }
            }
        }
    }

    /// Smallest boundary curvature, excluding the flat arc of profile bodies.
    pub fn min_curvature(&self) -> f64 {
        match *self {
            Shape::Disk { radius } => 1.0 / radius,
            Shape::Ellipse { semi_x: a, semi_y: b } => (a / (b * b)).min(b / (a * a)),
            Shape::Profile { .. } => 1.0 / self.profile_arc().unwrap().radius,
        }
    }

    pub fn max_curvature(&self) -> f64 {
        match *self {
            Shape::Disk { radius } => 1.0 / radius,
            Shape::Ellipse { semi_x: a, semi_y: b } => (a / (b * b)).max(b / (a * a)),
            Shape::Profile { exponent, lambda, closure } => {
                let arc = self.profile_arc().unwrap();
                let flat = (0..=2000)
                    .map(|k| {
                        let y = closure * k as f64 / 2000.0;
                        let d1 = lambda * exponent * y.powf(exponent - 1.0);
                        let d2 = lambda * exponent * (exponent - 1.0) * y.powf(exponent - 2.0);
                        d2 / (1.0 + d1 * d1).powf(1.5)
                    })
                    .fold(0.0, f64::max);
                flat.max(1.0 / arc.radius)
            }
        }
    }

    /// Closure radius of the flat arc; infinite for strictly convex shapes.
    pub fn closure_radius(&self) -> f64 {
        match *self {
            Shape::Profile { closure, .. } => closure,
            _ => f64::INFINITY,
        }
    }

    /// Bounds (lambda0, lambda1, exponent) of the profile law, if any.
    pub fn profile_bounds(&self) -> Option<(f64, f64, f64)> {
        match *self {
            Shape::Profile { exponent, lambda, .. } => Some((lambda, lambda, exponent)),
            _ => None,
        }
    }

    /// Local gap contribution `lambda |y|^beta` of a profile body.
    pub fn gap_contribution(&self, y: f64) -> f64 {
        self.depth(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Facing {
    PlusX,
    MinusX,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InclusionBody {
    pub shape: Shape,
    pub center: Point,
    pub facing: Facing,
}

impl InclusionBody {
    /// Body facing `+x`; [`build_configuration`] reorients the right body.
    pub fn new(shape: Shape, center: Point) -> Self {
        Self { shape, center, facing: Facing::PlusX }
    }

    /// Extreme point towards the gap.
    pub fn vertex(&self) -> Point {
        let r = self.shape.reach();
        match self.facing {
            Facing::PlusX => [self.center[0] + r, self.center[1]],
            Facing::MinusX => [self.center[0] - r, self.center[1]],
        }
    }

    fn to_global(&self, local: Point) -> Point {
        let v = self.vertex();
        match self.facing {
            Facing::PlusX => [v[0] + local[0], v[1] + local[1]],
            Facing::MinusX => [v[0] - local[0], v[1] + local[1]],
        }
    }

    fn to_local(&self, p: Point) -> Point {
        let v = self.vertex();
        match self.facing {
            Facing::PlusX => [p[0] - v[0], p[1] - v[1]],
            Facing::MinusX => [v[0] - p[0], p[1] - v[1]],
        }
    }

    pub fn boundary_point(&self, theta: f64) -> Point {
        self.to_global(self.shape.local_point(theta))
    }

    pub fn contains(&self, p: Point) -> bool {
        self.shape.contains_local(self.to_local(p))
    }

    fn translated(&self, d: Point) -> Self {
        Self { center: [self.center[0] + d[0], self.center[1] + d[1]], ..self.clone() }
    }

    /// Largest distance from `c` to a boundary point.
    fn max_distance_from(&self, c: Point) -> f64 {
        if let Shape::Disk { radius } = self.shape {
            return (self.center[0] - c[0]).hypot(self.center[1] - c[1]) + radius;
        }
        let dist = |t: f64| {
            let p = self.boundary_point(t);
            (p[0] - c[0]).hypot(p[1] - c[1])
        };
        let n = 4096;
        let step = 2.0 * PI / n as f64;
        let (mut best_t, mut best) = (0.0, f64::MIN);
        for k in 0..n {
            let t = -PI + k as f64 * step;
            let d = dist(t);
            if d > best {
                best = d;
                best_t = t;
            }
        }
        // golden-section polish around the sampled maximum
        let (mut a, mut b) = (best_t - step, best_t + step);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let x1 = b - g * (b - a);
            let x2 = a + g * (b - a);
            if dist(x1) > dist(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        best.max(dist(0.5 * (a + b)))
    }
}

/// Requirements a configuration must meet beyond well-formedness.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Assumptions {
    /// Required clearance between inclusions and the outer boundary.
    pub r0: f64,
    /// Required lower bound on boundary curvature (flat arcs exempt).
    pub kappa0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub outer: OuterDomain,
    pub inclusion1: InclusionBody,
    pub inclusion2: InclusionBody,
    pub epsilon: f64,
    pub ambient_dim: usize,
    /// achieved curvature lower bound
    pub kappa0: f64,
    /// achieved clearance constant: min(dist to outer boundary, 1 / diam)
    pub r0: f64,
    pub symmetric: bool,
    /// Radius of the ball around the origin inside which both facing
    /// boundaries are treated as graphs over y.
    pub window_radius: f64,
}

pub fn build_configuration(
    outer: OuterDomain,
    inc1: InclusionBody,
    inc2: InclusionBody,
    epsilon: f64,
    ambient_dim: usize,
) -> Result<Configuration, GeometryError> {
    build_configuration_with(outer, inc1, inc2, epsilon, ambient_dim, Assumptions::default())
}

pub fn build_configuration_with(
    outer: OuterDomain,
    inc1: InclusionBody,
    inc2: InclusionBody,
    epsilon: f64,
    ambient_dim: usize,
    assumptions: Assumptions,
) -> Result<Configuration, GeometryError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(GeometryError::OverlapOrTouching { gap: epsilon });
    }
    if ambient_dim < 2 {
        return Err(GeometryError::Misaligned(format!("ambient_dim must be >= 2, got {ambient_dim}")));
    }
    if !(outer.radius > 0.0) {
        return Err(GeometryError::ConvexityViolated("outer radius must be positive".into()));
    }
    inc1.shape.validate()?;
    inc2.shape.validate()?;

    let mut inc1 = inc1;
    let mut inc2 = inc2;
    inc1.facing = Facing::PlusX;
    inc2.facing = Facing::MinusX;
    if inc1.center[0] >= inc2.center[0] {
        return Err(GeometryError::Misaligned("inclusion1 must lie left of inclusion2".into()));
    }
    let scale = outer.radius + inc1.center[0].abs() + inc2.center[0].abs() + inc1.shape.reach() + inc2.shape.reach();
    let tol = GEOMETRIC_TOLERANCE * scale;
    if (inc1.center[1] - inc2.center[1]).abs() > tol {
        return Err(GeometryError::Misaligned("inclusion centres must share the x1 axis".into()));
    }
    if (outer.center[1] - inc1.center[1]).abs() > tol {
        return Err(GeometryError::Misaligned("the outer centre must lie on the inclusion axis".into()));
    }

    let v1 = inc1.vertex();
    let v2 = inc2.vertex();
    let measured = v2[0] - v1[0];
    if measured <= 0.0 {
        return Err(GeometryError::OverlapOrTouching { gap: measured });
    }
    if (measured - epsilon).abs() > tol.max(GEOMETRIC_TOLERANCE * epsilon) {
        return Err(GeometryError::GapMismatch { requested: epsilon, measured });
    }

    // normalise: closest points at (-eps/2, 0) and (eps/2, 0)
    let shift = [-0.5 * (v1[0] + v2[0]), -inc1.center[1]];
    let inc1 = inc1.translated(shift);
    let inc2 = inc2.translated(shift);
    let mut outer = OuterDomain { center: [outer.center[0] + shift[0], 0.0], radius: outer.radius };
    let mut inc1 = inc1;
    let mut inc2 = inc2;
    // pin the vertices exactly
    inc1.center[0] = -0.5 * epsilon - inc1.shape.reach();
    inc2.center[0] = 0.5 * epsilon + inc2.shape.reach();
    inc1.center[1] = 0.0;
    inc2.center[1] = 0.0;

    let farthest = inc1
        .max_distance_from(outer.center)
        .max(inc2.max_distance_from(outer.center));
    let clearance = outer.radius - farthest;
    if clearance <= assumptions.r0 || clearance <= 0.0 {
        return Err(GeometryError::ClearanceViolated { distance: clearance, r0: assumptions.r0 });
    }
    let diameter = 2.0 * outer.radius;
    if assumptions.r0 > 0.0 && diameter >= 1.0 / assumptions.r0 {
        return Err(GeometryError::ClearanceViolated { distance: 1.0 / diameter, r0: assumptions.r0 });
    }
    let kappa0 = inc1.shape.min_curvature().min(inc2.shape.min_curvature());
    if kappa0 < assumptions.kappa0 {
        return Err(GeometryError::ConvexityViolated(format!(
            "curvature {kappa0:e} below required kappa0 {:e}",
            assumptions.kappa0
        )));
    }
    let kappa_max = inc1.shape.max_curvature().max(inc2.shape.max_curvature());
    let closure = inc1.shape.closure_radius().min(inc2.shape.closure_radius());
    let window_radius = closure.min(1.0 / (4.0 * kappa_max));

    let symmetric = outer.is_mirror_symmetric() && inc1.shape == inc2.shape;
    if outer.is_mirror_symmetric() {
        outer.center[0] = 0.0;
    }
    Ok(Configuration {
        outer,
        inclusion1: inc1,
        inclusion2: inc2,
        epsilon,
        ambient_dim,
        kappa0,
        r0: clearance.min(1.0 / diameter),
        symmetric,
        window_radius,
    })
}

impl Configuration {
    /// Places two shapes at gap `epsilon` inside `outer` and validates.
    pub fn place(
        outer: OuterDomain,
        shape1: Shape,
        shape2: Shape,
        epsilon: f64,
        ambient_dim: usize,
    ) -> Result<Self, GeometryError> {
        shape1.validate()?;
        shape2.validate()?;
        let c1 = [outer.center[0] - 0.5 * epsilon - shape1.reach(), outer.center[1]];
        let c2 = [outer.center[0] + 0.5 * epsilon + shape2.reach(), outer.center[1]];
        build_configuration(
            outer,
            InclusionBody::new(shape1, c1),
            InclusionBody::new(shape2, c2),
            epsilon,
            ambient_dim,
        )
    }

    pub fn closest_points(&self) -> (Point, Point) {
        (self.inclusion1.vertex(), self.inclusion2.vertex())
    }

    pub fn is_axisymmetric(&self) -> bool {
        self.ambient_dim > 2
    }

    /// x coordinate of the left body's facing boundary at height y.
    pub fn left_boundary_x(&self, y: f64) -> f64 {
        -0.5 * self.epsilon - self.inclusion1.shape.depth(y)
    }

    pub fn right_boundary_x(&self, y: f64) -> f64 {
        0.5 * self.epsilon + self.inclusion2.shape.depth(y)
    }

    /// Thickness `g(y) - f(y) + eps` of the gap at height `y` without
    /// window checks; valid wherever both facing boundaries are graphs.
    pub fn gap_thickness(&self, y: f64) -> f64 {
        self.epsilon + self.inclusion1.shape.depth(y) + self.inclusion2.shape.depth(y)
    }

    pub fn graph_limit(&self) -> f64 {
        self.inclusion1.shape.graph_limit().min(self.inclusion2.shape.graph_limit())
    }
}

/// Vertical gap thickness `g(y) - f(y) + eps` inside the gap window.
pub fn gap_profile(config: &Configuration, y: f64) -> Result<f64, GeometryError> {
    if y.abs() > config.window_radius {
        return Err(GeometryError::OutsideGapWindow { y, radius: config.window_radius });
    }
    Ok(config.gap_thickness(y))
}

/// Monomial `coef * x1^px * x2^py`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub px: u32,
    pub py: u32,
}

impl Monomial {
    pub fn new(coef: f64, px: u32, py: u32) -> Self {
        Self { coef, px, py }
    }

    fn eval(&self, p: Point) -> f64 {
        self.coef * p[0].powi(self.px as i32) * p[1].powi(self.py as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    Constant(f64),
    /// `sum b_i x_i` over the two meridian coordinates
    Linear([f64; 2]),
    Polynomial(Vec<Monomial>),
    /// Restriction of an entire harmonic polynomial.
    Harmonic(Vec<Monomial>),
}

impl BoundaryData {
    /// Harmonic descriptor, checked against the (axisymmetric) Laplacian
    /// in dimension `ambient_dim`.
    pub fn harmonic(terms: Vec<Monomial>, ambient_dim: usize) -> Result<Self, GeometryError> {
        let residual = laplacian(&terms, ambient_dim);
        if residual.iter().any(|m| m.coef.abs() > 1e-12) {
            return Err(GeometryError::InvalidBoundaryData(format!(
                "polynomial is not harmonic in dimension {ambient_dim}"
            )));
        }
        Ok(BoundaryData::Harmonic(terms))
    }

    pub fn eval(&self, p: Point) -> f64 {
        match self {
            BoundaryData::Constant(c) => *c,
            BoundaryData::Linear(b) => b[0] * p[0] + b[1] * p[1],
            BoundaryData::Polynomial(t) | BoundaryData::Harmonic(t) => t.iter().map(|m| m.eval(p)).sum(),
        }
    }

    pub fn monomials(&self) -> Vec<Monomial> {
        match self {
            BoundaryData::Constant(c) => vec![Monomial::new(*c, 0, 0)],
            BoundaryData::Linear(b) => vec![Monomial::new(b[0], 1, 0), Monomial::new(b[1], 0, 1)],
            BoundaryData::Polynomial(t) | BoundaryData::Harmonic(t) => t.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            BoundaryData::Constant(c) => BoundaryData::Constant(s * c),
            BoundaryData::Linear(b) => BoundaryData::Linear([s * b[0], s * b[1]]),
            BoundaryData::Polynomial(t) => {
                BoundaryData::Polynomial(t.iter().map(|m| Monomial { coef: s * m.coef, ..*m }).collect())
            }
            BoundaryData::Harmonic(t) => {
                BoundaryData::Harmonic(t.iter().map(|m| Monomial { coef: s * m.coef, ..*m }).collect())
            }
        }
    }

    pub fn sum(&self, other: &BoundaryData) -> Self {
        let mut t = self.monomials();
        t.extend(other.monomials());
        BoundaryData::Polynomial(t)
    }

    fn map_terms(&self, keep: impl Fn(&Monomial) -> bool) -> Self {
        match self {
            BoundaryData::Constant(c) => {
                BoundaryData::Constant(if keep(&Monomial::new(*c, 0, 0)) { *c } else { 0.0 })
            }
            BoundaryData::Linear(b) => BoundaryData::Linear([
                if keep(&Monomial::new(b[0], 1, 0)) { b[0] } else { 0.0 },
                if keep(&Monomial::new(b[1], 0, 1)) { b[1] } else { 0.0 },
            ]),
            BoundaryData::Polynomial(t) => BoundaryData::Polynomial(t.iter().copied().filter(|m| keep(m)).collect()),
            BoundaryData::Harmonic(t) => BoundaryData::Harmonic(t.iter().copied().filter(|m| keep(m)).collect()),
        }
    }
}

fn laplacian(terms: &[Monomial], ambient_dim: usize) -> Vec<Monomial> {
    let mut out: Vec<Monomial> = Vec::new();
    let mut push = |coef: f64, px: u32, py: u32| {
        if coef == 0.0 {
            return;
        }
        if let Some(m) = out.iter_mut().find(|m| m.px == px && m.py == py) {
            m.coef += coef;
        } else {
            out.push(Monomial::new(coef, px, py));
        }
    };
    let radial = (ambient_dim - 2) as f64;
    for m in terms {
        let (a, b) = (m.px as f64, m.py as f64);
        if m.px >= 2 {
            push(m.coef * a * (a - 1.0), m.px - 2, m.py);
        }
        if m.py >= 2 {
            push(m.coef * (b * (b - 1.0) + radial * b), m.px, m.py - 2);
        } else if m.py == 1 && radial > 0.0 {
            // (n-2)/y * d/dy of a term linear in y leaves a 1/y singularity
            push(f64::INFINITY, m.px, 0);
        }
    }
    out
}

/// Splits boundary data into parts odd and even in the first coordinate.
pub fn split_odd_even(
    phi: &BoundaryData,
    outer: &OuterDomain,
) -> Result<(BoundaryData, BoundaryData), GeometryError> {
    if !outer.is_mirror_symmetric() {
        return Err(GeometryError::AsymmetricDomain);
    }
    Ok((phi.map_terms(|m| m.px % 2 == 1), phi.map_terms(|m| m.px % 2 == 0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_disks(eps: f64) -> Configuration {
        Configuration::place(
            OuterDomain::disk([0.0, 0.0], 5.0),
            Shape::Disk { radius: 1.0 },
            Shape::Disk { radius: 1.0 },
            eps,
            2,
        )
        .unwrap()
    }

    #[test]
    fn symmetric_disks_are_valid() {
        let c = build_configuration(
            OuterDomain::disk([0.0, 0.0], 5.0),
            InclusionBody::new(Shape::Disk { radius: 1.0 }, [-1.05, 0.0]),
            InclusionBody::new(Shape::Disk { radius: 1.0 }, [1.05, 0.0]),
            0.1,
            2,
        )
        .unwrap();
        let (p1, p2) = c.closest_points();
        assert_relative_eq!(p1[0], -0.05, epsilon = 1e-15);
        assert_relative_eq!(p2[0], 0.05, epsilon = 1e-15);
        assert_eq!(p1[1], 0.0);
        assert!(c.symmetric);
        assert_relative_eq!(c.kappa0, 1.0);
        assert_relative_eq!(c.window_radius, 0.25);
    }

    #[test]
    fn zero_gap_is_rejected() {
        let err = Configuration::place(
            OuterDomain::disk([0.0, 0.0], 5.0),
            Shape::Disk { radius: 1.0 },
            Shape::Disk { radius: 1.0 },
            0.0,
            2,
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::OverlapOrTouching { .. }));
    }

    #[test]
    fn overlapping_bodies_are_rejected() {
        let err = build_configuration(
            OuterDomain::disk([0.0, 0.0], 5.0),
            InclusionBody::new(Shape::Disk { radius: 1.0 }, [-0.9, 0.0]),
            InclusionBody::new(Shape::Disk { radius: 1.0 }, [0.9, 0.0]),
            0.1,
            2,
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::OverlapOrTouching { .. }));
    }

    #[test]
    fn clearance_violation() {
        // right disk centre sits 0.1 inside... its boundary pokes to 0.1 from the outer circle
        let err = build_configuration_with(
            OuterDomain::disk([0.0, 0.0], 2.2),
            InclusionBody::new(Shape::Disk { radius: 1.0 }, [-1.05, 0.0]),
            InclusionBody::new(Shape::Disk { radius: 1.0 }, [1.05, 0.0]),
            0.1,
            2,
            Assumptions { r0: 0.5, kappa0: 0.0 },
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::ClearanceViolated { .. }));
    }

    #[test]
    fn gap_profile_disks() {
        let c = unit_disks(0.01);
        assert_relative_eq!(gap_profile(&c, 0.0).unwrap(), 0.01, epsilon = 1e-18);
        // closed-form circle geometry
        let expected = 0.01 + 2.0 * (1.0 - (1.0f64 - 0.01).sqrt());
        assert_relative_eq!(gap_profile(&c, 0.1).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(expected, 0.020025, max_relative = 1e-4);
        assert!(matches!(gap_profile(&c, 0.3), Err(GeometryError::OutsideGapWindow { .. })));
    }

    #[test]
    fn profile_contribution() {
        let s = Shape::Profile { exponent: 4.0, lambda: 1.0, closure: 0.7 };
        assert_relative_eq!(s.gap_contribution(0.5), 0.0625, max_relative = 1e-15);
        // two half-strength bodies give |y|^4 total at zero gap
        let h = Shape::Profile { exponent: 4.0, lambda: 0.5, closure: 0.7 };
        assert_relative_eq!(h.depth(0.5) + h.depth(-0.5), 0.0625, max_relative = 1e-15);
    }

    #[test]
    fn profile_closure_is_tangent_continuous() {
        let s = Shape::Profile { exponent: 4.0, lambda: 1.0, closure: 0.7 };
        let th = s.theta_at_height(0.7);
        let a = s.local_point(th - 1e-9);
        let b = s.local_point(th + 1e-9);
        assert!((a[0] - b[0]).abs() < 1e-7 && (a[1] - b[1]).abs() < 1e-7);
        // slopes match on both sides of the splice
        assert_relative_eq!(s.depth_slope(0.7 - 1e-9), s.depth_slope(0.7 + 1e-9), max_relative = 1e-6);
        // the facing graph agrees with the parametrisation
        for y in [0.1, 0.5, 0.69, 0.75, 0.8] {
            let p = s.local_point(s.theta_at_height(y));
            assert_relative_eq!(p[1], y, max_relative = 1e-12);
            assert_relative_eq!(-p[0], s.depth(y), max_relative = 1e-10, epsilon = 1e-14);
        }
    }

    #[test]
    fn split_examples() {
        let outer = OuterDomain::disk([0.0, 0.0], 5.0);
        let (o, e) = split_odd_even(&BoundaryData::Linear([1.0, 0.0]), &outer).unwrap();
        assert_eq!(o, BoundaryData::Linear([1.0, 0.0]));
        assert_eq!(e, BoundaryData::Linear([0.0, 0.0]));
        let (o, e) = split_odd_even(&BoundaryData::Constant(2.0), &outer).unwrap();
        assert_eq!(o, BoundaryData::Constant(0.0));
        assert_eq!(e, BoundaryData::Constant(2.0));
        let phi = BoundaryData::Polynomial(vec![Monomial::new(1.0, 2, 0), Monomial::new(1.0, 1, 0)]);
        let (o, e) = split_odd_even(&phi, &outer).unwrap();
        assert_eq!(o, BoundaryData::Polynomial(vec![Monomial::new(1.0, 1, 0)]));
        assert_eq!(e, BoundaryData::Polynomial(vec![Monomial::new(1.0, 2, 0)]));
        let shifted = OuterDomain::disk([0.3, 0.0], 5.0);
        assert_eq!(split_odd_even(&phi, &shifted), Err(GeometryError::AsymmetricDomain));
    }

    #[test]
    fn harmonic_check() {
        assert!(BoundaryData::harmonic(vec![Monomial::new(1.0, 1, 0)], 3).is_ok());
        let saddle = vec![Monomial::new(1.0, 2, 0), Monomial::new(-1.0, 0, 2)];
        assert!(BoundaryData::harmonic(saddle.clone(), 2).is_ok());
        assert!(BoundaryData::harmonic(saddle, 3).is_err());
        let axisym = vec![Monomial::new(1.0, 2, 0), Monomial::new(-0.5, 0, 2)];
        assert!(BoundaryData::harmonic(axisym, 3).is_ok());
    }

    #[test]
    fn swapping_inclusions_is_a_mirror_relabeling() {
        let e1 = Shape::Ellipse { semi_x: 1.0, semi_y: 1.5 };
        let d = Shape::Disk { radius: 0.8 };
        let outer = OuterDomain::disk([0.0, 0.0], 6.0);
        let a = Configuration::place(outer, e1.clone(), d.clone(), 0.02, 2).unwrap();
        let b = Configuration::place(outer, d, e1, 0.02, 2).unwrap();
        assert_eq!(a.inclusion1.shape, b.inclusion2.shape);
        assert_relative_eq!(a.inclusion1.center[0], -b.inclusion2.center[0], max_relative = 1e-15);
        for y in [0.0, 0.05, 0.2] {
            assert_relative_eq!(a.gap_thickness(y), b.gap_thickness(y), max_relative = 1e-14);
        }
        assert_relative_eq!(a.r0, b.r0, max_relative = 1e-12);
    }

    #[test]
    fn body_containment_matches_boundary() {
        let s = Shape::Profile { exponent: 4.0, lambda: 1.0, closure: 0.7 };
        let b = InclusionBody::new(s, [0.0, 0.0]);
        for k in 0..64 {
            let t = -PI + 2.0 * PI * k as f64 / 64.0;
            let p = b.boundary_point(t);
            let c = b.center;
            let inward = [c[0] + 0.99 * (p[0] - c[0]), c[1] + 0.99 * (p[1] - c[1])];
            let outward = [c[0] + 1.01 * (p[0] - c[0]), c[1] + 1.01 * (p[1] - c[1])];
            assert!(b.contains(inward), "t={t}");
            assert!(!b.contains(outward), "t={t}");
        }
    }

    proptest::proptest! {
        #[test]
        fn taylor_model_of_disk_gap(y in -0.2f64..0.2, r1 in 0.5f64..2.0, r2 in 0.5f64..2.0) {
            let c = Configuration::place(
                OuterDomain::disk([0.0, 0.0], 10.0),
                Shape::Disk { radius: r1 },
                Shape::Disk { radius: r2 },
                1e-3,
                2,
            ).unwrap();
            let quad = y * y * (1.0 / r1 + 1.0 / r2) / 2.0;
            let dev = (c.gap_thickness(y) - 1e-3 - quad).abs();
            // next Taylor term is y^4 (1/R1^3 + 1/R2^3) / 8
            let c = 0.2 * (r1.powi(-3) + r2.powi(-3));
            proptest::prop_assert!(dev <= c * y.powi(4) + 1e-15);
        }

        #[test]
        fn odd_part_is_idempotent(c0 in -3.0f64..3.0, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, c3 in -3.0f64..3.0) {
            let outer = OuterDomain::disk([0.0, 0.0], 5.0);
            let phi = BoundaryData::Polynomial(vec![
                Monomial::new(c0, 0, 0), Monomial::new(c1, 1, 0), Monomial::new(c2, 2, 1), Monomial::new(c3, 3, 0),
            ]);
            let (odd, even) = split_odd_even(&phi, &outer).unwrap();
            let (odd2, _) = split_odd_even(&odd, &outer).unwrap();
            for p in [[0.3, 0.4], [-1.2, 0.7], [2.0, -1.0]] {
                proptest::prop_assert!((odd2.eval(p) - odd.eval(p)).abs() < 1e-12);
                proptest::prop_assert!((odd.eval(p) + even.eval(p) - phi.eval(p)).abs() < 1e-12);
                proptest::prop_assert!((odd.eval(p) + odd.eval([-p[0], p[1]])).abs() < 1e-12);
                proptest::prop_assert!((even.eval(p) - even.eval([-p[0], p[1]])).abs() < 1e-12);
            }
        }
    }
}
