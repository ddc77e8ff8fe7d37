//! Table construction and boundary queries.
//!
//! Global coordinates coincide with the cusp chart: the flat point `P` is the
//! origin, the cusp opens towards `+x`, and the two walls are
//! `z = ±sᵝ/β` for `s ∈ [0, ε₀]`. Each wall continues C¹ into a circular join
//! arc; the two join arcs end in corners on a circular wall centred on the
//! `x` axis, whose leftmost point `D` is hit perpendicularly by the tangent
//! line at `P`.
//!
//! The boundary is oriented with the table on the left. Arclength `r` starts
//! at `P` on the lower wall, so `r_f = 0 ≡ |∂Q|`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math::{self, atan, atan2, cos, dist, dot, pow, sin, sqrt, wrap_tau, FRAC_PI_2, PI, TAU};
use crate::quad;

pub const ARC_CUSP_LOWER: usize = 0;
pub const ARC_JOIN_LOWER: usize = 1;
pub const ARC_WALL: usize = 2;
pub const ARC_JOIN_UPPER: usize = 3;
pub const ARC_CUSP_UPPER: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("beta = {0}: the model needs beta > 2 (beta = 2 is the classical cusp and out of scope)")]
    BetaOutOfScope(f64),
    #[error("invalid `{field}`: {msg}")]
    InvalidParameter { field: &'static str, msg: String },
    #[error("chart coordinate s = {s} outside [0, {eps0}]")]
    Domain { s: f64, eps0: f64 },
    #[error("table construction failed: {0}")]
    Construction(String),
    #[error("table invariants violated: {}", .0.failures.join("; "))]
    Invariant(Box<TableReport>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }
}

/// One of the two cusp walls `z = ±sᵝ/β` on `[0, ε₀]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CuspProfile {
    pub beta: f64,
    pub eps0: f64,
    pub side: Side,
}

impl CuspProfile {
    pub fn new(beta: f64, eps0: f64, side: Side) -> Result<Self, GeometryError> {
        check_beta(beta)?;
        if !(eps0 > 0.0 && eps0 < 1.0) {
            return Err(GeometryError::InvalidParameter { field: "eps0", msg: format!("{eps0} is not in (0, 1)") });
        }
        Ok(CuspProfile { beta, eps0, side })
    }

    fn check(&self, s: f64) -> Result<(), GeometryError> {
        if !(0.0..=self.eps0).contains(&s) {
            return Err(GeometryError::Domain { s, eps0: self.eps0 });
        }
        Ok(())
    }

    /// `(z, z', z'')` at chart coordinate `s`.
    pub fn eval(&self, s: f64) -> Result<(f64, f64, f64), GeometryError> {
        self.check(s)?;
        let b = self.beta;
        let sg = self.side.sign();
        if s == 0.0 {
            return Ok((0.0, 0.0, 0.0));
        }
        let p2 = pow(s, b - 2.0);
        Ok((sg * p2 * s * s / b, sg * p2 * s, sg * (b - 1.0) * p2))
    }

    /// Unsigned curvature of the graph.
    pub fn curvature(&self, s: f64) -> f64 {
        cusp_curvature(self.beta, s)
    }

    /// Arclength from the flat point, by adaptive quadrature.
    pub fn arclength(&self, s: f64) -> Result<f64, GeometryError> {
        self.check(s)?;
        let b = self.beta;
        let (v, _) = quad::integrate(|t| sqrt(1.0 + pow(t, 2.0 * b - 2.0)), 0.0, s, 1e-14);
        Ok(v)
    }
}

/// `(z, z', z'')` of the profile at `s`.
pub fn cusp_profile_eval(s: f64, profile: &CuspProfile) -> Result<(f64, f64, f64), GeometryError> {
    profile.eval(s)
}

/// Arclength `|r − r_f|` of the profile point at chart coordinate `s`.
pub fn arclength_from_s(s: f64, profile: &CuspProfile) -> Result<f64, GeometryError> {
    profile.arclength(s)
}

fn check_beta(beta: f64) -> Result<(), GeometryError> {
    if !beta.is_finite() {
        return Err(GeometryError::InvalidParameter { field: "beta", msg: format!("{beta} is not finite") });
    }
    if beta <= 2.0 {
        return Err(GeometryError::BetaOutOfScope(beta));
    }
    Ok(())
}

#[inline]
pub fn cusp_curvature(beta: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let m = pow(s, beta - 1.0);
    let q = 1.0 + m * m;
    (beta - 1.0) * m / s / (q * sqrt(q))
}

/// Chart arclength `∫₀ˢ √(1 + t^(2β−2)) dt` via the binomial series
/// (fast path used by the dynamics); falls back to quadrature where the
/// series converges slowly.
pub fn chart_arclength(beta: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let e = 2.0 * beta - 2.0;
    let u = pow(s, e);
    if u > 0.5 {
        return quad::integrate(|t| sqrt(1.0 + pow(t, e)), 0.0, s, 1e-15).0;
    }
    let mut coef = 1.0;
    let mut uk = 1.0;
    let mut sum = 1.0;
    for k in 0..200 {
        let kf = k as f64;
        coef *= (0.5 - kf) / (kf + 1.0);
        uk *= u;
        let term = coef * uk / (e * (kf + 1.0) + 1.0);
        sum += term;
        if libm::fabs(term) < 1e-18 * sum {
            break;
        }
    }
    s * sum
}

/// Inverse of [`chart_arclength`].
pub fn chart_s_from_arclength(beta: f64, l: f64) -> f64 {
    if l <= 0.0 {
        return 0.0;
    }
    // ℓ is convex with ℓ(s) ≥ s, so Newton from s = l descends monotonically.
    let e = 2.0 * beta - 2.0;
    let mut s = l;
    for _ in 0..60 {
        let f = chart_arclength(beta, s) - l;
        let step = f / sqrt(1.0 + pow(s, e));
        s -= step;
        if libm::fabs(step) <= 1e-16 * s {
            break;
        }
    }
    s
}

/// User-facing table parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TableConfig {
    pub beta: f64,
    pub eps0: f64,
    pub join_radius: f64,
    pub wall_radius: f64,
    pub wall_center_x: f64,
    /// Off-axis displacement of the wall centre; anything but 0 breaks the
    /// perpendicular hit at `D` and is reported as an invariant failure.
    pub wall_center_y: f64,
    /// Short-flight threshold used for the cone bounds. With corners in the
    /// table the true infimum of free paths is 0.
    pub tau_min: f64,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig { beta: 3.0, eps0: 0.5, join_radius: 1.0, wall_radius: 1.0, wall_center_x: 1.8, wall_center_y: 0.0, tau_min: 0.05 }
    }
}

impl TableConfig {
    pub fn with_beta(beta: f64) -> Self {
        TableConfig { beta, ..TableConfig::default() }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        check_beta(self.beta)?;
        let pos = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GeometryError::InvalidParameter { field, msg: format!("{v} must be finite and > 0") })
            }
        };
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(GeometryError::InvalidParameter { field: "eps0", msg: format!("{} is not in (0, 1)", self.eps0) });
        }
        pos("join_radius", self.join_radius)?;
        pos("wall_radius", self.wall_radius)?;
        pos("tau_min", self.tau_min)?;
        if !self.wall_center_x.is_finite() || !self.wall_center_y.is_finite() {
            return Err(GeometryError::InvalidParameter { field: "wall_center_x", msg: "not finite".into() });
        }
        if self.wall_center_x - self.wall_radius <= self.eps0 {
            return Err(GeometryError::InvalidParameter {
                field: "wall_center_x",
                msg: format!(
                    "the wall reaches x = {} which is inside the cusp chart [0, {}]",
                    self.wall_center_x - self.wall_radius,
                    self.eps0
                ),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ArcKind {
    CuspLower,
    JoinLower,
    Wall,
    JoinUpper,
    CuspUpper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ArcShape {
    /// Local parameter is the chart coordinate `s`.
    Cusp { side: Side },
    /// Traversed clockwise: `ψ(r) = psi_start − (r − r_start)/radius`.
    /// Local parameter is the polar angle `ψ` about `center`.
    Circle { center: [f64; 2], radius: f64, psi_start: f64, sweep: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Arc {
    pub kind: ArcKind,
    pub shape: ArcShape,
    pub r_start: f64,
    pub length: f64,
}

impl Arc {
    /// Convex scatterer the arc belongs to (0 lower, 1 wall, 2 upper).
    pub fn scatterer(&self) -> usize {
        match self.kind {
            ArcKind::CuspLower | ArcKind::JoinLower => 0,
            ArcKind::Wall => 1,
            ArcKind::JoinUpper | ArcKind::CuspUpper => 2,
        }
    }

    pub fn is_cusp(&self) -> bool {
        matches!(self.shape, ArcShape::Cusp { .. })
    }
}

/// Geometric data at a boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub arc: usize,
    /// `s` on cusp arcs, `ψ` on circles.
    pub param: f64,
    pub r: f64,
    pub pos: [f64; 2],
    /// Unit tangent in the direction of increasing `r`.
    pub tangent: [f64; 2],
    /// Unit normal pointing into the table.
    pub normal: [f64; 2],
    pub curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum JunctionKind {
    C1,
    Corner,
    Cusp,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JunctionReport {
    pub from: ArcKind,
    pub to: ArcKind,
    pub kind: JunctionKind,
    pub r: f64,
    pub position: [f64; 2],
    pub position_gap: f64,
    /// Angle between outgoing and incoming tangents.
    pub tangent_turn: f64,
    /// Opening angle seen from inside the table.
    pub interior_angle: f64,
    pub curvature_jump: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TableReport {
    pub beta: f64,
    pub eps0: f64,
    pub total_length: f64,
    pub r_f: f64,
    pub r_d: f64,
    pub l_d: f64,
    pub point_d: [f64; 2],
    pub perpendicularity_residual: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub c1_max_mismatch: f64,
    pub junctions: Vec<JunctionReport>,
    pub arcs: Vec<Arc>,
    pub failures: Vec<String>,
}

impl TableReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// The billiard table. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Table {
    pub config: TableConfig,
    pub beta: f64,
    pub eps0: f64,
    arcs: [Arc; 5],
    /// `ℓ(ε₀)`, length of either cusp arc.
    pub chart_length: f64,
    pub total_length: f64,
    pub r_f: f64,
    pub r_d: f64,
    pub l_d: f64,
    pub point_d: [f64; 2],
    pub k_min: f64,
    pub k_max: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Arclength positions of the two corners.
    pub corner_r: [f64; 2],
    pub corner_pos: [[f64; 2]; 2],
    pub report: TableReport,
}

fn circle_intersections(c1: [f64; 2], r1: f64, c2: [f64; 2], r2: f64) -> Option<[[f64; 2]; 2]> {
    let d = dist(c1, c2);
    if d == 0.0 || d > r1 + r2 || d < libm::fabs(r1 - r2) {
        return None;
    }
    let a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    let h = sqrt((r1 * r1 - a * a).max(0.0));
    let e = [(c2[0] - c1[0]) / d, (c2[1] - c1[1]) / d];
    let p = [c1[0] + a * e[0], c1[1] + a * e[1]];
    Some([[p[0] - h * e[1], p[1] + h * e[0]], [p[0] + h * e[1], p[1] - h * e[0]]])
}

fn polar(c: [f64; 2], p: [f64; 2]) -> f64 {
    atan2(p[1] - c[1], p[0] - c[0])
}

fn angle_between(a: [f64; 2], b: [f64; 2]) -> f64 {
    atan2(math::cross(a, b), dot(a, b))
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| math::cross([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]);
    let d1 = d(q1, q2, p1);
    let d2 = d(q1, q2, p2);
    let d3 = d(p1, p2, q1);
    let d4 = d(p1, p2, q2);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0) && d1 != 0.0 && d2 != 0.0 && d3 != 0.0 && d4 != 0.0
}

/// Builds the table and fails if any invariant is violated.
pub fn build_table(cfg: &TableConfig) -> Result<Table, GeometryError> {
    let t = construct_table(cfg)?;
    if t.report.passed() {
        Ok(t)
    } else {
        Err(GeometryError::Invariant(Box::new(t.report)))
    }
}

/// Builds the table and its invariant report without gating on the report.
/// Fails only if the shape cannot be assembled at all.
pub fn construct_table(cfg: &TableConfig) -> Result<Table, GeometryError> {
    cfg.validate()?;
    let beta = cfg.beta;
    let eps0 = cfg.eps0;
    let rj = cfg.join_radius;
    let rw = cfg.wall_radius;
    let theta0 = atan(pow(eps0, beta - 1.0));
    let h = pow(eps0, beta) / beta;
    let chart_length = chart_arclength(beta, eps0);

    let j_l = [eps0, -h];
    let j_u = [eps0, h];
    let c_l = [eps0 - rj * sin(theta0), -h - rj * cos(theta0)];
    let c_u = [eps0 - rj * sin(theta0), h + rj * cos(theta0)];
    let w = [cfg.wall_center_x, cfg.wall_center_y];

    let psi_jl = polar(c_l, j_l);
    let psi_ju = polar(c_u, j_u);

    let lower = circle_intersections(c_l, rj, w, rw)
        .ok_or_else(|| GeometryError::Construction("lower join arc does not meet the opposite wall".into()))?;
    let upper = circle_intersections(c_u, rj, w, rw)
        .ok_or_else(|| GeometryError::Construction("upper join arc does not meet the opposite wall".into()))?;

    // First intersection met clockwise from J_l, and counter-clockwise from J_u.
    let (k_l, sweep_l) =
        lower.iter().map(|&q| (q, wrap_tau(psi_jl - polar(c_l, q)))).fold(([0.0; 2], f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let (k_u, sweep_u) =
        upper.iter().map(|&q| (q, wrap_tau(polar(c_u, q) - psi_ju))).fold(([0.0; 2], f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let omega_kl = polar(w, k_l);
    let omega_ku = polar(w, k_u);
    let sweep_w = wrap_tau(omega_kl - omega_ku);

    let mut arcs = [
        Arc { kind: ArcKind::CuspLower, shape: ArcShape::Cusp { side: Side::Lower }, r_start: 0.0, length: chart_length },
        Arc {
            kind: ArcKind::JoinLower,
            shape: ArcShape::Circle { center: c_l, radius: rj, psi_start: psi_jl, sweep: sweep_l },
            r_start: 0.0,
            length: rj * sweep_l,
        },
        Arc {
            kind: ArcKind::Wall,
            shape: ArcShape::Circle { center: w, radius: rw, psi_start: omega_kl, sweep: sweep_w },
            r_start: 0.0,
            length: rw * sweep_w,
        },
        Arc {
            kind: ArcKind::JoinUpper,
            shape: ArcShape::Circle { center: c_u, radius: rj, psi_start: psi_ju + sweep_u, sweep: sweep_u },
            r_start: 0.0,
            length: rj * sweep_u,
        },
        Arc { kind: ArcKind::CuspUpper, shape: ArcShape::Cusp { side: Side::Upper }, r_start: 0.0, length: chart_length },
    ];
    let mut r = 0.0;
    for a in arcs.iter_mut() {
        a.r_start = r;
        r += a.length;
    }
    let total_length = r;

    let mut failures = Vec::new();

    // Point D: the tangent line at P (the x axis) meets the wall circle.
    let disc = rw * rw - cfg.wall_center_y * cfg.wall_center_y;
    let (point_d, omega_d) = if disc >= 0.0 {
        let p = [cfg.wall_center_x - sqrt(disc), 0.0];
        (p, polar(w, p))
    } else {
        failures.push(String::from("axis condition: the tangent line at P misses the opposite wall"));
        ([cfg.wall_center_x - rw, 0.0], PI)
    };
    let delta_d = wrap_tau(omega_kl - omega_d);
    if delta_d > sweep_w {
        failures.push(String::from("axis condition: the tangent line at P meets the wall circle outside the wall arc"));
    }
    let r_d = arcs[ARC_WALL].r_start + rw * delta_d;
    let l_d = dist([0.0, 0.0], point_d);
    // The tangent at ψ is (sin ψ, −cos ψ); the ray direction is (1, 0).
    let perpendicularity_residual = libm::fabs(sin(omega_d));
    if perpendicularity_residual >= 1e-10 {
        failures.push(format!(
            "axis condition: the tangent line at P meets the wall at D non-perpendicularly (|cos| = {perpendicularity_residual:.3e})"
        ));
    }

    let mut table = Table {
        config: cfg.clone(),
        beta,
        eps0,
        arcs,
        chart_length,
        total_length,
        r_f: 0.0,
        r_d,
        l_d,
        point_d,
        k_min: 0.0,
        k_max: 0.0,
        tau_min: cfg.tau_min,
        tau_max: 0.0,
        corner_r: [arcs[ARC_WALL].r_start, arcs[ARC_JOIN_UPPER].r_start],
        corner_pos: [k_l, k_u],
        report: TableReport {
            beta,
            eps0,
            total_length,
            r_f: 0.0,
            r_d,
            l_d,
            point_d,
            perpendicularity_residual,
            k_min: 0.0,
            k_max: 0.0,
            tau_min: cfg.tau_min,
            tau_max: 0.0,
            c1_max_mismatch: 0.0,
            junctions: Vec::new(),
            arcs: arcs.to_vec(),
            failures: Vec::new(),
        },
    };

    // Junctions.
    let mut junctions = Vec::new();
    let mut c1_max: f64 = 0.0;
    for i in 0..5 {
        let j = (i + 1) % 5;
        let a = &table.arcs[i];
        let b = &table.arcs[j];
        let end = table.arc_endpoint(i, true);
        let start = table.arc_endpoint(j, false);
        let gap = dist(end.pos, start.pos);
        let turn = angle_between(end.tangent, start.tangent);
        let kind = match (a.kind, b.kind) {
            (ArcKind::CuspUpper, ArcKind::CuspLower) => JunctionKind::Cusp,
            (ArcKind::CuspLower, _) | (_, ArcKind::CuspUpper) => JunctionKind::C1,
            _ => JunctionKind::Corner,
        };
        let interior = match kind {
            JunctionKind::Cusp => 0.0,
            _ => PI - turn,
        };
        if gap >= 1e-10 {
            failures.push(format!("boundary does not close between {:?} and {:?} (gap {gap:.3e})", a.kind, b.kind));
        }
        match kind {
            JunctionKind::C1 => {
                c1_max = c1_max.max(libm::fabs(turn));
                if libm::fabs(turn) >= 1e-10 {
                    failures.push(format!("tangent jump {turn:.3e} at the {:?}/{:?} join", a.kind, b.kind));
                }
            }
            JunctionKind::Corner => {
                if !(interior > 0.0 && interior < PI) {
                    failures.push(format!("corner {:?}/{:?} has interior angle {interior:.6} outside (0, π)", a.kind, b.kind));
                }
            }
            JunctionKind::Cusp => {
                if gap >= 1e-10 || libm::fabs(libm::fabs(turn) - PI) > 1e-10 {
                    failures.push(String::from("the two cusp walls do not meet tangentially at P"));
                }
            }
        }
        junctions.push(JunctionReport {
            from: a.kind,
            to: b.kind,
            kind,
            r: if j == 0 { total_length } else { b.r_start },
            position: start.pos,
            position_gap: gap,
            tangent_turn: turn,
            interior_angle: interior,
            curvature_jump: start.curvature - end.curvature,
        });
    }

    // Convexity of each scatterer: total tangent turning below π.
    if theta0 + sweep_l >= PI || theta0 + sweep_u >= PI || sweep_w >= PI {
        failures.push(String::from("a scatterer is not convex (tangent turns by more than π)"));
    }

    // Dense samples for curvature range, diameter and self-intersection.
    let per_arc = 256;
    let mut samples: Vec<[f64; 2]> = Vec::with_capacity(5 * per_arc + 1);
    let mut k_min = f64::INFINITY;
    let mut k_max: f64 = 0.0;
    for i in 0..5 {
        for k in 0..per_arc {
            let u = (k as f64) / (per_arc as f64);
            let bp = table.point_at(table.arcs[i].r_start + u * table.arcs[i].length);
            samples.push(bp.pos);
            k_max = k_max.max(bp.curvature);
        }
        if let ArcShape::Circle { radius, .. } = table.arcs[i].shape {
            let k = 1.0 / radius;
            if !(k > 0.0 && k.is_finite()) {
                failures.push(format!("{:?} is not dispersing", table.arcs[i].kind));
            }
            k_min = k_min.min(k);
        }
    }
    k_max = k_max.max(cusp_curvature(beta, eps0));
    samples.push([0.0, 0.0]);
    let n = samples.len() - 1;
    'outer: for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(samples[i], samples[i + 1], samples[j], samples[j + 1]) {
                failures.push(format!("boundary self-intersects near {:?}", samples[i]));
                break 'outer;
            }
        }
    }
    let mut diameter: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            diameter = diameter.max(dist(samples[i], samples[j]));
        }
    }
    for i in [ARC_JOIN_LOWER, ARC_JOIN_UPPER] {
        let sgn = if i == ARC_JOIN_LOWER { -1.0 } else { 1.0 };
        for k in 1..per_arc {
            let p = samples[i * per_arc + k];
            if p[1] * sgn <= 0.0 || p[0] < eps0 - 1e-12 {
                failures.push(format!("{:?} leaves its half-plane", table.arcs[i].kind));
                break;
            }
        }
    }

    table.k_min = k_min;
    table.k_max = k_max;
    table.tau_max = diameter;
    table.report.k_min = k_min;
    table.report.k_max = k_max;
    table.report.tau_max = diameter;
    table.report.junctions = junctions;
    table.report.c1_max_mismatch = c1_max;
    table.report.failures = failures;
    Ok(table)
}

impl Table {
    pub fn arcs(&self) -> &[Arc; 5] {
        &self.arcs
    }

    pub fn arc(&self, i: usize) -> &Arc {
        &self.arcs[i]
    }

    /// Chart profile of the given wall.
    pub fn profile(&self, side: Side) -> CuspProfile {
        CuspProfile { beta: self.beta, eps0: self.eps0, side }
    }

    /// Boundary point at the start (`end = false`) or end of arc `i`.
    pub fn arc_endpoint(&self, i: usize, end: bool) -> BoundaryPoint {
        let a = &self.arcs[i];
        match a.shape {
            ArcShape::Cusp { side } => {
                let at_p = matches!((side, end), (Side::Lower, false) | (Side::Upper, true));
                self.point_on_arc(i, if at_p { 0.0 } else { self.eps0 })
            }
            ArcShape::Circle { psi_start, sweep, .. } => self.point_on_arc(i, if end { psi_start - sweep } else { psi_start }),
        }
    }

    /// Boundary data at local parameter `param` of arc `i`.
    #[inline]
    pub fn point_on_arc(&self, i: usize, param: f64) -> BoundaryPoint {
        let a = &self.arcs[i];
        match a.shape {
            ArcShape::Cusp { side } => {
                let s = param;
                let b = self.beta;
                let (m, zs, k) = if s > 0.0 {
                    let p2 = pow(s, b - 2.0);
                    let m = p2 * s;
                    let q = 1.0 + m * m;
                    (m, m * s / b, (b - 1.0) * p2 / (q * sqrt(q)))
                } else {
                    (0.0, 0.0, 0.0)
                };
                let nrm = sqrt(1.0 + m * m);
                let l = chart_arclength(b, s);
                match side {
                    Side::Lower => BoundaryPoint {
                        arc: i,
                        param: s,
                        r: l,
                        pos: [s, -zs],
                        tangent: [1.0 / nrm, -m / nrm],
                        normal: [m / nrm, 1.0 / nrm],
                        curvature: k,
                    },
                    Side::Upper => BoundaryPoint {
                        arc: i,
                        param: s,
                        r: self.total_length - l,
                        pos: [s, zs],
                        tangent: [-1.0 / nrm, -m / nrm],
                        normal: [m / nrm, -1.0 / nrm],
                        curvature: k,
                    },
                }
            }
            ArcShape::Circle { center, radius, psi_start, sweep } => {
                let (sn, cs) = (sin(param), cos(param));
                let mut off = wrap_tau(psi_start - param);
                if off > 0.5 * (sweep + TAU) {
                    off -= TAU;
                }
                BoundaryPoint {
                    arc: i,
                    param,
                    r: a.r_start + radius * off,
                    pos: [center[0] + radius * cs, center[1] + radius * sn],
                    tangent: [sn, -cs],
                    normal: [cs, sn],
                    curvature: 1.0 / radius,
                }
            }
        }
    }

    /// Wraps `r` into `[0, |∂Q|)`.
    pub fn wrap_r(&self, r: f64) -> f64 {
        let l = self.total_length;
        let y = r - l * math::floor(r / l);
        if y >= l {
            0.0
        } else {
            y
        }
    }

    /// Arc index containing arclength `r` (wrapped).
    pub fn locate(&self, r: f64) -> usize {
        let r = self.wrap_r(r);
        (1..5).rev().find(|&i| r >= self.arcs[i].r_start).unwrap_or(0)
    }

    /// Local parameter of arclength `r` on arc `i`.
    pub fn param_of(&self, i: usize, r: f64) -> f64 {
        let a = &self.arcs[i];
        let u = r - a.r_start;
        match a.shape {
            ArcShape::Cusp { side: Side::Lower } => chart_s_from_arclength(self.beta, u.max(0.0)),
            ArcShape::Cusp { side: Side::Upper } => chart_s_from_arclength(self.beta, (a.length - u).max(0.0)),
            ArcShape::Circle { radius, psi_start, .. } => psi_start - u / radius,
        }
    }

    /// Boundary data at arclength `r`.
    pub fn point_at(&self, r: f64) -> BoundaryPoint {
        let r = self.wrap_r(r);
        let i = self.locate(r);
        let mut bp = self.point_on_arc(i, self.param_of(i, r));
        bp.r = r;
        bp
    }

    /// Curvature of `∂Q` at arclength `r`.
    pub fn boundary_curvature(&self, r: f64) -> f64 {
        let r = self.wrap_r(r);
        let i = self.locate(r);
        match self.arcs[i].shape {
            ArcShape::Cusp { .. } => cusp_curvature(self.beta, self.param_of(i, r)),
            ArcShape::Circle { radius, .. } => 1.0 / radius,
        }
    }

    /// `|r − r_f|` for a point of a cusp arc at chart coordinate `s`.
    #[inline]
    pub fn chart_offset(&self, s: f64) -> f64 {
        chart_arclength(self.beta, s)
    }

    /// Arclength distance to the nearest corner.
    pub fn corner_distance(&self, r: f64) -> f64 {
        let r = self.wrap_r(r);
        self.corner_r.iter().map(|&c| libm::fabs(r - c)).fold(f64::INFINITY, f64::min)
    }

    /// Directed angle `θ(φ)` at a cusp point: the angle between the outgoing
    /// velocity and the tangent pointing towards `P`, in `[0, π]`.
    pub fn cusp_theta(&self, arc: usize, phi: f64) -> f64 {
        // Increasing r points away from P on the lower wall and towards P on
        // the upper one.
        match arc {
            ARC_CUSP_LOWER => FRAC_PI_2 + phi,
            _ => FRAC_PI_2 - phi,
        }
    }

    /// Inverse of [`Table::cusp_theta`].
    pub fn cusp_phi(&self, arc: usize, theta: f64) -> f64 {
        match arc {
            ARC_CUSP_LOWER => theta - FRAC_PI_2,
            _ => FRAC_PI_2 - theta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_and_quadrature_agree() {
        let p = CuspProfile::new(3.0, 0.5, Side::Upper).unwrap();
        for &s in &[0.0, 1e-6, 0.01, 0.1, 0.3, 0.5] {
            let a = chart_arclength(3.0, s);
            let b = p.arclength(s).unwrap();
            assert!(libm::fabs(a - b) < 1e-14, "{s}: {a} {b}");
            assert!(libm::fabs(chart_s_from_arclength(3.0, a) - s) <= 1e-15 * s.max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn default_table_passes_its_invariants() {
        let t = build_table(&TableConfig::default()).unwrap();
        assert!(t.report.passed(), "{:?}", t.report.failures);
        assert!(libm::fabs(t.l_d - 0.8) < 1e-15);
    }

    #[test]
    fn point_at_round_trips_arclength() {
        let t = build_table(&TableConfig::default()).unwrap();
        for k in 0..1000 {
            let r = t.total_length * (k as f64 + 0.5) / 1000.0;
            let bp = t.point_at(r);
            let again = t.point_on_arc(bp.arc, bp.param);
            assert!(libm::fabs(again.r - r) < 1e-12, "{r} {}", again.r);
        }
    }
}
