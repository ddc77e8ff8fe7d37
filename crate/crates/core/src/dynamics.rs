//! The billiard map: flights, reflections, its differential and the
//! transport of wavefront curvature.

use crate::geometry::{ArcShape, BoundaryPoint, Side, Table, ARC_CUSP_LOWER, ARC_CUSP_UPPER};
use crate::math::{atan2, cos, dot, pow, sin, sqrt, wrap_tau, FRAC_PI_2, TAU};

/// Angles within this of ±π/2 count as grazing.
pub const PHI_TOL: f64 = 1e-9;
/// Landings closer than this (in arclength) to a corner are flagged.
pub const CORNER_TOL: f64 = 1e-10;
/// Relative depth below which a cusp landing is flagged as captured.
pub const S_FLOOR_REL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("singular input state (r = {r}, phi = {phi}): grazing")]
    SingularInput { r: f64, phi: f64 },
    #[error("ray from {pos:?} along {dir:?} found no boundary intersection")]
    NoIntersection { pos: [f64; 2], dir: [f64; 2] },
    #[error("singular collision at r = {r} (flags {flags:?})")]
    Singular { flags: EventFlags, r: f64, phi: f64 },
    #[error("cos(phi1) = {0:e} too small for the differential")]
    SingularDifferential(f64),
    #[error("wavefront curvature B = {0} is not dispersing")]
    ConeViolation(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventFlags(pub u8);

impl EventFlags {
    pub const GRAZING: EventFlags = EventFlags(1);
    pub const CUSP_CAPTURE: EventFlags = EventFlags(2);
    pub const CORNER: EventFlags = EventFlags(4);

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
    pub fn contains(self, o: EventFlags) -> bool {
        self.0 & o.0 == o.0
    }
    pub fn insert(&mut self, o: EventFlags) {
        self.0 |= o.0;
    }
    /// Short textual form, e.g. `"grazing|corner"`; empty when clear.
    pub fn names(self) -> &'static str {
        match self.0 & 7 {
            0 => "",
            1 => "grazing",
            2 => "cusp_capture",
            3 => "grazing|cusp_capture",
            4 => "corner",
            5 => "grazing|corner",
            6 => "cusp_capture|corner",
            _ => "grazing|cusp_capture|corner",
        }
    }
}

/// Post-collision state `(r, φ)` with cached boundary data.
///
/// `φ` is the angle from the inward normal to the outgoing velocity, positive
/// towards the direction of increasing `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub r: f64,
    pub phi: f64,
    pub arc: usize,
    /// Chart coordinate `s` on cusp arcs, polar angle on circular arcs.
    pub param: f64,
    pub pos: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub curvature: f64,
}

impl PhasePoint {
    pub fn new(bp: BoundaryPoint, phi: f64) -> PhasePoint {
        PhasePoint {
            r: bp.r,
            phi,
            arc: bp.arc,
            param: bp.param,
            pos: bp.pos,
            tangent: bp.tangent,
            normal: bp.normal,
            curvature: bp.curvature,
        }
    }

    #[inline]
    pub fn velocity(&self) -> [f64; 2] {
        let (s, c) = (sin(self.phi), cos(self.phi));
        [s * self.tangent[0] + c * self.normal[0], s * self.tangent[1] + c * self.normal[1]]
    }

    #[inline]
    pub fn cos_phi(&self) -> f64 {
        cos(self.phi)
    }

    #[inline]
    pub fn is_cusp(&self) -> bool {
        self.arc == ARC_CUSP_LOWER || self.arc == ARC_CUSP_UPPER
    }

    /// Chart coordinate if the point lies on a cusp wall.
    #[inline]
    pub fn chart_s(&self) -> Option<f64> {
        if self.is_cusp() {
            Some(self.param)
        } else {
            None
        }
    }

    /// Time reversal `ι(r, φ) = (r, −φ)`.
    #[inline]
    pub fn reversed(&self) -> PhasePoint {
        PhasePoint { phi: -self.phi, ..*self }
    }

    #[inline]
    pub fn is_grazing(&self) -> bool {
        libm::fabs(self.phi) > FRAC_PI_2 - PHI_TOL
    }
}

impl Table {
    /// Phase point at arclength `r`, angle `φ`.
    pub fn phase_point(&self, r: f64, phi: f64) -> PhasePoint {
        PhasePoint::new(self.point_at(r), phi)
    }

    /// Phase point at local parameter `param` of arc `arc`.
    pub fn phase_point_on_arc(&self, arc: usize, param: f64, phi: f64) -> PhasePoint {
        PhasePoint::new(self.point_on_arc(arc, param), phi)
    }

    /// Cusp landing depth below which trajectories are discarded.
    pub fn s_floor(&self) -> f64 {
        S_FLOOR_REL * self.eps0
    }
}

/// One flight and reflection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent {
    pub start: PhasePoint,
    pub direction: [f64; 2],
    pub tau: f64,
    /// Post-collision state at the landing point.
    pub end: PhasePoint,
    pub flags: EventFlags,
}

/// Safeguarded Newton for an increasing function on `[lo, hi]` with
/// `f(lo) < 0 ≤ f(hi)`.
fn solve_increasing<F: Fn(f64) -> (f64, f64)>(f: F, mut lo: f64, mut hi: f64, start: f64) -> f64 {
    let mut t = start;
    let (mut g, mut gp) = f(t);
    if g >= 0.0 {
        hi = t;
    } else {
        lo = t;
    }
    let mut dx_old = hi - lo;
    let mut dx = dx_old;
    for _ in 0..100 {
        let newton_bad = ((t - hi) * gp - g) * ((t - lo) * gp - g) > 0.0 || libm::fabs(2.0 * g) > libm::fabs(dx_old * gp);
        if newton_bad || !(gp > 0.0) {
            dx_old = dx;
            dx = 0.5 * (hi - lo);
            t = lo + dx;
        } else {
            dx_old = dx;
            dx = g / gp;
            t -= dx;
        }
        if libm::fabs(dx) <= 2e-16 * libm::fabs(t) || hi - lo <= 2e-16 * libm::fabs(t) {
            break;
        }
        let e = f(t);
        g = e.0;
        gp = e.1;
        if g == 0.0 {
            break;
        }
        if g < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
    }
    t
}

/// First hit of the ray `p + t d` with the cusp wall of sign `σ`
/// (`y = σ xᵝ/β`, `x ∈ [0, ε₀]`). Returns `(t, s)`.
fn hit_cusp(beta: f64, eps0: f64, sigma: f64, p: [f64; 2], d: [f64; 2]) -> Option<(f64, f64)> {
    let (ta, tb) = if d[0] > 0.0 {
        ((-p[0] / d[0]).max(0.0), (eps0 - p[0]) / d[0])
    } else if d[0] < 0.0 {
        (((p[0] - eps0) / -d[0]).max(0.0), p[0] / -d[0])
    } else if (0.0..=eps0).contains(&p[0]) {
        (0.0, f64::INFINITY)
    } else {
        return None;
    };
    if !(ta < tb) {
        return None;
    }
    let hmax = pow(eps0, beta) / beta;
    // y is linear in t: reject rays that stay on the wrong side or beyond the chart height.
    let ya = sigma * (p[1] + ta * d[1]);
    let yb = if tb.is_finite() { sigma * (p[1] + tb * d[1]) } else { sigma * d[1] * f64::INFINITY };
    if (ya < 0.0 && yb < 0.0) || (ya > hmax && yb > hmax) {
        return None;
    }
    let x_at = |t: f64| (p[0] + t * d[0]).max(0.0);
    let g = |t: f64| {
        let x = x_at(t);
        let xb1 = if x > 0.0 { pow(x, beta - 1.0) } else { 0.0 };
        (sigma * (p[1] + t * d[1]) - xb1 * x / beta, sigma * d[1] - xb1 * d[0])
    };
    if !tb.is_finite() {
        // Vertical ray.
        let (g0, gp) = g(ta);
        if g0 >= 0.0 || gp <= 0.0 {
            return None;
        }
        let t = ta - g0 / gp;
        return Some((t, p[0]));
    }
    // g is concave in t; locate its maximiser on [ta, tb].
    let sd = sigma * d[1];
    let tstar = if d[0] > 0.0 {
        if sd <= 0.0 {
            ta
        } else {
            let xs = pow(sd / d[0], 1.0 / (beta - 1.0));
            ((xs - p[0]) / d[0]).clamp(ta, tb)
        }
    } else if sd >= 0.0 {
        tb
    } else {
        let xs = pow(-sd / -d[0], 1.0 / (beta - 1.0));
        ((p[0] - xs) / -d[0]).clamp(ta, tb)
    };
    let (ga, _) = g(ta);
    if ga >= 0.0 {
        return None;
    }
    let (gs, _) = g(tstar);
    if gs < 0.0 {
        return None;
    }
    let t = solve_increasing(g, ta, tstar, ta);
    let s = x_at(t).min(eps0);
    Some((t, s))
}

/// Entering hit of the ray with a circle; `(t, ψ)`.
fn hit_circle(c: [f64; 2], radius: f64, psi_start: f64, sweep: f64, p: [f64; 2], d: [f64; 2]) -> Option<(f64, f64)> {
    let q = [p[0] - c[0], p[1] - c[1]];
    let b = dot(d, q);
    if b >= 0.0 {
        return None;
    }
    let cc = dot(q, q) - radius * radius;
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let t = cc / (-b + sqrt(disc));
    if !(t > 0.0) {
        return None;
    }
    let h = [q[0] + t * d[0], q[1] + t * d[1]];
    let psi = atan2(h[1], h[0]);
    let off = wrap_tau(psi_start - psi);
    let tol = 1e-12;
    if off <= sweep + tol || off >= TAU - tol {
        Some((t, psi))
    } else {
        None
    }
}

/// First boundary hit of the ray `pos + t·dir`, skipping scatterer `skip`.
/// Returns `(arc, param, t)`.
pub fn first_hit(table: &Table, pos: [f64; 2], dir: [f64; 2], skip: Option<usize>) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, a) in table.arcs().iter().enumerate() {
        if Some(a.scatterer()) == skip {
            continue;
        }
        let hit = match a.shape {
            ArcShape::Cusp { side } => hit_cusp(table.beta, table.eps0, side.sign(), pos, dir),
            ArcShape::Circle { center, radius, psi_start, sweep } => hit_circle(center, radius, psi_start, sweep, pos, dir),
        };
        if let Some((t, param)) = hit {
            if best.map_or(true, |b| t < b.2) {
                best = Some((i, param, t));
            }
        }
    }
    best
}

/// Flight from `start` along `dir` to the next boundary point, followed by
/// specular reflection.
pub fn next_collision(table: &Table, start: &PhasePoint, dir: [f64; 2]) -> Result<CollisionEvent, DynamicsError> {
    let skip = table.arc(start.arc).scatterer();
    let (arc, param, t) = first_hit(table, start.pos, dir, Some(skip)).ok_or(DynamicsError::NoIntersection { pos: start.pos, dir })?;
    let bp = table.point_on_arc(arc, param);
    let vn = dot(dir, bp.normal);
    let out = [dir[0] - 2.0 * vn * bp.normal[0], dir[1] - 2.0 * vn * bp.normal[1]];
    let phi = atan2(dot(out, bp.tangent), dot(out, bp.normal));
    let end = PhasePoint::new(bp, phi);
    let mut flags = EventFlags::default();
    if end.is_grazing() {
        flags.insert(EventFlags::GRAZING);
    }
    if end.is_cusp() && end.param < table.s_floor() {
        flags.insert(EventFlags::CUSP_CAPTURE);
    }
    if !end.is_cusp() && table.corner_distance(end.r) < CORNER_TOL {
        flags.insert(EventFlags::CORNER);
    }
    Ok(CollisionEvent { start: *start, direction: dir, tau: t, end, flags })
}

/// One application of the billiard map, reporting singular landings in the
/// event flags instead of failing.
pub fn collide(table: &Table, x: &PhasePoint) -> Result<CollisionEvent, DynamicsError> {
    if x.is_grazing() {
        return Err(DynamicsError::SingularInput { r: x.r, phi: x.phi });
    }
    next_collision(table, x, x.velocity())
}

/// The billiard map `𝓕`. Singular landings are errors.
pub fn billiard_map(table: &Table, x: &PhasePoint) -> Result<(PhasePoint, f64), DynamicsError> {
    let ev = collide(table, x)?;
    if !ev.flags.is_empty() {
        return Err(DynamicsError::Singular { flags: ev.flags, r: ev.end.r, phi: ev.end.phi });
    }
    Ok((ev.end, ev.tau))
}

/// `𝓕⁻¹ = ι∘𝓕∘ι`.
pub fn inverse_map(table: &Table, x: &PhasePoint) -> Result<(PhasePoint, f64), DynamicsError> {
    let (y, tau) = billiard_map(table, &x.reversed())?;
    Ok((y.reversed(), tau))
}

pub type Mat2 = [[f64; 2]; 2];

/// `D𝓕` at `x` from the closed form in `τ, K(r), K(r₁), cos φ, cos φ₁`.
pub fn differential_from(tau: f64, k: f64, k1: f64, c: f64, c1: f64) -> Result<Mat2, DynamicsError> {
    if c1 < 1e-14 {
        return Err(DynamicsError::SingularDifferential(c1));
    }
    let f = -1.0 / c1;
    Ok([[f * (tau * k + c), f * tau], [f * (tau * k * k1 + k * c1 + k1 * c), f * (tau * k1 + c1)]])
}

/// `D𝓕` at `x`, together with the collision it linearises.
pub fn map_differential(table: &Table, x: &PhasePoint) -> Result<(Mat2, CollisionEvent), DynamicsError> {
    let ev = collide(table, x)?;
    let m = differential_from(ev.tau, x.curvature, ev.end.curvature, x.cos_phi(), ev.end.cos_phi())?;
    Ok((m, ev))
}

pub fn mat_vec(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Tangent-vector data in the wavefront description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentData {
    /// `V = dφ/dr`.
    pub slope: f64,
    pub b: f64,
    pub b_minus: f64,
    pub cos_phi: f64,
}

impl TangentData {
    /// From `V = B cos φ − K = B⁻ cos φ + K`.
    pub fn from_slope(slope: f64, k: f64, cos_phi: f64) -> TangentData {
        TangentData { slope, b: (slope + k) / cos_phi, b_minus: (slope - k) / cos_phi, cos_phi }
    }

    pub fn from_b(b: f64, k: f64, cos_phi: f64) -> TangentData {
        TangentData { slope: b * cos_phi - k, b, b_minus: b - 2.0 * k / cos_phi, cos_phi }
    }
}

/// Transport of the wavefront curvature across one flight and reflection:
/// returns `(B⁻(x₁), B(x₁))`.
pub fn wavefront_step(b: f64, tau: f64, k1: f64, phi1: f64) -> Result<(f64, f64), DynamicsError> {
    if !(b > 0.0) {
        return Err(DynamicsError::ConeViolation(b));
    }
    let bm = 1.0 / (tau + 1.0 / b);
    Ok((bm, bm + 2.0 * k1 / cos(phi1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Unstable,
    Stable,
    Neither,
}

/// Classifies the slope `V` against the cones at `x`.
pub fn cone_check(table: &Table, x: &PhasePoint, v: f64) -> Cone {
    let k = x.curvature;
    let w = 1.0 / table.tau_min;
    if v >= k && v <= k + w {
        Cone::Unstable
    } else if v <= -k && v >= -k - w {
        Cone::Stable
    } else {
        Cone::Neither
    }
}

/// p-norm `cos φ·|dr|` of a tangent vector.
#[inline]
pub fn p_norm(cos_phi: f64, dr: f64) -> f64 {
    cos_phi * libm::fabs(dr)
}

/// Which wall a cusp arc index belongs to.
pub fn cusp_side(arc: usize) -> Option<Side> {
    match arc {
        ARC_CUSP_LOWER => Some(Side::Lower),
        ARC_CUSP_UPPER => Some(Side::Upper),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_table, TableConfig, ARC_WALL};

    #[test]
    fn perpendicular_orbit_through_d() {
        let t = build_table(&TableConfig::default()).unwrap();
        let x = t.phase_point(t.r_d, 0.0);
        // Fired along the axis it flies into the cusp; the orbit through D is
        // the degenerate perpendicular orbit, so only check the first flight.
        let v = x.velocity();
        assert!(libm::fabs(v[1]) < 1e-15 && v[0] < 0.0);
        let ev = collide(&t, &t.phase_point(t.r_d + 1e-3, 0.0)).unwrap();
        assert!(ev.end.is_cusp());
    }

    #[test]
    fn hits_return_points_on_the_boundary() {
        let t = build_table(&TableConfig::default()).unwrap();
        let mut x = t.phase_point(t.arc(ARC_WALL).r_start + 0.1, 0.3);
        for _ in 0..2000 {
            let ev = collide(&t, &x).unwrap();
            let p = ev.start.pos;
            let d = ev.direction;
            let q = [p[0] + ev.tau * d[0], p[1] + ev.tau * d[1]];
            assert!(crate::math::dist(q, ev.end.pos) < 1e-12);
            x = ev.end;
            if !ev.flags.is_empty() {
                break;
            }
        }
    }
}
