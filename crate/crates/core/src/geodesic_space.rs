//! Canonical representatives of geodesics and explicit charts on spaces of
//! geodesics.
//!
//! A geodesic is represented by one state on it: unit speed, slid along the
//! geodesic to a space-specific anchor, and (for unoriented classes) with the
//! velocity sign fixed so its first significant component is positive.
//!
//! Anchors:
//! * flat ℝⁿ, pseudoeuclidean ℝⁿ and the Klein model: the point closest in the
//!   chart to the origin;
//! * cylinder: the crossing of the wall `y = 0` with least `|x|` (lines of
//!   constant `y` use the wall `x = 0`);
//! * torus: the crossing of `y = 0` with least `x ∈ [0, 2π)`, which exists only
//!   for rational slopes;
//! * Möbius band: the lexicographically least crossing of the wall `x = 0`,
//!   else the crossing of the midline;
//! * flat strip: the crossing of the midline `y = 0`, else of `x = 0`;
//! * sphere and projective plane: the point of greatest height `z`;
//!   the equator anchors at `(1, 0, 0)`, and geodesics through a puncture
//!   anchor where they cross the equator;
//! * products: the anchor of the first moving factor whose geodesic is not
//!   closed, the other factors following along.

use std::f64::consts::{PI, TAU};

use nalgebra::{DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::connection::{exp_state, transport_with, IntegrateOptions};
use crate::error::{GeoError, Result};
use crate::linalg::dot;
use crate::spaces::{sphere, Model, Space, SpaceSpec};
use crate::state::GeodesicState;

const ZERO: f64 = 1e-12;

/// An element of G⁺(M) (oriented) or G(M) (unoriented).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicClass {
    pub space_id: String,
    pub rep: GeodesicState,
    pub oriented: bool,
    /// False when the geodesic never meets its anchor locus (for instance an
    /// irrational winding of the torus); the representative is then the
    /// normalized input state.
    pub anchored: bool,
}

impl GeodesicClass {
    /// Distance between representatives: point separation plus the
    /// difference of velocities expressed in a common chart.
    pub fn distance(&self, other: &GeodesicClass, space: &Space) -> f64 {
        let a = &self.rep;
        let b = space.express_near(&other.rep, a.point.as_slice(), a.chart);
        let dx = space.separation(a.point.as_slice(), a.chart, b.point.as_slice(), b.chart);
        let dv = (&a.velocity - &b.velocity).norm();
        dx.hypot(dv)
    }

    pub fn reversed(&self) -> GeodesicClass {
        GeodesicClass {
            rep: self.rep.reversed(),
            ..self.clone()
        }
    }
}

struct FactorAnchor {
    x: Vec<f64>,
    v: Vec<f64>,
    chart: u32,
    /// Flow time from the input state to the anchor.
    tau: f64,
    closed: bool,
}

fn chordal_anchor(model: Model, x: &[f64], v: &[f64]) -> FactorAnchor {
    let vn = dot(v, v).sqrt();
    let d: Vec<f64> = v.iter().map(|c| c / vn).collect();
    let along = dot(x, &d);
    let a: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi - along * di).collect();
    let (tau, vel) = if model == Model::Klein {
        let r2x = dot(x, x);
        // hyperbolic speed is constant; distance from x to the foot a is
        // asinh(|x·d| / sqrt(1 − |x|²))
        let speed = (vn * vn / (1.0 - r2x) + dot(x, v).powi(2) / (1.0 - r2x).powi(2)).sqrt();
        let dist = (along.abs() / (1.0 - r2x).sqrt()).asinh();
        let scale = speed * (1.0 - dot(&a, &a)).sqrt();
        (-along.signum() * dist / speed, d.iter().map(|c| c * scale).collect())
    } else {
        (-along / vn, v.to_vec())
    };
    FactorAnchor {
        x: a,
        v: vel,
        chart: 0,
        tau,
        closed: false,
    }
}

fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Best rational approximation `p/q` with `q ≤ 1000`, if it matches `r`.
fn rational(r: f64) -> Option<(i64, i64)> {
    let tol = 1e-10 * r.abs().max(1.0);
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut x = r;
    for _ in 0..40 {
        let a = x.floor();
        if a.abs() > 1e12 {
            return None;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > 1000 {
            return None;
        }
        if (r - h2 as f64 / k2 as f64).abs() <= tol {
            return Some((h2, k2));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = x - a as f64;
        if frac.abs() < 1e-15 {
            return None;
        }
        x = 1.0 / frac;
    }
    None
}

fn cylinder_anchor(x: &[f64], v: &[f64]) -> FactorAnchor {
    let (x0, y0, a, b) = (x[0], x[1], v[0], v[1]);
    let closed = a.abs() <= ZERO * b.abs().max(a.abs());
    if b.abs() <= ZERO * a.abs() {
        let tau = -x0 / a;
        return FactorAnchor {
            x: vec![0.0, y0],
            v: v.to_vec(),
            chart: 0,
            tau,
            closed: false,
        };
    }
    let t_of = |k: f64| (TAU * k - y0) / b;
    let x_of = |k: f64| if closed { x0 } else { x0 + a * t_of(k) };
    let k0 = if closed {
        (y0 / TAU).round()
    } else {
        (-(x0 - a * y0 / b) / (TAU * a / b)).round()
    };
    let mut best = k0;
    for k in [k0 - 1.0, k0 + 1.0] {
        let (xb, xk) = (x_of(best), x_of(k));
        let better = if closed {
            t_of(k).abs() < t_of(best).abs()
        } else {
            xk.abs() < xb.abs() - 1e-12 || ((xk.abs() - xb.abs()).abs() <= 1e-12 && xk < xb)
        };
        if better {
            best = k;
        }
    }
    FactorAnchor {
        x: vec![x_of(best), 0.0],
        v: v.to_vec(),
        chart: 0,
        tau: t_of(best),
        closed,
    }
}

fn torus_anchor(x: &[f64], v: &[f64]) -> Option<FactorAnchor> {
    let (x0, y0, a, b) = (x[0], x[1], v[0], v[1]);
    if b.abs() <= ZERO * a.abs() {
        // constant y: the wall x = 0 is met once per turn
        let tau = -x0 / a;
        return Some(FactorAnchor {
            x: vec![0.0, wrap(y0, TAU)],
            v: v.to_vec(),
            chart: 0,
            tau,
            closed: true,
        });
    }
    let (p, q) = rational(a / b)?;
    let step = TAU / q as f64;
    let r = p as f64 / q as f64;
    let c = x0 - r * y0;
    let mut xs = wrap(c, step);
    if step - xs < 1e-12 {
        xs = 0.0;
    }
    // pick the crossing index whose x lands on xs
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..q {
        let t = (TAU * k as f64 - y0) / b;
        let xk = wrap(x0 + a * t, TAU);
        let d = (xk - xs).abs().min(TAU - (xk - xs).abs());
        if d < best.0 {
            best = (d, t);
        }
    }
    Some(FactorAnchor {
        x: vec![xs, 0.0],
        v: v.to_vec(),
        chart: 0,
        tau: best.1,
        closed: true,
    })
}

fn mobius_anchor(x: &[f64], v: &[f64]) -> FactorAnchor {
    let (x0, y0, a, b) = (x[0], x[1], v[0], v[1]);
    let flip = |k: i64| if k.rem_euclid(2) == 1 { -1.0 } else { 1.0 };
    if b.abs() <= ZERO * a.abs() {
        let k: i64 = if y0 > 0.0 { 1 } else { 0 };
        let tau = (k as f64 - x0) / a;
        return FactorAnchor {
            x: vec![0.0, flip(k) * y0],
            v: vec![a, 0.0],
            chart: 0,
            tau,
            closed: true,
        };
    }
    let midline = || {
        let t = -y0 / b;
        let xm = x0 + a * t;
        let k = xm.floor() as i64;
        FactorAnchor {
            x: vec![xm - k as f64, 0.0],
            v: vec![a, flip(k) * b],
            chart: 0,
            tau: t,
            closed: false,
        }
    };
    if a.abs() <= ZERO * b.abs() {
        return midline();
    }
    let (t1, t2) = ((-1.0 - y0) / b, (1.0 - y0) / b);
    let (xa, xb) = (x0 + a * t1, x0 + a * t2);
    let (lo, hi) = (xa.min(xb), xa.max(xb));
    let kmin = lo.floor() as i64 + 1;
    let kmax = hi.ceil() as i64 - 1;
    if kmin > kmax {
        return midline();
    }
    let mut cands = vec![kmin, kmax];
    if kmin < kmax {
        cands.push(kmin + 1);
        cands.push(kmax - 1);
    }
    let val = |k: i64| {
        let t = (k as f64 - x0) / a;
        (flip(k) * (y0 + b * t), t, k)
    };
    let (y, tau, k) = cands
        .into_iter()
        .map(val)
        .filter(|(y, _, _)| y.abs() < 1.0)
        .min_by(|p, q| p.0.total_cmp(&q.0))
        .unwrap_or_else(|| val(kmin));
    FactorAnchor {
        x: vec![0.0, y],
        v: vec![a, flip(k) * b],
        chart: 0,
        tau,
        closed: false,
    }
}

fn strip_anchor(x: &[f64], v: &[f64]) -> FactorAnchor {
    let (x0, y0, a, b) = (x[0], x[1], v[0], v[1]);
    if b.abs() <= ZERO * a.abs() {
        return FactorAnchor {
            x: vec![0.0, y0],
            v: v.to_vec(),
            chart: 0,
            tau: -x0 / a,
            closed: false,
        };
    }
    let t = -y0 / b;
    FactorAnchor {
        x: vec![x0 + a * t, 0.0],
        v: v.to_vec(),
        chart: 0,
        tau: t,
        closed: false,
    }
}

fn lex_greater(a: Vector2<f64>, b: Vector2<f64>) -> bool {
    a.x > b.x + 1e-12 || ((a.x - b.x).abs() <= 1e-12 && a.y > b.y)
}

fn spherical_anchor(model: Model, x: &[f64], v: &[f64], chart: u32) -> FactorAnchor {
    let w = Vector2::new(x[0], x[1]);
    let q = sphere::to_ambient(chart, w);
    let u = sphere::tangent_to_ambient(chart, w, Vector2::new(v[0], v[1]));
    let speed = u.norm();
    let n = q.cross(&u).normalize();
    let punctured = matches!(
        model,
        Model::Sphere { punctured: true } | Model::Projective { punctured: true }
    );
    let projective = matches!(model, Model::Projective { .. });
    let meridian = punctured && n.z.abs() < ZERO;
    let raw = Vector3::z() - n * n.z;
    let a = if meridian {
        // through the puncture: the geodesic is one half of the great circle
        // (a whole punctured great circle in the projective case)
        let m = Vector3::z().cross(&n).normalize();
        if projective || q.dot(&m) >= 0.0 {
            m
        } else {
            -m
        }
    } else if raw.norm() < 1e-9 {
        Vector3::x()
    } else {
        raw.normalize()
    };
    let mut vel = n.cross(&a) * speed;
    let mut a = a;
    if projective && a.z.abs() < 1e-12 {
        let here = sphere::from_ambient_in(0, a);
        let there = sphere::from_ambient_in(0, -a);
        if lex_greater(there, here) {
            a = -a;
            vel = -vel;
        }
    }
    // flow time from q to a (or to -a, the same point of the projective plane)
    let e2 = n.cross(&q);
    let phi = e2.dot(&a).atan2(q.dot(&a));
    let tau = phi / speed;
    let wa = sphere::from_ambient_in(0, a);
    let va = sphere::tangent_from_ambient(0, a, vel);
    FactorAnchor {
        x: vec![wa.x, wa.y],
        v: vec![va.x, va.y],
        chart: 0,
        tau,
        closed: !meridian,
    }
}

fn anchor_factor(model: Model, x: &[f64], v: &[f64], chart: u32) -> Option<FactorAnchor> {
    Some(match model {
        Model::Euclidean | Model::PseudoEuclidean { .. } | Model::Klein => chordal_anchor(model, x, v),
        Model::Cylinder => cylinder_anchor(x, v),
        Model::Torus => return torus_anchor(x, v),
        Model::Mobius => mobius_anchor(x, v),
        Model::Strip => strip_anchor(x, v),
        Model::Circle => FactorAnchor {
            x: vec![0.0],
            v: v.to_vec(),
            chart: 0,
            tau: -x[0] / v[0],
            closed: true,
        },
        Model::Sphere { .. } | Model::Projective { .. } => spherical_anchor(model, x, v, chart),
    })
}

/// Put spherical factors into the chart where they lie in the closed unit
/// disc, so that representatives do not depend on chart history.
fn settle_charts(space: &Space, s: &mut GeodesicState) {
    for f in space.factors() {
        let antipodal = match f.model {
            Model::Sphere { .. } => false,
            Model::Projective { .. } => true,
            _ => continue,
        };
        let o = f.offset;
        let w = Vector2::new(s.point[o], s.point[o + 1]);
        let r2 = w.norm_squared();
        if r2 <= 1.0 {
            continue;
        }
        let sign = if antipodal { -1.0 } else { 1.0 };
        let a = sphere::inversion_jacobian(w, Vector2::new(s.velocity[o], s.velocity[o + 1])) * sign;
        let w2 = w * (sign / r2);
        s.point[o] = w2.x;
        s.point[o + 1] = w2.y;
        s.velocity[o] = a.x;
        s.velocity[o + 1] = a.y;
        if let Some(bit) = f.chart_bit {
            s.chart ^= 1 << bit;
        }
    }
}

/// Keep the velocity whose first significant component is positive.
/// Returns whether the velocity was reversed.
fn flip_rule(s: &mut GeodesicState) -> bool {
    let scale = s.velocity.amax();
    match s.velocity.iter().find(|c| c.abs() > ZERO * scale) {
        Some(c) if *c < 0.0 => {
            s.velocity = -&s.velocity;
            true
        }
        _ => false,
    }
}

/// Canonical representative of the geodesic through `s`.
pub fn canonicalize(space: &Space, s: &GeodesicState, oriented: bool) -> Result<GeodesicClass> {
    canonicalize_tracked(space, s, oriented).map(|(c, _)| c)
}

/// Like [`canonicalize`], also returning the parameter at which the class
/// representative passes through the unit-speed input state.
pub(crate) fn canonicalize_tracked(space: &Space, s: &GeodesicState, oriented: bool) -> Result<(GeodesicClass, f64)> {
    space.check_state(s)?;
    let s = space.unit_state(&space.normalize_state(s))?;
    let factors = space.factors();
    let mut anchors = Vec::new();
    let mut moving = 0;
    for (i, f) in factors.iter().enumerate() {
        let r = f.range();
        let v = &s.velocity.as_slice()[r.clone()];
        if v.iter().all(|c| c.abs() <= ZERO) {
            continue;
        }
        moving += 1;
        if let Some(a) = anchor_factor(f.model, &s.point.as_slice()[r], v, f.chart(s.chart)) {
            anchors.push((i, a));
        }
    }
    let pick = anchors
        .iter()
        .position(|(_, a)| !a.closed)
        .or(if anchors.is_empty() { None } else { Some(0) });
    let mut tau = 0.0;
    let (mut rep, anchored) = match pick {
        None => (s.clone(), false),
        Some(j) => {
            let (i, a) = &anchors[j];
            let f = factors[*i];
            let mut rep = if factors.len() == 1 {
                s.clone()
            } else {
                exp_state(space, &s, a.tau)?
            };
            let o = f.offset;
            rep.point.as_mut_slice()[o..o + f.dim].copy_from_slice(&a.x);
            rep.velocity.as_mut_slice()[o..o + f.dim].copy_from_slice(&a.v);
            if let Some(bit) = f.chart_bit {
                rep.chart = (rep.chart & !(1 << bit)) | (a.chart << bit);
            }
            let anchored = !a.closed || moving == 1;
            tau = a.tau;
            (space.normalize_state(&rep), anchored)
        }
    };
    // periodic coordinates may have landed a rounding error below zero
    rep = space.normalize_state(&rep);
    settle_charts(space, &mut rep);
    let mut t_input = -tau;
    if !oriented && flip_rule(&mut rep) {
        t_input = tau;
    }
    Ok((
        GeodesicClass {
            space_id: space.id(),
            rep,
            oriented,
            anchored,
        },
        t_input,
    ))
}

/// A point of the Möbius-band chart of G(ℝ²).
///
/// Nonvertical lines `y = u + v x` map into the open unit disc by
/// `(u, v) ↦ tanh(r)·(u, v)/r`; the vertical line `x = a` maps to the boundary
/// angle of the direction `(−a, 1)`, antipodal boundary points being glued.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MobiusChartPoint {
    Interior {
        ubar: f64,
        vbar: f64,
    },
    /// `theta ∈ (0, π)`; `θ = 0` would be the deleted pair `(±1, 0)`.
    Boundary {
        theta: f64,
    },
}

impl MobiusChartPoint {
    /// Position in the closed disc (one of the two glued positions for
    /// boundary points).
    pub fn position(&self) -> Vector2<f64> {
        match *self {
            MobiusChartPoint::Interior { ubar, vbar } => Vector2::new(ubar, vbar),
            MobiusChartPoint::Boundary { theta } => Vector2::new(theta.cos(), theta.sin()),
        }
    }

    /// Distance in the quotient of the closed disc by the boundary gluing.
    pub fn distance(&self, other: &MobiusChartPoint) -> f64 {
        let (a, b) = (self.position(), other.position());
        let direct = (a - b).norm();
        match (self, other) {
            (MobiusChartPoint::Interior { .. }, MobiusChartPoint::Interior { .. }) => direct,
            (MobiusChartPoint::Boundary { .. }, MobiusChartPoint::Interior { .. }) => direct.min((a + b).norm()),
            _ => direct.min((a + b).norm()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MobiusChartPoint::Interior { ubar, vbar } if ubar * ubar + vbar * vbar < 1.0 => Ok(()),
            MobiusChartPoint::Boundary { theta } if theta > 0.0 && theta < PI => Ok(()),
            p => Err(GeoError::BadParams(format!("not a point of the Möbius chart: {p:?}"))),
        }
    }
}

fn expect_space(space: &Space, ok: bool, chart: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(GeoError::UnsupportedChart {
            chart: chart.to_string(),
            space: space.id(),
        })
    }
}

fn class_space(c: &GeodesicClass) -> Result<Space> {
    c.space_id.parse()
}

/// The Möbius-band chart of unoriented lines in the Euclidean plane.
pub fn chart_g_r2(c: &GeodesicClass) -> Result<MobiusChartPoint> {
    let space = class_space(c)?;
    expect_space(&space, space.spec() == &SpaceSpec::Euclidean(2), "g-r2")?;
    let (p, d) = (&c.rep.point, &c.rep.velocity);
    if d[0].abs() <= ZERO * d.norm() {
        let a = p[0];
        return Ok(MobiusChartPoint::Boundary { theta: 1f64.atan2(-a) });
    }
    let v = d[1] / d[0];
    let u = p[1] - v * p[0];
    let r = u.hypot(v);
    if r == 0.0 {
        return Ok(MobiusChartPoint::Interior { ubar: 0.0, vbar: 0.0 });
    }
    let s = (r.tanh() / r).min((1.0f64).next_down() / r);
    Ok(MobiusChartPoint::Interior {
        ubar: u * s,
        vbar: v * s,
    })
}

/// A point of the tangent bundle of the direction sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TSPoint {
    #[serde(with = "crate::state::dvec")]
    pub direction: DVector<f64>,
    #[serde(with = "crate::state::dvec")]
    pub offset: DVector<f64>,
}

impl TSPoint {
    pub fn validate(&self) -> Result<()> {
        let n = self.direction.norm();
        if self.direction.len() != self.offset.len() || (n - 1.0).abs() > 1e-9 {
            return Err(GeoError::BadParams("direction must be a unit vector".into()));
        }
        if self.direction.dot(&self.offset).abs() > 1e-9 * (1.0 + self.offset.norm()) {
            return Err(GeoError::BadParams("offset must be orthogonal to direction".into()));
        }
        Ok(())
    }
}

fn ts_supported(space: &Space) -> bool {
    space.is_chordal()
}

/// Oriented geodesic of flat ℝⁿ or the Klein model ↦ (direction, offset),
/// where the offset is the point where the (extended) chord meets the
/// hyperplane through the origin orthogonal to it.
pub fn chart_ts(space: &Space, c: &GeodesicClass) -> Result<TSPoint> {
    expect_space(space, ts_supported(space), "ts")?;
    let d = c.rep.velocity.normalize();
    let p = &c.rep.point;
    let offset = p - &d * p.dot(&d);
    Ok(TSPoint { direction: d, offset })
}

pub fn chart_ts_inverse(space: &Space, t: &TSPoint) -> Result<GeodesicClass> {
    expect_space(space, ts_supported(space), "ts")?;
    t.validate()?;
    if t.direction.len() != space.dim() {
        return Err(GeoError::BadParams(format!(
            "TS point must have dimension {}",
            space.dim()
        )));
    }
    if space.is_single(Model::Klein) {
        let r = t.offset.norm();
        if r >= 1.0 {
            return Err(GeoError::OutsideDisc(r));
        }
    }
    let s = GeodesicState::new(t.offset.clone(), t.direction.clone());
    canonicalize(space, &s, true)
}

fn require_hadamard(space: &Space) -> Result<()> {
    if space.is_hadamard() {
        Ok(())
    } else {
        Err(GeoError::BadParams(format!("{} is not a Hadamard space", space.id())))
    }
}

/// `F(X, Y)`: the oriented geodesic through `exp_p(Y)` whose direction is the
/// parallel transport of `X` along `t ↦ exp_p(tY)`.
pub fn hadamard_f(space: &Space, p: &DVector<f64>, x: &DVector<f64>, y: &DVector<f64>) -> Result<GeodesicClass> {
    require_hadamard(space)?;
    space.check_point(p.as_slice(), 0)?;
    let pp = p.as_slice();
    if (space.inner(pp, x.as_slice(), x.as_slice()) - 1.0).abs() > 1e-6 {
        return Err(GeoError::BadParams("X must be a unit vector".into()));
    }
    if space.inner(pp, x.as_slice(), y.as_slice()).abs() > 1e-6 {
        return Err(GeoError::BadParams("Y must be orthogonal to X".into()));
    }
    if y.iter().all(|c| *c == 0.0) {
        return canonicalize(space, &GeodesicState::new(p.clone(), x.clone()), true);
    }
    let opts = IntegrateOptions::with_tol(1e-11);
    let (end, ws, truncated) = transport_with(
        space,
        &GeodesicState::new(p.clone(), y.clone()),
        1.0,
        std::slice::from_ref(x),
        &opts,
    )?;
    if truncated {
        return Err(GeoError::Inextendible {
            reached: 0.0,
            wanted: 1.0,
        });
    }
    canonicalize(space, &GeodesicState::new(end.point, ws[0].clone()), true)
}

/// Inverse of [`hadamard_f`] through the foot of `p` on the geodesic.
pub fn hadamard_f_inverse(space: &Space, c: &GeodesicClass, p: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    require_hadamard(space)?;
    let foot = crate::sky::foot(space, p, c)?;
    let q = &foot.point;
    let u = space
        .unit_state(&GeodesicState::new(q.clone(), foot.velocity.clone()))?
        .velocity;
    if foot.distance < 1e-12 {
        return Ok((u, DVector::zeros(space.dim())));
    }
    let y = crate::connection::log_map(space, p, q)?;
    let there = exp_state(space, &GeodesicState::new(p.clone(), y.clone()), 1.0)?;
    let opts = IntegrateOptions::with_tol(1e-11);
    let back = GeodesicState::new(there.point, -there.velocity);
    let (_, ws, _) = transport_with(space, &back, 1.0, &[u], &opts)?;
    Ok((ws[0].clone(), y))
}

/// A point of G(ℝ × M) = TM ⊔ ℝ × G(M).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProductClassPoint {
    /// Crossing with `{0} × M` and the M-velocity there, scaled so the ℝ
    /// component of the velocity is 1.
    Nonvertical { tangent: GeodesicState },
    /// The geodesic `{s} × γ`.
    Vertical { s: f64, inner: GeodesicClass },
}

/// Split `product(euclidean(1), M)` into the space `M`.
pub fn vertical_factor(space: &Space) -> Result<Space> {
    match space.spec() {
        SpaceSpec::Product(a, m) if **a == SpaceSpec::Euclidean(1) => Space::new((**m).clone()),
        _ => Err(GeoError::UnsupportedChart {
            chart: "product".into(),
            space: space.id(),
        }),
    }
}

pub fn product_chart(space: &Space, c: &GeodesicClass) -> Result<ProductClassPoint> {
    let m = vertical_factor(space)?;
    let rep = &c.rep;
    let sigma = rep.velocity[0];
    let tail = |s: &GeodesicState| {
        GeodesicState::from_slices(&s.point.as_slice()[1..], &s.velocity.as_slice()[1..]).with_chart(s.chart)
    };
    if sigma.abs() <= ZERO * rep.velocity.norm() {
        let inner_state = tail(rep);
        let inner = canonicalize(&m, &inner_state, c.oriented)?;
        return Ok(ProductClassPoint::Vertical { s: rep.point[0], inner });
    }
    let t = -rep.point[0] / sigma;
    let at = exp_state(space, rep, t)?;
    let mut tangent = tail(&at);
    tangent.velocity /= sigma;
    Ok(ProductClassPoint::Nonvertical { tangent })
}

/// Geodesic of `M` through the crossing of a nonvertical payload with
/// `{s} × M`, at unit speed.
fn crossing(m: &Space, payload: &GeodesicState, s: f64) -> Result<GeodesicState> {
    let at = exp_state(m, payload, s)?;
    m.unit_state(&at)
}

/// Nearest point of the geodesic through `rep` (parameters `|t| ≤ span`)
/// to `x`: returns `(t, distance)`.
pub(crate) fn nearest_on_geodesic(
    space: &Space,
    rep: &GeodesicState,
    x: &[f64],
    chart: u32,
    span: f64,
) -> Result<(f64, f64)> {
    let opts = IntegrateOptions::default();
    let tr = crate::connection::integrate_span(space, rep, 0.0, span, &opts)?;
    let back = crate::connection::integrate_span(space, rep, 0.0, -span, &opts)?;
    let mut best = (0.0, f64::INFINITY);
    for smp in back.samples.iter().chain(tr.samples.iter()) {
        let d = space.separation(smp.state.point.as_slice(), smp.state.chart, x, chart);
        if d < best.1 {
            best = (smp.t, d);
        }
    }
    let eval = |t: f64| -> f64 {
        let traj = if t >= 0.0 { &tr } else { &back };
        match traj.state_at(space, t) {
            Ok(st) => space.separation(st.point.as_slice(), st.chart, x, chart),
            Err(_) => f64::INFINITY,
        }
    };
    let h = 0.02;
    let (mut lo, mut hi) = ((best.0 - h).max(-span), (best.0 + h).min(span));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fc, mut fd) = (eval(c), eval(d));
    for _ in 0..80 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = eval(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = eval(d);
        }
    }
    let t = 0.5 * (lo + hi);
    let f = eval(t);
    Ok(if f < best.1 { (t, f) } else { best })
}

/// Sampled test that nonvertical geodesics of `ℝ × M` (given by their TM
/// payloads) converge to the vertical geodesic `{s} × γ`.
///
/// An element is close to the target when
/// * its crossing with `{s} × M` lies on `γ` and within `horizon` of the
///   target's representative point,
/// * the unit-speed M-geodesic through that crossing agrees with `γ`
///   (re-based at the nearest point, either orientation) at 64 parameters in
///   `[−horizon, horizon]`, and
/// * its M-speed exceeds the inverse tolerance, so the ℝ-component of the
///   unit direction vanishes.
///
/// The sequence converges when its last quarter is close within `1e-4`.
/// This is a semi-decision procedure: it samples a compact parameter window.
pub fn converges_to_vertical(
    space: &Space,
    seq: &[GeodesicState],
    s: f64,
    target: &GeodesicClass,
    horizon: f64,
) -> bool {
    const TOL: f64 = 1e-4;
    const SAMPLES: usize = 64;
    let Ok(m) = vertical_factor(space) else { return false };
    if seq.is_empty() || !(horizon > 0.0) {
        return false;
    }
    let Ok(target_rep) = m.unit_state(&target.rep) else {
        return false;
    };
    let tail_len = seq.len().div_ceil(4);
    let close = |payload: &GeodesicState| -> Result<bool> {
        let speed = m.speed(payload.point.as_slice(), payload.velocity.as_slice());
        if !(speed > 1.0 / TOL) {
            return Ok(false);
        }
        let cross = crossing(&m, payload, s)?;
        let (tc, dist) = nearest_on_geodesic(&m, &target_rep, cross.point.as_slice(), cross.chart, horizon)?;
        if dist > TOL {
            return Ok(false);
        }
        let base = exp_state(&m, &target_rep, tc)?;
        let reach = m.separation(
            base.point.as_slice(),
            base.chart,
            target_rep.point.as_slice(),
            target_rep.chart,
        );
        if tc.abs() > horizon || reach > horizon {
            return Ok(false);
        }
        let mut worst = [0.0f64, 0.0f64];
        for (o, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mine = cross.clone();
            let theirs = base.scaled(sign);
            for i in 0..SAMPLES {
                let t = -horizon + 2.0 * horizon * i as f64 / (SAMPLES - 1) as f64;
                let a = exp_state(&m, &mine, t)?;
                let b = exp_state(&m, &theirs, t)?;
                worst[o] = worst[o].max(m.separation(a.point.as_slice(), a.chart, b.point.as_slice(), b.chart));
            }
        }
        Ok(worst[0].min(worst[1]) <= TOL)
    };
    seq[seq.len() - tail_len..].iter().all(|p| close(p).unwrap_or(false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn space(s: &str) -> Space {
        s.parse().unwrap()
    }

    fn st(p: &[f64], v: &[f64]) -> GeodesicState {
        GeodesicState::from_slices(p, v)
    }

    #[test]
    fn euclidean_anchor_is_closest_point() {
        let e = space("euclidean2");
        let c = canonicalize(&e, &st(&[3.0, 3.0], &[2.0, 0.0]), true).unwrap();
        assert_relative_eq!(c.rep.point, DVector::from_vec(vec![0.0, 3.0]), epsilon = 1e-15);
        assert_relative_eq!(c.rep.velocity, DVector::from_vec(vec![1.0, 0.0]), epsilon = 1e-15);
        let d = canonicalize(&e, &st(&[-5.0, 3.0], &[7.0, 0.0]), true).unwrap();
        assert_eq!(c, d);
        let u = canonicalize(&e, &st(&[0.0, 3.0], &[-1.0, 0.0]), false).unwrap();
        assert_eq!(u.rep, c.rep);
        assert!(c.anchored);
    }

    #[test]
    fn klein_anchor_has_unit_hyperbolic_speed() {
        let k = space("klein2");
        let c = canonicalize(&k, &st(&[0.3, 0.5], &[1.0, 0.0]), true).unwrap();
        assert_relative_eq!(c.rep.point[0], 0.0, epsilon = 1e-15);
        let sp = k.speed(c.rep.point.as_slice(), c.rep.velocity.as_slice());
        assert_relative_eq!(sp, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rational_detection() {
        assert_eq!(rational(0.5), Some((1, 2)));
        assert_eq!(rational(-2.0 / 3.0), Some((-2, 3)));
        assert_eq!(rational(2f64.sqrt()), None);
        assert_eq!(rational(0.0), Some((0, 1)));
    }

    #[test]
    fn torus_irrational_is_unanchored() {
        let t = space("flat_torus");
        let c = canonicalize(&t, &st(&[1.0, 1.0], &[2f64.sqrt(), 1.0]), true).unwrap();
        assert!(!c.anchored);
        let c = canonicalize(&t, &st(&[1.0, 1.0], &[1.0, 2.0]), true).unwrap();
        assert!(c.anchored);
        assert_eq!(c.rep.point[1], 0.0);
        assert!(c.rep.point[0] < PI);
    }

    #[test]
    fn sphere_anchor_is_highest_point() {
        let s2 = space("sphere2");
        // great circle through (1,0,0) tilted towards the pole
        let q = Vector3::new(1.0, 0.0, 0.0);
        let u = Vector3::new(0.0, 0.6, 0.8);
        let (c0, w) = sphere::from_ambient(q);
        let v = sphere::tangent_from_ambient(c0, q, u);
        let c = canonicalize(&s2, &st(&[w.x, w.y], &[v.x, v.y]).with_chart(c0), true).unwrap();
        let a = s2.factors()[0].ambient(c.rep.point.as_slice(), c.rep.chart);
        assert_relative_eq!(a, Vector3::new(0.0, 0.6, 0.8), epsilon = 1e-12);
        // the equator anchors at (1, 0, 0)
        let e = canonicalize(&s2, &st(&[0.0, -1.0], &[1.0, 0.0]), false).unwrap();
        assert_relative_eq!(e.rep.point, DVector::from_vec(vec![1.0, 0.0]), epsilon = 1e-12);
    }

    #[test]
    fn chart_g_r2_examples() {
        let e = space("euclidean2");
        let diag = canonicalize(&e, &st(&[0.0, 0.0], &[1.0, 1.0]), false).unwrap();
        match chart_g_r2(&diag).unwrap() {
            MobiusChartPoint::Interior { ubar, vbar } => {
                assert!(ubar.abs() < 1e-15);
                assert_relative_eq!(vbar, 1f64.tanh(), epsilon = 1e-12);
            }
            p => panic!("{p:?}"),
        }
        let axis = canonicalize(&e, &st(&[4.0, 0.0], &[-1.0, 0.0]), false).unwrap();
        assert_eq!(
            chart_g_r2(&axis).unwrap(),
            MobiusChartPoint::Interior { ubar: 0.0, vbar: 0.0 }
        );
        let vert = canonicalize(&e, &st(&[1.0, 5.0], &[0.0, 2.0]), false).unwrap();
        assert_relative_eq!(
            chart_g_r2(&vert).unwrap().position(),
            Vector2::new((0.75 * PI).cos(), (0.75 * PI).sin()),
            epsilon = 1e-12
        );
        let k = canonicalize(&space("klein2"), &st(&[0.0, 0.0], &[1.0, 0.0]), false).unwrap();
        assert!(matches!(chart_g_r2(&k), Err(GeoError::UnsupportedChart { .. })));
    }

    #[test]
    fn ts_chart_examples() {
        let e = space("euclidean2");
        let up = canonicalize(&e, &st(&[1.0, -3.0], &[0.0, 2.0]), true).unwrap();
        let t = chart_ts(&e, &up).unwrap();
        assert_relative_eq!(t.direction, DVector::from_vec(vec![0.0, 1.0]));
        assert_relative_eq!(t.offset, DVector::from_vec(vec![1.0, 0.0]));
        let k = space("klein2");
        let chord = canonicalize(&k, &st(&[-0.5, 0.5], &[1.0, 0.0]), true).unwrap();
        let t = chart_ts(&k, &chord).unwrap();
        assert_relative_eq!(t.offset, DVector::from_vec(vec![0.0, 0.5]), epsilon = 1e-15);
        let bad = TSPoint {
            direction: DVector::from_vec(vec![1.0, 0.0]),
            offset: DVector::from_vec(vec![0.0, 1.0]),
        };
        assert!(matches!(chart_ts_inverse(&k, &bad), Err(GeoError::OutsideDisc(_))));
        let edge = TSPoint {
            direction: DVector::from_vec(vec![1.0, 0.0]),
            offset: DVector::from_vec(vec![0.0, 0.999]),
        };
        let c = chart_ts_inverse(&k, &edge).unwrap();
        assert_relative_eq!(chart_ts(&k, &c).unwrap().offset, edge.offset, epsilon = 1e-12);
    }

    #[test]
    fn hadamard_f_flat() {
        let e = space("euclidean2");
        let o = DVector::zeros(2);
        let c = hadamard_f(
            &e,
            &o,
            &DVector::from_vec(vec![1.0, 0.0]),
            &DVector::from_vec(vec![0.0, 2.0]),
        )
        .unwrap();
        assert_relative_eq!(c.rep.point, DVector::from_vec(vec![0.0, 2.0]), epsilon = 1e-12);
        assert_relative_eq!(c.rep.velocity, DVector::from_vec(vec![1.0, 0.0]), epsilon = 1e-12);
    }

    #[test]
    fn product_chart_recovers_line_coordinates() {
        let rr = space("product(euclidean(1),euclidean(1))");
        // line through (0, u) with slope v
        let (u, v) = (0.7, -1.3);
        let c = canonicalize(&rr, &st(&[2.0, u + 2.0 * v], &[1.0, v]), false).unwrap();
        match product_chart(&rr, &c).unwrap() {
            ProductClassPoint::Nonvertical { tangent } => {
                assert_relative_eq!(tangent.point[0], u, epsilon = 1e-12);
                assert_relative_eq!(tangent.velocity[0], v, epsilon = 1e-12);
            }
            p => panic!("{p:?}"),
        }
        let vert = canonicalize(&rr, &st(&[2.0, 5.0], &[0.0, 1.0]), false).unwrap();
        match product_chart(&rr, &vert).unwrap() {
            ProductClassPoint::Vertical { s, inner } => {
                assert_eq!(s, 2.0);
                assert_eq!(inner.space_id, "euclidean(1)");
            }
            p => panic!("{p:?}"),
        }
    }

    #[test]
    fn vertical_limits_in_the_plane() {
        let rr = space("product(euclidean(1),euclidean(1))");
        let m = space("euclidean(1)");
        let target = canonicalize(&m, &st(&[0.0], &[1.0]), false).unwrap();
        let x = 1.0;
        let seq: Vec<GeodesicState> = (1..=24)
            .map(|k| {
                let v = 2f64.powi(k);
                st(&[-x * v], &[v])
            })
            .collect();
        assert!(converges_to_vertical(&rr, &seq, x, &target, 10.0));
        assert!(!converges_to_vertical(&rr, &seq, 2.0, &target, 10.0));
        let constant = vec![st(&[0.5], &[2.0]); 8];
        assert!(!converges_to_vertical(&rr, &constant, x, &target, 10.0));
    }
}
