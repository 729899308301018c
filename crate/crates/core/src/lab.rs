//! Sampling testers for the structural properties of a connection (closed
//! and returning geodesics, product regularity, pseudoconvexity, coverings)
//! and the witnesses they produce.
//!
//! Every tester is a semi-decision procedure: a witness refutes or
//! corroborates a property, the absence of one is only evidence. Witnesses
//! carry enough of their certifying computation to be re-run by
//! [`Witness::recheck`].

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::connection::{exp_state, integrate_span, integrate_with, log_map, IntegrateOptions};
use crate::error::{GeoError, Result};
use crate::geodesic_space::{canonicalize, GeodesicClass};
use crate::linalg::dot;
use crate::rng::SampleRng;
use crate::sky::{connect_states, golden_min, ConnectOptions};
use crate::spaces::{sphere, CoveringKind, CoveringMap, Sheet, Space, SpaceSpec};
use crate::state::{GeodesicState, Trajectory};

/// Angle below which two tangent lines count as the same line.
pub const PARALLEL_TOL: f64 = 1e-6;

/// How a witness can be re-run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recheck {
    pub procedure: String,
    pub tolerance: f64,
}

impl Recheck {
    fn new(procedure: &str, tolerance: f64) -> Recheck {
        Recheck {
            procedure: procedure.to_string(),
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    ClosedGeodesic(ClosedWitness),
    ReturningGeodesic(ReturnWitness),
    RegularityViolation(RegularityWitness),
    HullEscape(HullEscapeWitness),
    CoveringMismatch(CoveringMismatchWitness),
    /// Closed geodesics upstairs accumulating on two distinct lifts of one
    /// downstairs geodesic.
    NonHausdorffLimit(NonHausdorffWitness),
}

impl Witness {
    pub fn kind(&self) -> &'static str {
        match self {
            Witness::ClosedGeodesic(_) => "closed_geodesic",
            Witness::ReturningGeodesic(_) => "returning_geodesic",
            Witness::RegularityViolation(_) => "regularity_violation",
            Witness::HullEscape(_) => "hull_escape",
            Witness::CoveringMismatch(_) => "covering_mismatch",
            Witness::NonHausdorffLimit(_) => "non_hausdorff_limit",
        }
    }

    /// Re-run the certifying computation from the payload alone. Returns
    /// whether the recorded violation is reproduced within tolerance.
    pub fn recheck(&self) -> Result<bool> {
        match self {
            Witness::ClosedGeodesic(w) => w.recheck(),
            Witness::ReturningGeodesic(w) => w.recheck(),
            Witness::RegularityViolation(w) => w.recheck(),
            Witness::HullEscape(w) => w.recheck(),
            Witness::CoveringMismatch(w) => w.recheck(),
            Witness::NonHausdorffLimit(w) => w.recheck(),
        }
    }
}

fn parse_space(id: &str) -> Result<Space> {
    id.parse()
}

/// Angle between the lines spanned by `u` and `w` (chart coordinates).
fn line_angle(u: &[f64], w: &[f64]) -> f64 {
    let (un, wn) = (dot(u, u).sqrt(), dot(w, w).sqrt());
    if un == 0.0 || wn == 0.0 {
        return FRAC_PI_2;
    }
    let par = dot(u, w) / wn;
    let perp: f64 = u
        .iter()
        .zip(w)
        .map(|(a, b)| (a - par * b / wn).powi(2))
        .sum::<f64>()
        .sqrt();
    perp.atan2(par.abs())
}

/// Refined nearest point of a trajectory to `x`: `(t, distance)`. The few
/// best sampled local minima are all refined, since a nearly closed curve
/// passes close to `x` many times.
fn trace_distance(space: &Space, traj: &Trajectory, x: &[f64], chart: u32) -> (f64, f64) {
    let n = traj.len();
    let seps: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| space.separation(s.state.point.as_slice(), s.state.chart, x, chart))
        .collect();
    let Some(first) = (0..n).min_by(|&a, &b| seps[a].total_cmp(&seps[b])) else {
        return (0.0, f64::INFINITY);
    };
    if n < 3 {
        return (traj.samples[first].t, seps[first]);
    }
    let mut minima: Vec<usize> = (0..n)
        .filter(|&i| (i == 0 || seps[i] <= seps[i - 1]) && (i + 1 == n || seps[i] <= seps[i + 1]))
        .collect();
    minima.sort_by(|&a, &b| seps[a].total_cmp(&seps[b]));
    minima.truncate(8);
    let f = |t: f64| {
        traj.state_at(space, t).map_or(f64::INFINITY, |s| {
            space.separation(s.point.as_slice(), s.chart, x, chart)
        })
    };
    let mut best = (traj.samples[first].t, seps[first]);
    for i in minima {
        let lo = traj.samples[i.saturating_sub(1)].t;
        let hi = traj.samples[(i + 1).min(n - 1)].t;
        let t = golden_min(f, lo, hi, 1e-12);
        let d = f(t);
        if d < best.1 {
            best = (t, d);
        }
    }
    best
}

// ---------------------------------------------------------------- closed

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedWitness {
    pub space_id: String,
    pub start: GeodesicState,
    /// Return parameter.
    pub t: f64,
    /// `γ̇(t) = c·γ̇(0)`.
    pub c: f64,
    pub closed: bool,
    pub periodic: bool,
    /// Separation of `γ(t)` from `γ(0)`.
    pub gap: f64,
    /// Angle between the tangent lines at `0` and `t`.
    pub angle: f64,
    pub recheck: Recheck,
}

/// Compare `end` against `start` at the same point: gap, line angle and the
/// proportionality constant.
fn closing_measure(space: &Space, start: &GeodesicState, end: &GeodesicState) -> (f64, f64, f64) {
    let e = space.express_near(end, start.point.as_slice(), start.chart);
    let gap = space.separation(start.point.as_slice(), start.chart, e.point.as_slice(), e.chart);
    let angle = line_angle(e.velocity.as_slice(), start.velocity.as_slice());
    let c = e.velocity.norm() / start.velocity.norm() * dot(e.velocity.as_slice(), start.velocity.as_slice()).signum();
    (gap, angle, c)
}

impl ClosedWitness {
    fn recheck(&self) -> Result<bool> {
        let space = parse_space(&self.space_id)?;
        let end = exp_state(&space, &self.start, self.t)?;
        let (gap, angle, c) = closing_measure(&space, &self.start, &end);
        let periodic = (c - 1.0).abs() < PARALLEL_TOL;
        Ok(gap < self.recheck.tolerance && angle < PARALLEL_TOL && periodic == self.periodic)
    }
}

/// First return of a geodesic to its starting point with a parallel
/// tangent line, for `0 < t ≤ t_max`.
///
/// Local minima of the sampled separation from `γ(0)` are refined by golden
/// section on the dense output; a minimum within `tol` whose tangent line
/// agrees with the initial one certifies a closed geodesic, periodic when
/// the velocities also agree.
pub fn detect_closed(space: &Space, c: &GeodesicClass, t_max: f64, tol: f64) -> Result<Option<Witness>> {
    if !(t_max > 0.0) || !(tol > 0.0) {
        return Err(GeoError::BadParams("t_max and tol must be positive".into()));
    }
    let start = space.unit_state(&c.rep)?;
    let traj = integrate_with(space, &start, t_max, &IntegrateOptions::default())?;
    let sep = |s: &GeodesicState| space.separation(s.point.as_slice(), s.chart, start.point.as_slice(), start.chart);
    let seps: Vec<f64> = traj.samples.iter().map(|s| sep(&s.state)).collect();
    for i in 1..seps.len().saturating_sub(1) {
        if !(seps[i] <= seps[i - 1] && seps[i] <= seps[i + 1]) || seps[i] > 0.05 {
            continue;
        }
        let (lo, hi) = (traj.samples[i - 1].t, traj.samples[i + 1].t);
        let t = golden_min(
            |t| traj.state_at(space, t).map_or(f64::INFINITY, |s| sep(&s)),
            lo,
            hi,
            1e-12,
        );
        let end = traj.state_at(space, t)?;
        let (gap, angle, c) = closing_measure(space, &start, &end);
        if gap < tol && angle < PARALLEL_TOL {
            return Ok(Some(Witness::ClosedGeodesic(ClosedWitness {
                space_id: space.id(),
                start,
                t,
                c,
                closed: true,
                periodic: (c - 1.0).abs() < PARALLEL_TOL,
                gap,
                angle,
                recheck: Recheck::new("integrate start to t; compare point and tangent line", tol),
            })));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------- returning

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnWitness {
    pub space_id: String,
    #[serde(with = "crate::state::dvec")]
    pub center: DVector<f64>,
    pub radius: f64,
    pub start: GeodesicState,
    pub t_exit: f64,
    pub t_reentry: f64,
    /// Whether the re-entry runs along the trace the geodesic left behind.
    pub retrace: bool,
    /// Distance of the re-entry state from that trace.
    pub retrace_gap: f64,
    pub recheck: Recheck,
}

impl ReturnWitness {
    fn recheck(&self) -> Result<bool> {
        let space = parse_space(&self.space_id)?;
        let c = self.center.as_slice();
        let off = |s: &GeodesicState| space.separation(s.point.as_slice(), s.chart, c, 0) - self.radius;
        let tol = self.recheck.tolerance;
        let at_exit = exp_state(&space, &self.start, self.t_exit)?;
        let traj = integrate_with(&space, &self.start, self.t_reentry, &IntegrateOptions::default())?;
        let outside = traj
            .samples
            .iter()
            .filter(|s| s.t > self.t_exit && s.t < self.t_reentry)
            .any(|s| off(&s.state) > 0.0);
        let at_entry = traj.last().state.clone();
        Ok(off(&at_exit).abs() < tol && off(&at_entry).abs() < tol && outside)
    }
}

/// First parameter in `(lo, hi]` of a sign change of `f`, by bisection.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Index of the first sample (in order of increasing `|t|`) whose sign of
/// `f` differs from `inside`.
fn first_flip(
    traj: &Trajectory,
    order: &[usize],
    from: usize,
    f: &impl Fn(&GeodesicState) -> f64,
    inside: bool,
) -> Option<usize> {
    order[from..]
        .iter()
        .position(|&i| (f(&traj.samples[i].state) <= 0.0) != inside)
        .map(|k| k + from)
}

/// Samples geodesics starting in the ball of `radius` (chart separation)
/// around `p` and looks for one that leaves and re-enters before `t_max`.
///
/// A non-retracing return is reported in preference to a retracing one.
pub fn returning_test(
    space: &Space,
    p: &DVector<f64>,
    radius: f64,
    n_samples: usize,
    t_max: f64,
    seed: u64,
) -> Result<Option<Witness>> {
    if !(radius > 0.0) || !(t_max > 0.0) {
        return Err(GeoError::BadParams("radius and t_max must be positive".into()));
    }
    space.check_point(p.as_slice(), 0)?;
    let root = SampleRng::new(seed);
    let c = p.as_slice();
    let off = |s: &GeodesicState| space.separation(s.point.as_slice(), s.chart, c, 0) - radius;
    let opts = IntegrateOptions::default();
    let mut retracing: Option<Witness> = None;
    for i in 0..n_samples {
        let mut rng = root.split(i as u64);
        // chart offsets, shrunk until the start is well inside the ball
        let mut step = rng.in_ball(space.dim(), 0.9 * radius);
        let mut x = p + &step;
        while !(space.in_chart(x.as_slice(), 0) && space.separation(x.as_slice(), 0, c, 0) < 0.9 * radius) {
            step *= 0.5;
            x = p + &step;
        }
        let start = space.unit_state(&GeodesicState::new(x, rng.direction(space.dim())))?;
        let fwd = integrate_span(space, &start, 0.0, t_max, &opts)?;
        let order: Vec<usize> = (0..fwd.len()).collect();
        let offs = |s: &GeodesicState| off(s);
        let Some(exit) = first_flip(&fwd, &order, 1, &offs, true) else {
            continue;
        };
        let Some(entry) = first_flip(&fwd, &order, exit, &offs, false) else {
            continue;
        };
        let g = |t: f64| fwd.state_at(space, t).map_or(f64::NAN, |s| off(&s));
        let t_exit = bisect(g, fwd.samples[exit - 1].t, fwd.samples[exit].t);
        let t_reentry = bisect(g, fwd.samples[entry - 1].t, fwd.samples[entry].t);
        let reentry = fwd.state_at(space, t_reentry)?;

        // the trace inside the ball, backwards to where it first entered
        let back = integrate_span(space, &start, 0.0, -t_max, &opts)?;
        let border: Vec<usize> = (0..back.len()).rev().collect();
        let back_exit =
            first_flip(&back, &border, 0, &offs, true).map_or(back.t_start(), |k| back.samples[border[k]].t);
        let mut trace = back
            .samples
            .iter()
            .filter(|s| s.t >= back_exit)
            .cloned()
            .collect::<Vec<_>>();
        trace.extend(fwd.samples.iter().filter(|s| s.t > 0.0 && s.t <= t_exit).cloned());
        let trace = Trajectory {
            samples: trace,
            stats: Default::default(),
            truncated: false,
        };
        let (ts, gap) = trace_distance(space, &trace, reentry.point.as_slice(), reentry.chart);
        let on = trace
            .state_at(space, ts)
            .unwrap_or_else(|_| trace.samples[trace.nearest(ts)].state.clone());
        let e = space.express_near(&reentry, on.point.as_slice(), on.chart);
        let retrace = gap < PARALLEL_TOL && line_angle(e.velocity.as_slice(), on.velocity.as_slice()) < PARALLEL_TOL;
        let w = Witness::ReturningGeodesic(ReturnWitness {
            space_id: space.id(),
            center: p.clone(),
            radius,
            start,
            t_exit,
            t_reentry,
            retrace,
            retrace_gap: gap,
            recheck: Recheck::new(
                "integrate start; crossings of the ball boundary at t_exit and t_reentry",
                1e-6,
            ),
        });
        if !retrace {
            return Ok(Some(w));
        }
        retracing.get_or_insert(w);
    }
    Ok(retracing)
}

// ---------------------------------------------------------------- regularity

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityEntry {
    pub eps: f64,
    /// Angle at `t = a` between `λ'(ε, a)` and the line of `(γ'(0), 0)`.
    pub angle: f64,
    /// Largest separation of `λ(ε, t)` from `λ(ε, 0)` for `t ∈ [0, a]`.
    pub excursion: f64,
    pub left_neighborhood: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityWitness {
    /// The product space `M₁ × M₂`.
    pub space_id: String,
    pub gamma: GeodesicState,
    pub beta: GeodesicState,
    /// Return parameter and proportionality constant of `γ`.
    pub a: f64,
    pub c: f64,
    pub radius: f64,
    pub entries: Vec<RegularityEntry>,
    pub recheck: Recheck,
}

fn product_state(s1: &Space, gamma: &GeodesicState, beta: &GeodesicState, eps: f64) -> GeodesicState {
    let bits1 = s1.factors().iter().filter(|f| f.chart_bit.is_some()).count();
    let mut point = gamma.point.as_slice().to_vec();
    point.extend_from_slice(beta.point.as_slice());
    let mut velocity = gamma.velocity.as_slice().to_vec();
    velocity.extend(beta.velocity.iter().map(|v| eps * v));
    GeodesicState::from_slices(&point, &velocity).with_chart(gamma.chart | (beta.chart << bits1))
}

fn regularity_entry(
    prod: &Space,
    s1: &Space,
    gamma: &GeodesicState,
    beta: &GeodesicState,
    eps: f64,
    a: f64,
    radius: f64,
) -> Result<RegularityEntry> {
    let lam = product_state(s1, gamma, beta, eps);
    let traj = integrate_with(prod, &lam, a, &IntegrateOptions::default())?;
    let excursion = traj
        .samples
        .iter()
        .map(|s| prod.separation(s.state.point.as_slice(), s.state.chart, lam.point.as_slice(), lam.chart))
        .fold(0.0, f64::max);
    let end = prod.express_near(&traj.last().state, lam.point.as_slice(), lam.chart);
    let w = product_state(s1, gamma, beta, 0.0).velocity;
    let x = end.point.as_slice();
    let u = end.velocity.as_slice();
    let angle = if prod.has_metric() {
        let par = prod.inner(x, u, w.as_slice()) / prod.inner(x, w.as_slice(), w.as_slice());
        let perp: Vec<f64> = u.iter().zip(w.iter()).map(|(a, b)| a - par * b).collect();
        prod.speed(x, &perp).atan2((par * prod.speed(x, w.as_slice())).abs())
    } else {
        line_angle(u, w.as_slice())
    };
    Ok(RegularityEntry {
        eps,
        angle,
        excursion,
        left_neighborhood: excursion > radius,
    })
}

impl RegularityWitness {
    fn recheck(&self) -> Result<bool> {
        let prod = parse_space(&self.space_id)?;
        let SpaceSpec::Product(a, _) = prod.spec() else {
            return Err(GeoError::BadParams("regularity witness needs a product space".into()));
        };
        let s1 = Space::new((**a).clone())?;
        let mut ok = true;
        for e in &self.entries {
            let r = regularity_entry(&prod, &s1, &self.gamma, &self.beta, e.eps, self.a, self.radius)?;
            ok &= (r.angle - e.angle).abs() <= 1e-9 + 1e-6 * e.angle && r.left_neighborhood == e.left_neighborhood;
        }
        let last = self.entries.last().map_or(f64::INFINITY, |e| e.angle);
        Ok(ok && last < self.recheck.tolerance)
    }
}

/// The family `λ(ε, t) = (γ(t), β(εt))` in `M₁ × M₂` for a closed geodesic
/// `γ` of `M₁`: the tangent lines of `λ(ε, ·)` at `t = 0` and `t = a`
/// converge to the same line as `ε → 0` while every `λ(ε, ·)` leaves the
/// neighborhood of radius `radius` in between, so the product is not
/// geodesically regular.
///
/// The distance between tangent lines is the metric angle between
/// `λ'(ε, a)` and `(γ'(0), 0)`; both sit over (nearly) the same point of
/// the first factor.
pub fn product_regularity_witness(
    space1: &Space,
    gamma: &GeodesicClass,
    space2: &Space,
    beta: &GeodesicClass,
    eps_seq: &[f64],
    t_max: f64,
    radius: f64,
) -> Result<Witness> {
    let closed = match detect_closed(space1, gamma, t_max, 1e-6)? {
        Some(Witness::ClosedGeodesic(w)) => w,
        _ => return Err(GeoError::NotClosed { t_max }),
    };
    let prod = Space::new(SpaceSpec::Product(
        Box::new(space1.spec().clone()),
        Box::new(space2.spec().clone()),
    ))?;
    let g = closed.start.clone();
    let b = space2.unit_state(&beta.rep)?;
    let entries = eps_seq
        .iter()
        .map(|&eps| regularity_entry(&prod, space1, &g, &b, eps, closed.t, radius))
        .collect::<Result<Vec<_>>>()?;
    Ok(Witness::RegularityViolation(RegularityWitness {
        space_id: prod.id(),
        gamma: g,
        beta: b,
        a: closed.t,
        c: closed.c,
        radius,
        entries,
        recheck: Recheck::new("integrate each λ(ε, ·) to t = a; tangent-line angle", 1e-3),
    }))
}

// ---------------------------------------------------------------- hulls

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeSegment {
    pub start: GeodesicState,
    pub length: f64,
    pub end: Vec<f64>,
    pub end_chart: u32,
    /// Largest separation of the segment from the set K.
    pub radius: f64,
    /// Smallest distance of the segment to the chart edge or a puncture.
    pub boundary_distance: f64,
    /// The puncture distance this segment was built to undercut, if any.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullEscapeWitness {
    pub space_id: String,
    pub k: Vec<Vec<f64>>,
    /// Radius bound the segments exceed, if the escape is by radius.
    pub bound: Option<f64>,
    pub segments: Vec<EscapeSegment>,
    pub recheck: Recheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullOptions {
    /// Longest connection considered in spaces without poles.
    pub t_cap: f64,
    /// Hull radius above which a witness is emitted.
    pub bound: f64,
    pub windings: u32,
}

impl Default for HullOptions {
    fn default() -> Self {
        HullOptions {
            t_cap: 50.0,
            bound: 10.0,
            windings: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullReport {
    /// Largest separation from K of any sampled segment point.
    pub hull_radius: f64,
    pub segments: usize,
    /// Whether the radius comes from the cone construction (spaces whose
    /// exponential maps are diffeomorphisms) or from enumerated connections.
    pub cone: bool,
    pub witness: Option<Witness>,
}

/// Sample a segment: largest separation from `k` and smallest boundary
/// distance along it (the latter refined around its sampled minimum).
fn measure_segment(
    space: &Space,
    start: &GeodesicState,
    length: f64,
    k: &[DVector<f64>],
) -> Result<(GeodesicState, f64, f64)> {
    let traj = integrate_with(space, start, length, &IntegrateOptions::default())?;
    if traj.truncated {
        return Err(GeoError::Inextendible {
            reached: traj.t_end(),
            wanted: length,
        });
    }
    let from_k = |s: &GeodesicState| {
        k.iter()
            .map(|q| space.separation(s.point.as_slice(), s.chart, q.as_slice(), 0))
            .fold(f64::INFINITY, f64::min)
    };
    let bd = |s: &GeodesicState| space.boundary_distance(s.point.as_slice(), s.chart);
    let mut radius: f64 = 0.0;
    let mut low = (0, f64::INFINITY);
    for (i, smp) in traj.samples.iter().enumerate() {
        radius = radius.max(from_k(&smp.state));
        let b = bd(&smp.state);
        if b < low.1 {
            low = (i, b);
        }
    }
    let mut boundary = low.1;
    if boundary.is_finite() && traj.len() >= 3 {
        let lo = traj.samples[low.0.saturating_sub(1)].t;
        let hi = traj.samples[(low.0 + 1).min(traj.len() - 1)].t;
        let f = |t: f64| traj.state_at(space, t).map_or(f64::INFINITY, |s| bd(&s));
        boundary = boundary.min(f(golden_min(f, lo, hi, 1e-13)));
    }
    Ok((traj.last().state.clone(), radius, boundary))
}

impl HullEscapeWitness {
    fn recheck(&self) -> Result<bool> {
        let space = parse_space(&self.space_id)?;
        let k: Vec<DVector<f64>> = self.k.iter().map(|p| DVector::from_column_slice(p)).collect();
        let tol = self.recheck.tolerance;
        for seg in &self.segments {
            let (end, radius, boundary) = measure_segment(&space, &seg.start, seg.length, &k)?;
            if space.separation(end.point.as_slice(), end.chart, &seg.end, seg.end_chart) > tol {
                return Ok(false);
            }
            let escapes = match (seg.delta, self.bound) {
                (Some(delta), _) => boundary < delta,
                (None, Some(bound)) => radius > bound,
                (None, None) => false,
            };
            if !escapes || (radius - seg.radius).abs() > tol {
                return Ok(false);
            }
        }
        Ok(!self.segments.is_empty())
    }
}

/// How far geodesic segments with both endpoints in the finite set `k`
/// stray from it.
///
/// In spaces whose exponential maps are diffeomorphisms the segments are
/// exactly `exp_x(s·log_x(y))`, `s ∈ [0, 1]` (the cone construction);
/// elsewhere every connection up to `t_cap` and the winding cap is sampled.
pub fn hull_estimate(space: &Space, k: &[DVector<f64>], opts: &HullOptions) -> Result<HullReport> {
    if k.is_empty() {
        return Err(GeoError::BadParams("K must be nonempty".into()));
    }
    for p in k {
        space.check_point(p.as_slice(), 0)?;
    }
    let cone = space.has_pole();
    let mut segs: Vec<(GeodesicState, f64)> = Vec::new();
    for i in 0..k.len() {
        for j in i + 1..k.len() {
            if cone {
                let v = log_map(space, &k[i], &k[j])?;
                segs.push((GeodesicState::new(k[i].clone(), v), 1.0));
            } else {
                let copts = ConnectOptions {
                    windings: opts.windings,
                    n_starts: None,
                };
                match connect_states(space, k[i].as_slice(), 0, k[j].as_slice(), 0, &copts) {
                    Ok(cs) => segs.extend(cs.into_iter().filter(|c| c.length() <= opts.t_cap).map(|c| {
                        let l = c.length();
                        (c.velocity, l)
                    })),
                    Err(GeoError::NoConnectionFound) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    let mut hull_radius: f64 = 0.0;
    let mut escaping = Vec::new();
    for (start, length) in &segs {
        let (end, radius, boundary) = measure_segment(space, start, *length, k)?;
        hull_radius = hull_radius.max(radius);
        if radius > opts.bound {
            escaping.push(EscapeSegment {
                start: start.clone(),
                length: *length,
                end: end.point.as_slice().to_vec(),
                end_chart: end.chart,
                radius,
                boundary_distance: boundary,
                delta: None,
            });
        }
    }
    let witness = (!escaping.is_empty()).then(|| {
        Witness::HullEscape(HullEscapeWitness {
            space_id: space.id(),
            k: k.iter().map(|p| p.as_slice().to_vec()).collect(),
            bound: Some(opts.bound),
            segments: escaping,
            recheck: Recheck::new("integrate each segment; endpoint and radius from K", 1e-6),
        })
    });
    Ok(HullReport {
        hull_radius,
        segments: segs.len(),
        cone,
        witness,
    })
}

/// Segments from `x` that sweep ever closer to a puncture of a punctured
/// sphere or projective plane while their endpoints converge in `M`.
///
/// The segments leave `x` at angle `φ` from the great circle through the
/// nearer puncture and run `beyond` past it, so they pass the puncture at
/// distance `δ/2`; `δ` halves from `1e-3` down to `floor`. The endpoints
/// converge to the point `beyond` past the puncture on that great circle,
/// so `K = {x} ∪ {endpoints} ∪ {limit}` is compact while the segments
/// leave every compact subset of `M`.
pub fn puncture_escape(space: &Space, x: &DVector<f64>, beyond: f64, floor: f64) -> Result<Witness> {
    let punctured = matches!(
        space.spec(),
        SpaceSpec::PuncturedSphere2 | SpaceSpec::PuncturedProjectivePlane
    );
    if !punctured {
        return Err(GeoError::BadParams(format!("{} has no puncture", space.id())));
    }
    if !(beyond > 0.0) || !(floor > 0.0) {
        return Err(GeoError::BadParams("beyond and floor must be positive".into()));
    }
    space.check_point(x.as_slice(), 0)?;
    let q = sphere::to_ambient(0, nalgebra::Vector2::new(x[0], x[1]));
    let pole = Vector3::z() * q.z.signum();
    let d = q.dot(&pole).clamp(-1.0, 1.0).acos();
    if d < 1e-6 {
        return Err(GeoError::BadParams("x sits on a puncture".into()));
    }
    let e = (pole - q * q.dot(&pole)).normalize();
    let side = q.cross(&e);
    let length = d + beyond;
    let limit = q * length.cos() + e * length.sin();
    let limit_point = sphere::from_ambient_in(0, limit);
    let k = vec![x.clone(), DVector::from_column_slice(limit_point.as_slice())];

    let mut segments = Vec::new();
    let mut delta = 1e-3;
    while delta >= floor {
        let phi = (0.5 * delta / d.sin()).asin();
        let u = e * phi.cos() + side * phi.sin();
        let v = sphere::tangent_from_ambient(0, q, u);
        let start = GeodesicState::from_slices(x.as_slice(), v.as_slice());
        let Ok((end, radius, boundary)) = measure_segment(space, &start, length, &k) else {
            break;
        };
        segments.push(EscapeSegment {
            start,
            length,
            end: end.point.as_slice().to_vec(),
            end_chart: end.chart,
            radius,
            boundary_distance: boundary,
            delta: Some(delta),
        });
        delta *= 0.5;
    }
    if segments.is_empty() {
        return Err(GeoError::BadParams("no escape segment could be built".into()));
    }
    Ok(Witness::HullEscape(HullEscapeWitness {
        space_id: space.id(),
        k: k.iter().map(|p| p.as_slice().to_vec()).collect(),
        bound: None,
        segments,
        recheck: Recheck::new(
            "integrate each segment; endpoint and puncture distance below delta",
            1e-6,
        ),
    }))
}

// ---------------------------------------------------------------- coverings

/// Gap between two classes of the same space. Anchored classes compare
/// representatives; otherwise the second representative is located on the
/// first geodesic (within 64 units of parameter) and the states compared
/// there, up to orientation for unoriented classes.
pub fn class_gap(space: &Space, a: &GeodesicClass, b: &GeodesicClass) -> Result<f64> {
    if a.anchored && b.anchored {
        let d = a.distance(b, space);
        return Ok(if a.oriented {
            d
        } else {
            d.min(a.distance(&b.reversed(), space))
        });
    }
    let ra = space.unit_state(&a.rep)?;
    let rb = space.unit_state(&b.rep)?;
    let opts = IntegrateOptions::default();
    let fwd = integrate_span(space, &ra, 0.0, 64.0, &opts)?;
    let back = integrate_span(space, &ra, 0.0, -64.0, &opts)?;
    let mut samples = back.samples;
    samples.pop();
    samples.extend(fwd.samples);
    let traj = Trajectory {
        samples,
        stats: Default::default(),
        truncated: false,
    };
    let (t, dist) = trace_distance(space, &traj, rb.point.as_slice(), rb.chart);
    let on = traj.state_at(space, t)?;
    let e = space.express_near(&rb, on.point.as_slice(), on.chart);
    let mut dv = (&e.velocity - &on.velocity).norm();
    if !a.oriented {
        dv = dv.min((&e.velocity + &on.velocity).norm());
    }
    Ok(dist.hypot(dv))
}

fn check_side(space: &Space, c: &GeodesicClass, what: &str) -> Result<()> {
    if c.space_id != space.id() {
        return Err(GeoError::BadParams(format!(
            "{what} class lives on {}, expected {}",
            c.space_id,
            space.id()
        )));
    }
    Ok(())
}

/// The downstairs class of the projection of an upstairs geodesic.
pub fn covering_push(cov: &CoveringMap, c: &GeodesicClass) -> Result<GeodesicClass> {
    check_side(cov.upstairs(), c, "upstairs")?;
    canonicalize(cov.downstairs(), &cov.project_state(&c.rep), c.oriented)
}

/// The lift of a downstairs class through the given sheet.
pub fn lift_geodesic(cov: &CoveringMap, c: &GeodesicClass, sheet: Sheet) -> Result<GeodesicClass> {
    check_side(cov.downstairs(), c, "downstairs")?;
    canonicalize(cov.upstairs(), &cov.lift_state(&c.rep, sheet)?, c.oriented)
}

/// Both routes around the square `p̂ ∘ π̃ = π ∘ p_*` for one upstairs state:
/// canonicalize then push, versus project then canonicalize.
pub fn commuting_square_gap(cov: &CoveringMap, s: &GeodesicState) -> Result<f64> {
    let up = canonicalize(cov.upstairs(), s, true)?;
    let pushed = covering_push(cov, &up)?;
    let direct = canonicalize(cov.downstairs(), &cov.project_state(s), true)?;
    class_gap(cov.downstairs(), &direct, &pushed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringMismatchWitness {
    pub covering: String,
    pub state: GeodesicState,
    pub gap: f64,
    pub recheck: Recheck,
}

impl CoveringMismatchWitness {
    fn recheck(&self) -> Result<bool> {
        let cov = crate::spaces::make_covering(&self.covering)?;
        Ok(commuting_square_gap(&cov, &self.state)? > self.recheck.tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub covering: String,
    pub samples: usize,
    pub passed: usize,
    pub max_gap: f64,
    pub witnesses: Vec<Witness>,
}

/// Commuting-square check on `n` random upstairs states.
pub fn covering_suite(cov: &CoveringMap, n: usize, seed: u64, tol: f64) -> Result<CoveringReport> {
    let root = SampleRng::new(seed);
    let mut report = CoveringReport {
        covering: cov.name().to_string(),
        samples: n,
        passed: 0,
        max_gap: 0.0,
        witnesses: vec![],
    };
    for i in 0..n {
        let mut rng = root.split(i as u64);
        let s = cov.upstairs().random_state(&mut rng);
        let gap = commuting_square_gap(cov, &s)?;
        report.max_gap = report.max_gap.max(gap);
        if gap <= tol {
            report.passed += 1;
        } else {
            report
                .witnesses
                .push(Witness::CoveringMismatch(CoveringMismatchWitness {
                    covering: cov.name().to_string(),
                    state: s,
                    gap,
                    recheck: Recheck::new("canonicalize-then-push versus project-then-canonicalize", tol),
                }));
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------- non-Hausdorff limit

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonHausdorffElement {
    /// Tilt of the great circle away from the punctures.
    pub tilt: f64,
    pub period: f64,
    /// Largest distance from sampled points of each lift to this circle.
    pub lift_distance: [f64; 2],
    /// Largest distance from sampled points of the downstairs geodesic to
    /// the pushed-down circle.
    pub pushed_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonHausdorffWitness {
    pub covering: String,
    pub target: GeodesicClass,
    pub lifts: [GeodesicClass; 2],
    pub elements: Vec<NonHausdorffElement>,
    pub recheck: Recheck,
}

/// Parameter window sampled on the punctured meridian (it runs into the
/// punctures at `±π/2`).
const MERIDIAN_REACH: f64 = FRAC_PI_2 - 0.05;
const MERIDIAN_SAMPLES: usize = 17;

fn tilted_circle(tilt: f64) -> GeodesicState {
    // great circle through (1, 0, 0) passing the poles at angle `tilt`
    let q = Vector3::x();
    let u = Vector3::new(0.0, tilt.sin(), tilt.cos());
    let (chart, w) = sphere::from_ambient(q);
    let v = sphere::tangent_from_ambient(chart, q, u);
    GeodesicState::from_slices(w.as_slice(), v.as_slice()).with_chart(chart)
}

fn meridian_distance(space: &Space, curve: &GeodesicState, period: f64, along: &GeodesicClass) -> Result<f64> {
    let traj = integrate_with(space, curve, period, &IntegrateOptions::default())?;
    let rep = space.unit_state(&along.rep)?;
    let mut worst: f64 = 0.0;
    for i in 0..MERIDIAN_SAMPLES {
        let t = -MERIDIAN_REACH + 2.0 * MERIDIAN_REACH * i as f64 / (MERIDIAN_SAMPLES - 1) as f64;
        let p = exp_state(space, &rep, t)?;
        worst = worst.max(trace_distance(space, &traj, p.point.as_slice(), p.chart).1);
    }
    Ok(worst)
}

fn non_hausdorff_element(
    cov: &CoveringMap,
    target: &GeodesicClass,
    lifts: &[GeodesicClass; 2],
    tilt: f64,
) -> Result<NonHausdorffElement> {
    let up = cov.upstairs();
    let circle = canonicalize(up, &tilted_circle(tilt), true)?;
    let period = match detect_closed(up, &circle, TAU + 1.0, 1e-6)? {
        Some(Witness::ClosedGeodesic(w)) => w.t,
        _ => return Err(GeoError::NotClosed { t_max: TAU + 1.0 }),
    };
    let rep = up.unit_state(&circle.rep)?;
    let lift_distance = [
        meridian_distance(up, &rep, period, &lifts[0])?,
        meridian_distance(up, &rep, period, &lifts[1])?,
    ];
    let pushed = covering_push(cov, &circle)?;
    let pushed_rep = cov.downstairs().unit_state(&pushed.rep)?;
    let pushed_distance = meridian_distance(cov.downstairs(), &pushed_rep, 0.5 * period, target)?;
    Ok(NonHausdorffElement {
        tilt,
        period,
        lift_distance,
        pushed_distance,
    })
}

impl NonHausdorffWitness {
    fn recheck(&self) -> Result<bool> {
        let cov = crate::spaces::make_covering(&self.covering)?;
        let Some(last) = self.elements.last() else {
            return Ok(false);
        };
        let e = non_hausdorff_element(&cov, &self.target, &self.lifts, last.tilt)?;
        let agree = (0..2).all(|i| (e.lift_distance[i] - last.lift_distance[i]).abs() < 1e-6)
            && (e.pushed_distance - last.pushed_distance).abs() < 1e-6;
        let tol = self.recheck.tolerance;
        Ok(agree && e.lift_distance.iter().all(|d| *d < tol) && e.pushed_distance < tol)
    }
}

/// The sequence of closed great circles on the doubly punctured sphere
/// tilted by `2⁻ᵏ`, `k = 1..=n`, away from the punctures. Pushed down they
/// converge to the punctured meridian of the punctured projective plane,
/// and upstairs they accumulate on both of its lifts at once.
pub fn non_hausdorff_witness(cov: &CoveringMap, n: usize) -> Result<Witness> {
    if cov.kind() != CoveringKind::PuncturedSphereOverPunctured {
        return Err(GeoError::BadParams(format!("{} has no punctured meridian", cov.name())));
    }
    // the meridian through (1, 0, 0) heading for the puncture
    let v = sphere::tangent_from_ambient(0, Vector3::x(), Vector3::z());
    let down = GeodesicState::from_slices(&[1.0, 0.0], v.as_slice());
    let target = canonicalize(cov.downstairs(), &down, true)?;
    let lifts = [
        lift_geodesic(cov, &target, Sheet::new(0))?,
        lift_geodesic(cov, &target, Sheet::new(1))?,
    ];
    let elements = (1..=n)
        .map(|k| non_hausdorff_element(cov, &target, &lifts, 0.5f64.powi(k as i32)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Witness::NonHausdorffLimit(NonHausdorffWitness {
        covering: cov.name().to_string(),
        target,
        lifts,
        elements,
        recheck: Recheck::new("rebuild the last circle; sampled distances to both lifts", 1e-3),
    }))
}
