//! Connections and geodesic integration.
//!
//! Geodesics solve `γ̈ + Γ(γ̇, γ̇) = 0`. Integration uses the Dormand–Prince
//! 5(4) embedded pair with per-step error control on the packed state
//! `[x, v, w₁, …, w_m]`, where the optional `wⱼ` are parallel transported
//! along the geodesic (`ẇ = −Γ(v, w)`). After each accepted step the space's
//! identifications are applied, carrying every tangent block through the
//! Jacobian of the gluing map.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::linalg::solve;
use crate::spaces::{pack, unpack, Space};
use crate::state::{GeodesicState, Sample, StepStats, Trajectory};

/// Connection coefficients `Γ^k_ij` at a point, stored as `[k][i][j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `Γ(a, b)^k = Γ^k_ij a^i b^j`.
    pub fn contract(&self, a: &[f64], b: &[f64]) -> DVector<f64> {
        let n = self.dim;
        DVector::from_fn(n, |k, _| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += self.get(k, i, j) * a[i] * b[j];
                }
            }
            s
        })
    }
}

pub fn christoffel_at(space: &Space, p: &DVector<f64>) -> Result<Christoffel> {
    space.check_point(p.as_slice(), 0)?;
    let n = space.dim();
    let x = p.as_slice();
    let mut data = vec![0.0; n * n * n];
    let (mut ei, mut ej, mut out) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        ei.fill(0.0);
        ei[i] = 1.0;
        for j in i..n {
            ej.fill(0.0);
            ej[j] = 1.0;
            space.gamma_contract(x, &ei, &ej, &mut out);
            for k in 0..n {
                data[(k * n + i) * n + j] = out[k];
                data[(k * n + j) * n + i] = out[k];
            }
        }
    }
    Ok(Christoffel { dim: n, data })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    /// Local error tolerance per step (mixed absolute/relative).
    pub tol: f64,
    /// Largest step; also bounds the sample spacing of the trajectory.
    pub max_step: f64,
    /// Step floor, relative to `max(1, |t|)`.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            tol: 1e-9,
            max_step: 0.01,
            min_step: 1e-12,
            max_steps: 5_000_000,
        }
    }
}

impl IntegrateOptions {
    pub fn with_tol(tol: f64) -> Self {
        IntegrateOptions {
            tol,
            ..Default::default()
        }
    }
}

const A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn flow(space: &Space, dim: usize, y: &[f64], out: &mut [f64]) {
    let (x, rest) = y.split_at(dim);
    let v = &rest[..dim];
    out[..dim].copy_from_slice(v);
    let (_, tail) = out.split_at_mut(dim);
    for (b, o) in rest.chunks(dim).zip(tail.chunks_mut(dim)) {
        space.gamma_contract(x, v, b, o);
        o.iter_mut().for_each(|c| *c = -*c);
    }
}

pub(crate) struct Outcome {
    pub y: Vec<f64>,
    pub chart: u32,
    pub t: f64,
    pub truncated: bool,
    pub stats: StepStats,
}

/// Integrate a packed state from `t0` to `t1` (either direction), calling
/// `record` on the initial state and after every accepted step.
pub(crate) fn drive(
    space: &Space,
    y0: Vec<f64>,
    chart0: u32,
    t0: f64,
    t1: f64,
    opts: &IntegrateOptions,
    mut record: impl FnMut(f64, &[f64], u32),
) -> Result<Outcome> {
    let dim = space.dim();
    let n = y0.len();
    let mut y = y0;
    let mut chart = chart0;
    space.check_point(&y[..dim], chart)?;
    space.normalize(&mut y, &mut chart);
    record(t0, &y, chart);

    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut h = opts.max_step.min((t1 - t0).abs()).max(0.0);
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut stats = StepStats {
        min_step: f64::INFINITY,
        ..Default::default()
    };
    let mut truncated = false;

    while (t1 - t) * dir > 0.0 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(GeoError::NoConvergence {
                solver: "integrate",
                iterations: opts.max_steps,
                residual: (t1 - t).abs(),
            });
        }
        let remaining = (t1 - t).abs();
        let floor = opts.min_step * t.abs().max(1.0);
        h = h.min(remaining).min(opts.max_step);
        let last = h >= remaining;
        if h < floor && !last {
            return Err(GeoError::StepUnderflow { t, floor });
        }
        let hs = h * dir;

        flow(space, dim, &y, &mut k[0]);
        let mut left_chart = false;
        for s in 0..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[s].iter().enumerate() {
                    acc += a * k[j][i];
                }
                stage[i] = y[i] + hs * acc;
            }
            if !space.in_chart(&stage[..dim], chart) {
                left_chart = true;
                break;
            }
            let (_, rest) = k.split_at_mut(s + 1);
            flow(space, dim, &stage, &mut rest[0]);
        }
        if !left_chart && space.segment_hits_puncture(&y[..dim], &stage[..dim]) {
            left_chart = true;
        }
        if left_chart {
            if h < 2.0 * floor {
                truncated = true;
                break;
            }
            h *= 0.5;
            stats.rejected += 1;
            continue;
        }
        // the sixth stage point is the fifth-order solution
        ynew.copy_from_slice(&stage);
        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, ej) in E.iter().enumerate() {
                e += ej * k[j][i];
            }
            let scale = opts.tol * (1.0 + y[i].abs().max(ynew[i].abs()));
            err = err.max((hs * e).abs() / scale);
        }
        if !err.is_finite() {
            h *= 0.2;
            stats.rejected += 1;
            continue;
        }
        stats.max_error_ratio = stats.max_error_ratio.max(err.min(1.0));
        if err <= 1.0 {
            t = if last { t1 } else { t + hs };
            std::mem::swap(&mut y, &mut ynew);
            space.normalize(&mut y, &mut chart);
            stats.accepted += 1;
            stats.max_step = stats.max_step.max(h);
            stats.min_step = stats.min_step.min(h);
            record(t, &y, chart);
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    if stats.accepted == 0 {
        stats.min_step = 0.0;
    }
    Ok(Outcome {
        y,
        chart,
        t,
        truncated,
        stats,
    })
}

/// Integrate the geodesic through `s0` (at parameter 0) to `t_end`.
pub fn integrate(space: &Space, s0: &GeodesicState, t_end: f64, tol: f64) -> Result<Trajectory> {
    integrate_with(space, s0, t_end, &IntegrateOptions::with_tol(tol))
}

pub fn integrate_with(space: &Space, s0: &GeodesicState, t_end: f64, opts: &IntegrateOptions) -> Result<Trajectory> {
    integrate_span(space, s0, 0.0, t_end, opts)
}

/// Integrate from the state `s0` at parameter `t0` to `t1`. Samples are
/// returned in increasing `t` regardless of the direction of integration.
pub fn integrate_span(
    space: &Space,
    s0: &GeodesicState,
    t0: f64,
    t1: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(opts.tol > 0.0) {
        return Err(GeoError::BadParams("tolerance must be positive".into()));
    }
    if !t0.is_finite() || !t1.is_finite() {
        return Err(GeoError::BadParams("integration bounds must be finite".into()));
    }
    space.check_state(s0)?;
    let dim = space.dim();
    let mut samples = Vec::new();
    let out = drive(space, pack(s0), s0.chart, t0, t1, opts, |t, y, chart| {
        samples.push(Sample {
            t,
            state: unpack(y, dim, chart),
        });
    })?;
    if t1 < t0 {
        samples.reverse();
    }
    Ok(Trajectory {
        samples,
        stats: out.stats,
        truncated: out.truncated,
    })
}

/// Integrate a state together with extra tangent vectors transported
/// parallel along the geodesic. Returns the final state and vectors.
pub fn transport_with(
    space: &Space,
    s0: &GeodesicState,
    t_end: f64,
    vectors: &[DVector<f64>],
    opts: &IntegrateOptions,
) -> Result<(GeodesicState, Vec<DVector<f64>>, bool)> {
    space.check_state(s0)?;
    let dim = space.dim();
    let mut y = pack(s0);
    for w in vectors {
        if w.len() != dim {
            return Err(GeoError::BadParams(format!(
                "tangent vector must have {dim} components"
            )));
        }
        y.extend_from_slice(w.as_slice());
    }
    let out = drive(space, y, s0.chart, 0.0, t_end, opts, |_, _, _| {})?;
    let state = unpack(&out.y, dim, out.chart);
    let ws = out.y[2 * dim..].chunks(dim).map(DVector::from_column_slice).collect();
    Ok((state, ws, out.truncated))
}

/// Geodesic flow for time `t`, keeping chart labels.
pub fn exp_state(space: &Space, s: &GeodesicState, t: f64) -> Result<GeodesicState> {
    if s.velocity.iter().all(|c| *c == 0.0) || t == 0.0 {
        space.check_state(s)?;
        return Ok(space.normalize_state(s));
    }
    let opts = IntegrateOptions::default();
    let dim = space.dim();
    let out = drive(space, pack(s), s.chart, 0.0, t, &opts, |_, _, _| {})?;
    if out.truncated {
        return Err(GeoError::Inextendible {
            reached: out.t,
            wanted: t,
        });
    }
    Ok(unpack(&out.y, dim, out.chart))
}

/// `exp_p(v)`, with `p` in chart 0; the result is expressed near `p`.
pub fn exp_map(space: &Space, p: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let s = GeodesicState::new(p.clone(), v.clone());
    let end = exp_state(space, &s, 1.0)?;
    Ok(space.express_near(&end, p.as_slice(), 0).point)
}

const LOG_MAX_ITER: usize = 50;
const LOG_FD_STEP: f64 = 1e-6;

/// Inverse of `exp_p` by Newton shooting on the endpoint map, with
/// finite-difference Jacobians and backtracking. Far targets are approached
/// by continuation along the chart segment from `p` to `q`.
pub fn log_map(space: &Space, p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
    if !space.has_pole() {
        return Err(GeoError::BadParams(format!(
            "log_map needs a space whose exponential maps are diffeomorphisms, got {}",
            space.id()
        )));
    }
    space.check_point(p.as_slice(), 0)?;
    space.check_point(q.as_slice(), 0)?;
    if p == q {
        return Ok(DVector::zeros(space.dim()));
    }
    let mut last_err = None;
    for stages in [1usize, 4, 16] {
        let mut v = (q - p) / stages as f64;
        let mut ok = true;
        for s in 1..=stages {
            let target = p + (q - p) * (s as f64 / stages as f64);
            if s > 1 {
                v *= s as f64 / (s - 1) as f64;
            }
            match shoot(space, p, &target, v.clone()) {
                Ok(sol) => v = sol,
                Err(e) => {
                    last_err = Some(e);
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(v);
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn endpoint_miss(space: &Space, p: &DVector<f64>, q: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
    exp_map(space, p, v).ok().map(|x| x - q)
}

fn shoot(space: &Space, p: &DVector<f64>, q: &DVector<f64>, mut v: DVector<f64>) -> Result<DVector<f64>> {
    let n = space.dim();
    let mut f = endpoint_miss(space, p, q, &v).ok_or(GeoError::NoConvergence {
        solver: "log_map",
        iterations: 0,
        residual: f64::INFINITY,
    })?;
    let mut fnorm = f.norm();
    for iter in 0..LOG_MAX_ITER {
        if fnorm < 1e-11 {
            return Ok(v);
        }
        let h = LOG_FD_STEP * v.norm().max(1.0);
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut vj = v.clone();
            vj[j] += h;
            let fj = endpoint_miss(space, p, q, &vj).ok_or(GeoError::NoConvergence {
                solver: "log_map",
                iterations: iter,
                residual: fnorm,
            })?;
            jac.set_column(j, &((fj - &f) / h));
        }
        let step = solve(jac, &(-&f)).ok_or(GeoError::NoConvergence {
            solver: "log_map",
            iterations: iter,
            residual: fnorm,
        })?;
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial = &v + &step * lambda;
            if let Some(ft) = endpoint_miss(space, p, q, &trial) {
                let tn = ft.norm();
                if tn < fnorm {
                    v = trial;
                    f = ft;
                    fnorm = tn;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            // stalled at the integration noise floor
            if fnorm < 1e-8 {
                return Ok(v);
            }
            return Err(GeoError::NoConvergence {
                solver: "log_map",
                iterations: iter,
                residual: fnorm,
            });
        }
        if step.norm() * lambda < 1e-13 * (1.0 + v.norm()) && fnorm < 1e-8 {
            return Ok(v);
        }
    }
    if fnorm < 1e-9 {
        return Ok(v);
    }
    Err(GeoError::NoConvergence {
        solver: "log_map",
        iterations: LOG_MAX_ITER,
        residual: fnorm,
    })
}

/// Transport `v0` from the start of `traj` to its end. The result is
/// expressed in the chart of the trajectory's last sample.
pub fn parallel_transport(space: &Space, traj: &Trajectory, v0: &DVector<f64>) -> Result<DVector<f64>> {
    if traj.is_empty() {
        return Err(GeoError::InsufficientSamples { t: 0.0, have: 0 });
    }
    let start = &traj.first().state;
    let dim = space.dim();
    let mut y = pack(start);
    y.extend_from_slice(v0.as_slice());
    let opts = IntegrateOptions::default();
    let out = drive(space, y, start.chart, traj.t_start(), traj.t_end(), &opts, |_, _, _| {})?;
    let mut y = out.y;
    let mut chart = out.chart;
    let end = &traj.last().state;
    space.express_near_packed(&mut y, &mut chart, end.point.as_slice(), end.chart);
    Ok(DVector::from_column_slice(&y[2 * dim..3 * dim]))
}

/// Finite-difference geodesic residual at a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub t: f64,
    /// Estimated `γ̈ + Γ(γ̇, γ̇)`.
    #[serde(with = "crate::state::dvec")]
    pub acceleration: DVector<f64>,
    /// Estimated `γ̇` from positions minus the recorded velocity.
    #[serde(with = "crate::state::dvec")]
    pub kinematic: DVector<f64>,
}

impl Residual {
    pub fn norm(&self) -> f64 {
        (self.acceleration.norm_squared() + self.kinematic.norm_squared()).sqrt()
    }
}

/// Check the geodesic equation at the interior sample nearest `t`.
///
/// The sample and its two neighbours determine a quintic through their
/// positions and velocities, whose second derivative estimates `γ̈`, and a
/// quartic through the positions and the outer velocities, whose slope at the
/// centre is compared with the recorded velocity.
pub fn geodesic_residual(space: &Space, traj: &Trajectory, t: f64) -> Result<Residual> {
    let have = traj.len();
    if have < 3 || !(t >= traj.t_start() && t <= traj.t_end()) {
        return Err(GeoError::InsufficientSamples { t, have });
    }
    let i = traj.nearest(t).clamp(1, have - 2);
    let c = &traj.samples[i];
    let x0 = c.state.point.as_slice();
    let near = |j: usize| space.express_near(&traj.samples[j].state, x0, c.state.chart);
    let (lo, hi) = (near(i - 1), near(i + 1));
    let tau_m = traj.samples[i - 1].t - c.t;
    let tau_p = traj.samples[i + 1].t - c.t;
    let scale = tau_m.abs().max(tau_p.abs());
    let (sm, sp) = (tau_m / scale, tau_p / scale);
    let n = space.dim();

    let row = |s: f64, deriv: bool, deg: usize| -> Vec<f64> {
        (0..=deg)
            .map(|p| {
                if deriv {
                    if p == 0 {
                        0.0
                    } else {
                        p as f64 * s.powi(p as i32 - 1)
                    }
                } else {
                    s.powi(p as i32)
                }
            })
            .collect()
    };

    // quintic through positions and velocities
    let rows = [
        row(sm, false, 5),
        row(0.0, false, 5),
        row(sp, false, 5),
        row(sm, true, 5),
        row(0.0, true, 5),
        row(sp, true, 5),
    ];
    let m5 = DMatrix::from_fn(6, 6, |r, col| rows[r][col]);
    // quartic through positions and the outer velocities
    let rows4 = [
        row(sm, false, 4),
        row(0.0, false, 4),
        row(sp, false, 4),
        row(sm, true, 4),
        row(sp, true, 4),
    ];
    let m4 = DMatrix::from_fn(5, 5, |r, col| rows4[r][col]);

    let mut acc = DVector::zeros(n);
    let mut vel = DVector::zeros(n);
    for k in 0..n {
        let rhs5 = DVector::from_vec(vec![
            lo.point[k] - x0[k],
            0.0,
            hi.point[k] - x0[k],
            lo.velocity[k] * scale,
            c.state.velocity[k] * scale,
            hi.velocity[k] * scale,
        ]);
        let c5 = solve(m5.clone(), &rhs5).ok_or(GeoError::InsufficientSamples { t, have })?;
        acc[k] = 2.0 * c5[2] / (scale * scale);
        let rhs4 = DVector::from_vec(vec![
            lo.point[k] - x0[k],
            0.0,
            hi.point[k] - x0[k],
            lo.velocity[k] * scale,
            hi.velocity[k] * scale,
        ]);
        let c4 = solve(m4.clone(), &rhs4).ok_or(GeoError::InsufficientSamples { t, have })?;
        vel[k] = c4[1] / scale;
    }
    let mut gamma = vec![0.0; n];
    let v0 = c.state.velocity.as_slice();
    space.gamma_contract(x0, v0, v0, &mut gamma);
    let acceleration = acc + DVector::from_vec(gamma);
    let kinematic = vel - &c.state.velocity;
    Ok(Residual {
        t: c.t,
        acceleration,
        kinematic,
    })
}

fn hermite5(s: f64) -> ([f64; 6], [f64; 6]) {
    let (s2, s3, s4, s5) = (s * s, s * s * s, s.powi(4), s.powi(5));
    let h = [
        1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5,
        s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5,
        0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5,
        0.5 * s3 - s4 + 0.5 * s5,
        -4.0 * s3 + 7.0 * s4 - 3.0 * s5,
        10.0 * s3 - 15.0 * s4 + 6.0 * s5,
    ];
    let d = [
        -30.0 * s2 + 60.0 * s3 - 30.0 * s4,
        1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4,
        s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4,
        1.5 * s2 - 4.0 * s3 + 2.5 * s4,
        -12.0 * s2 + 28.0 * s3 - 15.0 * s4,
        30.0 * s2 - 60.0 * s3 + 30.0 * s4,
    ];
    (h, d)
}

impl Trajectory {
    /// Dense output between samples by quintic Hermite interpolation of
    /// positions, velocities and the accelerations `−Γ(v, v)`.
    pub fn state_at(&self, space: &Space, t: f64) -> Result<GeodesicState> {
        let have = self.len();
        if have == 0 || !(t >= self.t_start() && t <= self.t_end()) {
            return Err(GeoError::InsufficientSamples { t, have });
        }
        if have == 1 {
            return Ok(self.samples[0].state.clone());
        }
        let i = self.bracket(t);
        let a = &self.samples[i];
        let b = &self.samples[i + 1];
        let s0 = &a.state;
        let s1 = space.express_near(&b.state, s0.point.as_slice(), s0.chart);
        let h = b.t - a.t;
        if h <= 0.0 {
            return Ok(s0.clone());
        }
        let n = space.dim();
        let (mut a0, mut a1) = (vec![0.0; n], vec![0.0; n]);
        space.gamma_contract(
            s0.point.as_slice(),
            s0.velocity.as_slice(),
            s0.velocity.as_slice(),
            &mut a0,
        );
        space.gamma_contract(
            s1.point.as_slice(),
            s1.velocity.as_slice(),
            s1.velocity.as_slice(),
            &mut a1,
        );
        let (hb, db) = hermite5((t - a.t) / h);
        let mut x = DVector::zeros(n);
        let mut v = DVector::zeros(n);
        for k in 0..n {
            let coeff = [
                s0.point[k],
                h * s0.velocity[k],
                -h * h * a0[k],
                -h * h * a1[k],
                h * s1.velocity[k],
                s1.point[k],
            ];
            x[k] = (0..6).map(|j| hb[j] * coeff[j]).sum();
            v[k] = (0..6).map(|j| db[j] * coeff[j]).sum::<f64>() / h;
        }
        let s = GeodesicState::new(x, v).with_chart(s0.chart);
        Ok(space.normalize_state(&s))
    }
}

/// Maximum residual norm over all interior samples.
pub fn max_residual(space: &Space, traj: &Trajectory) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 1..traj.len().saturating_sub(1) {
        worst = worst.max(geodesic_residual(space, traj, traj.samples[i].t)?.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{PI, TAU};

    fn space(s: &str) -> Space {
        s.parse().unwrap()
    }

    #[test]
    fn hermite_basis_reproduces_quintics() {
        let p = |t: f64| 1.0 + 2.0 * t - t * t + 0.5 * t.powi(3) - 0.25 * t.powi(4) + 0.1 * t.powi(5);
        let dp = |t: f64| 2.0 - 2.0 * t + 1.5 * t * t - t.powi(3) + 0.5 * t.powi(4);
        let ddp = |t: f64| -2.0 + 3.0 * t - 3.0 * t * t + 2.0 * t.powi(3);
        let coeff = [p(0.0), dp(0.0), ddp(0.0), ddp(1.0), dp(1.0), p(1.0)];
        for s in [0.0, 0.3, 0.77, 1.0] {
            let (h, d) = hermite5(s);
            let val: f64 = (0..6).map(|j| h[j] * coeff[j]).sum();
            let der: f64 = (0..6).map(|j| d[j] * coeff[j]).sum();
            assert_relative_eq!(val, p(s), epsilon = 1e-13);
            assert_relative_eq!(der, dp(s), epsilon = 1e-13);
        }
    }

    #[test]
    fn christoffel_is_symmetric_and_flat_is_zero() {
        let e = space("euclidean2");
        let g = christoffel_at(&e, &DVector::from_vec(vec![0.3, -1.2])).unwrap();
        assert!(g.as_slice().iter().all(|c| *c == 0.0));
        let k = space("klein2");
        let g = christoffel_at(&k, &DVector::from_vec(vec![0.5, 0.0])).unwrap();
        assert_relative_eq!(g.get(0, 0, 0), 4.0 / 3.0, epsilon = 1e-15);
        assert_eq!(g.get(0, 1, 1), 0.0);
        assert_relative_eq!(g.get(1, 0, 1), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(g.get(1, 0, 1), g.get(1, 1, 0));
        assert!(matches!(
            christoffel_at(&k, &DVector::from_vec(vec![1.0, 0.0])),
            Err(GeoError::OutOfChart { .. })
        ));
    }

    #[test]
    fn euclidean_line() {
        let e = space("euclidean2");
        let tr = integrate(&e, &GeodesicState::from_slices(&[0.0, 0.0], &[1.0, 0.0]), 1.0, 1e-9).unwrap();
        let end = &tr.last().state;
        assert_eq!(tr.t_end(), 1.0);
        assert_relative_eq!(end.point[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(end.velocity[0], 1.0, epsilon = 1e-12);
        assert!(!tr.truncated);
    }

    #[test]
    fn klein_unit_speed_geodesic_is_tanh() {
        let k = space("klein2");
        let tr = integrate(&k, &GeodesicState::from_slices(&[0.0, 0.0], &[1.0, 0.0]), 3.0, 1e-10).unwrap();
        for smp in &tr.samples {
            assert_relative_eq!(smp.state.point[0], smp.t.tanh(), epsilon = 1e-8);
            assert_eq!(smp.state.point[1], 0.0);
        }
    }

    #[test]
    fn klein_far_out_truncates_or_finishes_inside() {
        let k = space("klein2");
        let tr = integrate(&k, &GeodesicState::from_slices(&[0.0, 0.0], &[1.0, 0.0]), 40.0, 1e-9).unwrap();
        assert!(tr.samples.iter().all(|s| s.state.point[0] < 1.0));
        assert!(tr
            .samples
            .windows(2)
            .all(|w| w[1].state.point[0] >= w[0].state.point[0]));
    }

    #[test]
    fn great_circle_returns_after_two_pi() {
        let s2 = space("sphere2");
        // equator in chart 0 is the unit circle; unit speed there is |w'| = 1
        let s0 = GeodesicState::from_slices(&[1.0, 0.0], &[0.0, 1.0]);
        let tr = integrate(&s2, &s0, TAU, 1e-10).unwrap();
        let end = s2.express_near(&tr.last().state, &[1.0, 0.0], 0);
        assert_relative_eq!(end.point, s0.point, epsilon = 1e-7);
        assert_relative_eq!(end.velocity, s0.velocity, epsilon = 1e-7);
    }

    #[test]
    fn backward_integration_has_increasing_samples() {
        let k = space("klein2");
        let tr = integrate(&k, &GeodesicState::from_slices(&[0.1, 0.2], &[0.3, 0.1]), -2.0, 1e-9).unwrap();
        assert!(tr.samples.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!(tr.t_start(), -2.0);
        assert_eq!(tr.t_end(), 0.0);
    }

    #[test]
    fn residuals_detect_corruption() {
        let e = space("euclidean2");
        let mut tr = integrate(&e, &GeodesicState::from_slices(&[0.0, 1.0], &[1.0, 0.5]), 1.0, 1e-9).unwrap();
        assert!(geodesic_residual(&e, &tr, 0.5).unwrap().norm() < 1e-8);
        let i = tr.nearest(0.5);
        tr.samples[i].state.velocity *= 1.1;
        assert!(geodesic_residual(&e, &tr, tr.samples[i].t).unwrap().norm() > 1e-3);
        let short = Trajectory {
            samples: tr.samples[..2].to_vec(),
            ..tr.clone()
        };
        assert!(matches!(
            geodesic_residual(&e, &short, 0.0),
            Err(GeoError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn exp_and_log_in_klein() {
        let k = space("klein2");
        let o = DVector::from_vec(vec![0.0, 0.0]);
        let x = exp_map(&k, &o, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_relative_eq!(x[0], 1f64.tanh(), epsilon = 1e-9);
        let v = log_map(&k, &o, &DVector::from_vec(vec![0.5, 0.0])).unwrap();
        assert_relative_eq!(v[0], 0.5f64.atanh(), epsilon = 1e-8);
        assert!(v[1].abs() < 1e-9);
        assert_eq!(log_map(&k, &o, &o).unwrap(), o);
        let far = log_map(
            &k,
            &DVector::from_vec(vec![-0.9, 0.0]),
            &DVector::from_vec(vec![0.9, 0.0]),
        )
        .unwrap();
        // hyperbolic length 2·atanh(0.9), chart speed scaled by 1 − 0.81
        assert_relative_eq!(far[0], 2.0 * 0.9f64.atanh() * 0.19, epsilon = 1e-7);
    }

    #[test]
    fn log_needs_a_pole() {
        let s2 = space("sphere2");
        let p = DVector::from_vec(vec![0.0, 0.1]);
        assert!(log_map(&s2, &p, &p).is_err());
    }

    #[test]
    fn sphere_holonomy_of_octant_triangle() {
        // start at the north pole (chart 0 origin), go down a meridian to the
        // equator, along the equator a quarter turn, and back up
        let s2 = space("sphere2");
        let e1 = DVector::from_vec(vec![0.5, 0.0]);
        let mut state = GeodesicState::from_slices(&[0.0, 0.0], &[0.5, 0.0]);
        let mut w = vec![e1.clone()];
        let opts = IntegrateOptions::with_tol(1e-11);
        for _ in 0..3 {
            let (end, ws, _) = transport_with(&s2, &state, PI / 2.0, &w, &opts).unwrap();
            // turn left by a right angle at the vertex
            let u = end.velocity.clone();
            let turned = DVector::from_vec(vec![-u[1], u[0]]);
            state = GeodesicState::new(end.point.clone(), turned).with_chart(end.chart);
            w = ws;
        }
        let back = s2.express_near(
            &GeodesicState::new(state.point.clone(), w[0].clone()).with_chart(state.chart),
            &[0.0, 0.0],
            0,
        );
        assert!(back.point.norm() < 1e-8);
        let lam = 2.0;
        let wv = &back.velocity * lam;
        let angle = wv[1].atan2(wv[0]);
        assert_relative_eq!(angle.abs(), PI / 2.0, epsilon = 1e-6);
        assert_relative_eq!(wv.norm(), 1.0, epsilon = 1e-8);
    }
}
