//! Skies, feet, the first law of cosines and geodesic connectedness.
//!
//! The sky of `x` is the set of geodesics through `x`; in the TS chart of
//! G⁺(M) (flat ℝⁿ, Klein) it is a section `d ↦ (d, offset_x(d))` of the
//! bundle over the direction sphere. Two points are joined by a geodesic
//! exactly where their sections agree, which is what the root finder looks
//! for.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::connection::{exp_state, IntegrateOptions};
use crate::error::{GeoError, Result};
use crate::geodesic_space::{canonicalize, canonicalize_tracked, chart_ts, GeodesicClass, TSPoint};
use crate::linalg::{complement_basis, dot, solve};
use crate::quad;
use crate::rng::SampleRng;
use crate::spaces::{sphere, Factor, Model, Space};
use crate::state::GeodesicState;

/// The section `h_x` of the TS chart given by the sky of `x`.
#[derive(Debug, Clone)]
pub struct SkySection {
    pub base_point: DVector<f64>,
    pub space_id: String,
    space: Space,
}

impl SkySection {
    /// The TS-chart point of the oriented geodesic through the base point
    /// with chart direction `d`.
    pub fn evaluate(&self, d: &DVector<f64>) -> Result<TSPoint> {
        let c = canonicalize(
            &self.space,
            &GeodesicState::new(self.base_point.clone(), d.clone()),
            true,
        )?;
        chart_ts(&self.space, &c)
    }
}

pub fn sky(space: &Space, x: &DVector<f64>) -> Result<SkySection> {
    space.check_point(x.as_slice(), 0)?;
    if !space.is_chordal() {
        return Err(GeoError::UnsupportedChart {
            chart: "ts".into(),
            space: space.id(),
        });
    }
    Ok(SkySection {
        base_point: x.clone(),
        space_id: space.id(),
        space: space.clone(),
    })
}

fn start_directions(n: usize, count: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(count);
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut d = DVector::zeros(n);
            d[i] = s;
            out.push(d);
        }
    }
    // fixed stream so the start grid is reproducible
    let mut rng = SampleRng::new(0x5eed_5ca1ab1e);
    while out.len() < count {
        out.push(rng.direction(n));
    }
    out.truncate(count.max(1));
    out
}

/// Default number of Newton starts on the direction sphere.
pub fn default_starts(n: usize) -> usize {
    2 * n + 8
}

/// Directions `d` where the skies of `x` and `z` meet: the oriented
/// geodesics through both points. Multi-start damped Gauss–Newton on the
/// unit sphere, using the tangent plane at the current iterate as local
/// coordinates and normalization as the retraction.
pub fn sky_difference_roots(
    space: &Space,
    x: &DVector<f64>,
    z: &DVector<f64>,
    n_starts: usize,
) -> Result<Vec<DVector<f64>>> {
    let hx = sky(space, x)?;
    let hz = sky(space, z)?;
    if x == z {
        return Err(GeoError::BadParams("sky intersection needs distinct points".into()));
    }
    let n = space.dim();
    let residual = |d: &DVector<f64>| -> Result<DVector<f64>> { Ok(hx.evaluate(d)?.offset - hz.evaluate(d)?.offset) };
    let mut roots: Vec<DVector<f64>> = Vec::new();
    if n == 1 {
        for d in start_directions(1, 2) {
            if residual(&d)?.norm() < 1e-8 {
                roots.push(d);
            }
        }
        return if roots.is_empty() {
            Err(GeoError::NoRootFound { starts: 2 })
        } else {
            Ok(roots)
        };
    }
    for d0 in start_directions(n, n_starts) {
        let mut d = d0;
        let mut r = residual(&d)?;
        let mut rn = r.norm();
        for _ in 0..60 {
            if rn < 1e-14 {
                break;
            }
            let basis = complement_basis(&d);
            let h = 1e-7;
            let mut jac = DMatrix::zeros(n, n - 1);
            for (j, b) in basis.iter().enumerate() {
                let dj = (&d + b * h).normalize();
                jac.set_column(j, &((residual(&dj)? - &r) / h));
            }
            let jt = jac.transpose();
            let Some(step) = solve(&jt * &jac, &(-(&jt * &r))) else {
                break;
            };
            let mut lambda = 1.0;
            let mut moved = false;
            for _ in 0..20 {
                let mut trial = d.clone();
                for (j, b) in basis.iter().enumerate() {
                    trial += b * (lambda * step[j]);
                }
                let trial = trial.normalize();
                let rt = residual(&trial)?;
                if rt.norm() < rn {
                    d = trial;
                    r = rt;
                    rn = r.norm();
                    moved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if rn < 1e-8 && !roots.iter().any(|e| (e - &d).norm() < 1e-6) {
            roots.push(d);
        }
    }
    if roots.is_empty() {
        return Err(GeoError::NoRootFound { starts: n_starts });
    }
    roots.sort_by(|a, b| {
        a.as_slice()
            .partial_cmp(b.as_slice())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(roots)
}

/// Length of the chart segment from `a` to `b` in the factor's metric (the
/// geodesic distance for flat and Klein factors, whose geodesics are chords).
fn chord_length(model: Model, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
    let len = dot(&diff, &diff).sqrt();
    if model != Model::Klein || len == 0.0 {
        return len;
    }
    let speed = |s: f64| {
        let x: Vec<f64> = a.iter().zip(&diff).map(|(p, d)| p + s * d).collect();
        let k = 1.0 / (1.0 - dot(&x, &x));
        (k * len * len + k * k * dot(&x, &diff).powi(2)).sqrt()
    };
    quad::integrate(speed, 0.0, 1.0, 1e-14)
}

/// Geodesic distance between two points of a space whose factors all have
/// poles (flat ℝⁿ, Klein and their products).
pub fn distance(space: &Space, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    space.check_point(a.as_slice(), 0)?;
    space.check_point(b.as_slice(), 0)?;
    if !space.has_pole() {
        return Err(GeoError::BadParams(format!("no distance routine for {}", space.id())));
    }
    let total: f64 = space
        .factors()
        .iter()
        .map(|f| chord_length(f.model, &a.as_slice()[f.range()], &b.as_slice()[f.range()]).powi(2))
        .sum();
    Ok(total.sqrt())
}

/// Foot of a point on a geodesic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Foot {
    #[serde(with = "crate::state::dvec")]
    pub point: DVector<f64>,
    /// Unit velocity of the geodesic at the foot.
    #[serde(with = "crate::state::dvec")]
    pub velocity: DVector<f64>,
    /// Parameter of the foot along the class representative.
    pub t: f64,
    pub distance: f64,
    /// `|g(γ̇, u)|` with `u` the unit direction from the foot towards `p`.
    pub orthogonality: f64,
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, width: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if hi - lo <= width {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// The closest point to `p` on the geodesic `c` in a Hadamard space:
/// golden-section bracketing of the distance along the geodesic parameter,
/// then secant polishing of its derivative.
pub fn foot(space: &Space, p: &DVector<f64>, c: &GeodesicClass) -> Result<Foot> {
    if !space.is_hadamard() {
        return Err(GeoError::BadParams(format!("{} is not a Hadamard space", space.id())));
    }
    space.check_point(p.as_slice(), 0)?;
    let rep = space.unit_state(&c.rep)?;
    let at = |t: f64| exp_state(space, &rep, t);
    let dist = |t: f64| -> f64 {
        match at(t) {
            Ok(s) => distance(space, p, &s.point).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    };
    // bracket the convex distance function around its minimum
    let d0 = dist(0.0);
    let mut step = 0.25f64.max(d0);
    let (mut lo, mut hi) = (-step, step);
    for _ in 0..60 {
        let (fl, fh) = (dist(lo), dist(hi));
        let grow_lo = fl <= d0;
        let grow_hi = fh <= d0;
        if !grow_lo && !grow_hi {
            break;
        }
        step *= 2.0;
        if grow_lo {
            lo = -step;
        }
        if grow_hi {
            hi = step;
        }
    }
    if !(dist(lo).is_finite() || dist(hi).is_finite()) {
        return Err(GeoError::MinimizationDiverged(
            "distance undefined on the bracket".into(),
        ));
    }
    let mut t = golden_min(dist, lo, hi, 1e-9);
    let mut d = dist(t);
    if d > 1e-7 {
        let h = 1e-5;
        let deriv = |t: f64| (dist(t + h) - dist(t - h)) / (2.0 * h);
        let (mut t0, mut t1) = (t - 1e-4, t);
        let (mut g0, mut g1) = (deriv(t0), deriv(t1));
        for _ in 0..30 {
            if g1.abs() < 1e-12 || g1 == g0 {
                break;
            }
            let t2 = t1 - g1 * (t1 - t0) / (g1 - g0);
            if !t2.is_finite() || (t2 - t1).abs() > 1e-2 {
                break;
            }
            (t0, g0) = (t1, g1);
            t1 = t2;
            g1 = deriv(t1);
        }
        let d1 = dist(t1);
        if d1 <= d {
            t = t1;
            d = d1;
        }
    }
    if !d.is_finite() {
        return Err(GeoError::MinimizationDiverged("no finite minimum".into()));
    }
    let s = at(t)?;
    let orthogonality = orthogonality(space, &s, p)?;
    Ok(Foot {
        point: s.point,
        velocity: s.velocity,
        t,
        distance: d,
        orthogonality,
    })
}

fn orthogonality(space: &Space, s: &GeodesicState, p: &DVector<f64>) -> Result<f64> {
    let q = s.point.as_slice();
    let u = if space.is_chordal() {
        // geodesics are chords, so the initial direction towards p is p − q
        p - &s.point
    } else {
        crate::connection::log_map(space, &s.point, p)?
    };
    let un = space.speed(q, u.as_slice());
    if un < 1e-12 {
        return Ok(0.0);
    }
    Ok(space.inner(q, s.velocity.as_slice(), u.as_slice()).abs() / un)
}

/// One geodesic joining two points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    /// Oriented class, pointing from the first point to the second.
    pub class: GeodesicClass,
    /// Parameters along the class representative at the two endpoints.
    pub t_x: f64,
    pub t_z: f64,
    /// Unit velocity at the first point.
    pub velocity: GeodesicState,
    /// Endpoint miss `|exp_x((t_z − t_x) v̂) − z|` measured by integration.
    pub residual: f64,
}

impl Connection {
    pub fn length(&self) -> f64 {
        self.t_z - self.t_x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectOptions {
    /// Lifts (or extra turns) enumerated in each direction for spaces with
    /// infinitely many connections.
    pub windings: u32,
    pub n_starts: Option<usize>,
}

impl Default for ConnectOptions {
    fn default() -> Self {
        ConnectOptions {
            windings: 2,
            n_starts: None,
        }
    }
}

fn factor_space(f: &Factor) -> Result<Space> {
    use crate::spaces::SpaceSpec as S;
    let spec = match f.model {
        Model::Euclidean => S::Euclidean(f.dim),
        Model::PseudoEuclidean { negative } => S::PseudoEuclidean(f.dim, negative),
        Model::Klein => S::KleinHyperbolic(f.dim),
        _ => return Err(GeoError::BadParams("not a chordal factor".into())),
    };
    Space::new(spec)
}

/// Initial velocities at `x` of the geodesics reaching `z` at time 1, for a
/// single factor.
fn factor_velocities(
    f: &Factor,
    x: &[f64],
    xc: u32,
    z: &[f64],
    zc: u32,
    opts: &ConnectOptions,
) -> Result<Vec<Vec<f64>>> {
    let w = opts.windings as i64;
    if f.model.is_flat() && !matches!(f.model, Model::Euclidean | Model::PseudoEuclidean { .. }) {
        let cover_lifts: Vec<Vec<f64>> = match f.model {
            Model::Cylinder => {
                let base = z[1] + TAU * ((x[1] - z[1]) / TAU).round();
                (-w..=w).map(|k| vec![z[0], base + TAU * k as f64]).collect()
            }
            Model::Circle => {
                let base = z[0] + TAU * ((x[0] - z[0]) / TAU).round();
                (-w..=w).map(|k| vec![base + TAU * k as f64]).collect()
            }
            Model::Torus => {
                let b0 = z[0] + TAU * ((x[0] - z[0]) / TAU).round();
                let b1 = z[1] + TAU * ((x[1] - z[1]) / TAU).round();
                let mut v = Vec::new();
                for i in -w..=w {
                    for j in -w..=w {
                        v.push(vec![b0 + TAU * i as f64, b1 + TAU * j as f64]);
                    }
                }
                v
            }
            Model::Mobius => {
                let k0 = (x[0] - z[0]).round() as i64;
                (k0 - w..=k0 + w)
                    .map(|k| {
                        let y = if k.rem_euclid(2) == 1 { -z[1] } else { z[1] };
                        vec![z[0] + k as f64, y]
                    })
                    .collect()
            }
            Model::Strip => vec![z.to_vec()],
            _ => unreachable!("flat quotient models"),
        };
        return Ok(cover_lifts
            .into_iter()
            .map(|l| l.iter().zip(x).map(|(a, b)| a - b).collect::<Vec<f64>>())
            .filter(|v| v.iter().any(|c| *c != 0.0))
            .collect());
    }
    match f.model {
        Model::Euclidean | Model::PseudoEuclidean { .. } | Model::Klein => {
            let fs = factor_space(f)?;
            let (xv, zv) = (DVector::from_column_slice(x), DVector::from_column_slice(z));
            if xv == zv {
                return Ok(vec![]);
            }
            let starts = opts.n_starts.unwrap_or_else(|| default_starts(f.dim));
            let roots = sky_difference_roots(&fs, &xv, &zv, starts)?;
            let toward = &zv - &xv;
            let len = chord_length(f.model, x, z);
            // one orientation per unoriented root pair: the one heading to z
            Ok(roots
                .into_iter()
                .filter(|d| d.dot(&toward) > 0.0)
                .map(|d| {
                    let speed = fs.speed(x, d.as_slice());
                    (d * (len / speed)).as_slice().to_vec()
                })
                .collect())
        }
        Model::Sphere { .. } | Model::Projective { .. } => {
            let projective = matches!(f.model, Model::Projective { .. });
            let wx = Vector2::new(x[0], x[1]);
            let qx = sphere::to_ambient(xc, wx);
            let qz = sphere::to_ambient(zc, Vector2::new(z[0], z[1]));
            let mut arcs: Vec<(Vector3<f64>, f64)> = Vec::new();
            let cross = qx.cross(&qz);
            let great_circles: Vec<Vector3<f64>> = if cross.norm() > 1e-9 {
                vec![cross.normalize()]
            } else {
                // antipodal or coincident points: a fixed pencil of circles
                let basis = complement_basis(&DVector::from_column_slice(qx.as_slice()));
                basis
                    .iter()
                    .map(|b| qx.cross(&Vector3::new(b[0], b[1], b[2])).normalize())
                    .collect()
            };
            for n in great_circles {
                let e2 = n.cross(&qx);
                let theta = e2.dot(&qz).atan2(qx.dot(&qz)).rem_euclid(TAU);
                if projective {
                    let theta = theta.rem_euclid(PI);
                    for k in 0..=w {
                        let kf = k as f64 * PI;
                        if theta > 1e-12 || k > 0 {
                            arcs.push((e2, theta + kf));
                        }
                        arcs.push((-e2, PI - theta + kf));
                    }
                } else {
                    for k in 0..=w {
                        let kf = k as f64 * TAU;
                        if theta > 1e-12 || k > 0 {
                            arcs.push((e2, theta + kf));
                        }
                        arcs.push((-e2, TAU - theta + kf));
                    }
                }
            }
            Ok(arcs
                .into_iter()
                .map(|(dir, len)| {
                    let v = sphere::tangent_from_ambient(xc, qx, dir * len);
                    vec![v.x, v.y]
                })
                .collect())
        }
        _ => unreachable!("all models handled"),
    }
}

/// Geodesics joining `x` to `z` (both given with their chart labels).
///
/// Flat ℝⁿ and Klein factors use the sky-intersection root finder; flat
/// quotients enumerate straight lines to the lifts of `z` in the universal
/// cover; spheres enumerate the arcs of the great circle through both points,
/// with extra turns up to the winding cap. Products combine factor choices.
pub fn connect_states(
    space: &Space,
    x: &[f64],
    xc: u32,
    z: &[f64],
    zc: u32,
    opts: &ConnectOptions,
) -> Result<Vec<Connection>> {
    space.check_point(x, xc)?;
    space.check_point(z, zc)?;
    let n = space.dim();
    let mut combos: Vec<Vec<f64>> = vec![vec![0.0; n]];
    for f in space.factors() {
        let (xf, zf) = (&x[f.range()], &z[f.range()]);
        let same = if f.model.is_spherical() {
            (f.ambient(x, xc) - f.ambient(z, zc)).norm() < 1e-12
        } else {
            xf == zf
        };
        let mut options = factor_velocities(f, xf, f.chart(xc), zf, f.chart(zc), opts)?;
        if same {
            // this factor may stay put while the others move
            options.insert(0, vec![0.0; f.dim]);
        }
        let mut next = Vec::with_capacity(combos.len() * options.len());
        for c in &combos {
            for o in &options {
                let mut v = c.clone();
                v[f.range()].copy_from_slice(o);
                next.push(v);
            }
        }
        combos = next;
    }
    let mut out = Vec::new();
    for v in combos {
        let len = space.speed(x, &v);
        if !(len > 1e-14) {
            continue;
        }
        let unit = GeodesicState::from_slices(x, &v.iter().map(|c| c / len).collect::<Vec<_>>()).with_chart(xc);
        let end = match exp_state(space, &unit, len) {
            Ok(e) => e,
            Err(GeoError::Inextendible { .. }) | Err(GeoError::OutOfChart { .. }) => continue,
            Err(e) => return Err(e),
        };
        let residual = space.separation(end.point.as_slice(), end.chart, z, zc);
        if residual > 1e-6 {
            continue;
        }
        let (class, t_x) = canonicalize_tracked(space, &unit, true)?;
        out.push(Connection {
            class,
            t_x,
            t_z: t_x + len,
            velocity: unit,
            residual,
        });
    }
    if out.is_empty() {
        return Err(GeoError::NoConnectionFound);
    }
    Ok(out)
}

pub fn connect(space: &Space, x: &DVector<f64>, z: &DVector<f64>, opts: &ConnectOptions) -> Result<Vec<Connection>> {
    if x == z {
        return Err(GeoError::BadParams("connect needs distinct points".into()));
    }
    connect_states(space, x.as_slice(), 0, z.as_slice(), 0, opts)
}

/// Sides and angle of a geodesic triangle, with the slack of the first law
/// of cosines `a3² ≥ a1² + a2² − 2·a1·a2·cos α3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstLaw {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// Angle at the vertex shared by the sides `a1` and `a2`.
    pub alpha3: f64,
    pub slack: f64,
}

fn shortest(cs: Vec<Connection>) -> Connection {
    cs.into_iter()
        .min_by(|a, b| a.length().total_cmp(&b.length()))
        .expect("connect returns at least one connection")
}

/// Triangle at `x` with sides `a1 = d(x, y)`, `a2 = d(x, z)` and opposite
/// side `a3 = d(y, z)`, each realised by the shortest connection.
pub fn triangle_first_law(space: &Space, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> Result<FirstLaw> {
    if !space.has_metric() {
        return Err(GeoError::BadParams(format!("{} has no metric", space.id())));
    }
    let opts = ConnectOptions {
        windings: 0,
        n_starts: None,
    };
    let c1 = shortest(connect(space, x, y, &opts)?);
    let c2 = shortest(connect(space, x, z, &opts)?);
    let c3 = shortest(connect(space, y, z, &opts)?);
    let (a1, a2, a3) = (c1.length(), c2.length(), c3.length());
    let cos = space
        .inner(
            x.as_slice(),
            c1.velocity.velocity.as_slice(),
            c2.velocity.velocity.as_slice(),
        )
        .clamp(-1.0, 1.0);
    let slack = a3 * a3 - (a1 * a1 + a2 * a2 - 2.0 * a1 * a2 * cos);
    Ok(FirstLaw {
        a1,
        a2,
        a3,
        alpha3: cos.acos(),
        slack,
    })
}

/// Integration options used for connection residuals.
pub fn residual_options() -> IntegrateOptions {
    IntegrateOptions::default()
}
