//! Model spaces and the geodesic covering maps between them.

mod covering;
mod spec;
pub mod sphere;

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::linalg::dot;
use crate::rng::SampleRng;
use crate::state::GeodesicState;

pub use covering::{make_covering, CoveringKind, CoveringMap, Sheet, SheetCount, COVERING_NAMES};
pub use spec::{SpaceSpec, MAX_DIM};

/// Radius of the excluded ball around each puncture, in chart coordinates.
pub const PUNCTURE_RADIUS: f64 = 1e-12;

/// One irreducible building block of a (possibly product) space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum Model {
    Euclidean,
    PseudoEuclidean {
        negative: usize,
    },
    Klein,
    /// Round unit sphere in two stereographic charts.
    Sphere {
        punctured: bool,
    },
    /// Elliptic plane: chart 0 of the sphere modulo the antipodal map.
    Projective {
        punctured: bool,
    },
    Cylinder,
    Torus,
    Mobius,
    Strip,
    Circle,
}

impl Model {
    pub fn is_flat(self) -> bool {
        !matches!(self, Model::Klein | Model::Sphere { .. } | Model::Projective { .. })
    }

    fn has_metric(self) -> bool {
        !matches!(self, Model::PseudoEuclidean { .. })
    }

    /// Does the exponential map at every point reach every point exactly once?
    fn has_pole(self) -> bool {
        matches!(self, Model::Euclidean | Model::PseudoEuclidean { .. } | Model::Klein)
    }

    pub(crate) fn is_spherical(self) -> bool {
        matches!(self, Model::Sphere { .. } | Model::Projective { .. })
    }
}

/// A factor of the flattened product decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub model: Model,
    /// First coordinate index of this factor.
    pub offset: usize,
    pub dim: usize,
    /// Bit of [`GeodesicState::chart`] selecting the stereographic chart
    /// (sphere factors only).
    pub chart_bit: Option<u32>,
}

impl Factor {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.dim
    }

    pub fn chart(&self, chart: u32) -> u32 {
        self.chart_bit.map_or(0, |b| (chart >> b) & 1)
    }

    /// Ambient unit vector of a point of a spherical factor.
    pub fn ambient(&self, x: &[f64], chart: u32) -> Vector3<f64> {
        let o = self.offset;
        sphere::to_ambient(self.chart(chart), Vector2::new(x[o], x[o + 1]))
    }

    pub fn ambient_tangent(&self, x: &[f64], chart: u32, v: &[f64]) -> Vector3<f64> {
        let o = self.offset;
        sphere::tangent_to_ambient(
            self.chart(chart),
            Vector2::new(x[o], x[o + 1]),
            Vector2::new(v[o], v[o + 1]),
        )
    }
}

/// Coordinate identification making a chart into a quotient space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Identification {
    /// `x[axis] ~ x[axis] + period`.
    Periodic { axis: usize, period: f64 },
    /// `(x[axis], x[flip_axis]) ~ (x[axis] + period, -x[flip_axis])`.
    Glide { axis: usize, period: f64, flip_axis: usize },
    /// Stereographic chart transition on the coordinate pair starting at `axis`.
    StereoInversion { axis: usize, chart_bit: u32 },
    /// `w ~ -w/|w|²` on the coordinate pair starting at `axis`.
    AntipodalInversion { axis: usize },
}

/// A manifold with a torsion-free linear connection, given in coordinates.
///
/// Points carry an extra chart label (see [`GeodesicState::chart`]) which is
/// nonzero only for spaces built from the two-chart sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    spec: SpaceSpec,
    dim: usize,
    factors: Vec<Factor>,
    idents: Vec<Identification>,
}

pub fn make_space(spec: &SpaceSpec) -> Result<Space> {
    Space::new(spec.clone())
}

impl std::str::FromStr for Space {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Space> {
        Space::new(s.parse()?)
    }
}

fn push_factors(spec: &SpaceSpec, offset: &mut usize, bits: &mut u32, out: &mut Vec<Factor>) {
    let (model, dim) = match spec {
        SpaceSpec::Product(a, b) => {
            push_factors(a, offset, bits, out);
            push_factors(b, offset, bits, out);
            return;
        }
        SpaceSpec::Euclidean(n) => (Model::Euclidean, *n),
        SpaceSpec::PseudoEuclidean(n, q) => (Model::PseudoEuclidean { negative: *q }, *n),
        SpaceSpec::KleinHyperbolic(n) => (Model::Klein, *n),
        SpaceSpec::Sphere2 => (Model::Sphere { punctured: false }, 2),
        SpaceSpec::PuncturedSphere2 => (Model::Sphere { punctured: true }, 2),
        SpaceSpec::ProjectivePlane => (Model::Projective { punctured: false }, 2),
        SpaceSpec::PuncturedProjectivePlane => (Model::Projective { punctured: true }, 2),
        SpaceSpec::Cylinder => (Model::Cylinder, 2),
        SpaceSpec::FlatTorus => (Model::Torus, 2),
        SpaceSpec::FlatMobius => (Model::Mobius, 2),
        SpaceSpec::FlatStrip => (Model::Strip, 2),
        SpaceSpec::Circle => (Model::Circle, 1),
    };
    let chart_bit = if matches!(model, Model::Sphere { .. }) {
        *bits += 1;
        Some(*bits - 1)
    } else {
        None
    };
    out.push(Factor {
        model,
        offset: *offset,
        dim,
        chart_bit,
    });
    *offset += dim;
}

impl Space {
    pub fn new(spec: SpaceSpec) -> Result<Space> {
        spec.validate()?;
        let mut factors = Vec::new();
        let (mut offset, mut bits) = (0, 0);
        push_factors(&spec, &mut offset, &mut bits, &mut factors);
        if bits > 16 {
            return Err(GeoError::BadParams("too many sphere factors".into()));
        }
        let mut idents = Vec::new();
        for f in &factors {
            let o = f.offset;
            match f.model {
                Model::Cylinder => idents.push(Identification::Periodic {
                    axis: o + 1,
                    period: TAU,
                }),
                Model::Torus => {
                    idents.push(Identification::Periodic { axis: o, period: TAU });
                    idents.push(Identification::Periodic {
                        axis: o + 1,
                        period: TAU,
                    });
                }
                Model::Circle => idents.push(Identification::Periodic { axis: o, period: TAU }),
                Model::Mobius => idents.push(Identification::Glide {
                    axis: o,
                    period: 1.0,
                    flip_axis: o + 1,
                }),
                Model::Sphere { .. } => idents.push(Identification::StereoInversion {
                    axis: o,
                    chart_bit: f.chart_bit.expect("sphere factors carry a chart bit"),
                }),
                Model::Projective { .. } => idents.push(Identification::AntipodalInversion { axis: o }),
                _ => {}
            }
        }
        Ok(Space {
            dim: offset,
            spec,
            factors,
            idents,
        })
    }

    pub fn spec(&self) -> &SpaceSpec {
        &self.spec
    }

    /// Canonical textual name, e.g. `klein_hyperbolic(2)`.
    pub fn id(&self) -> String {
        self.spec.to_string()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn identifications(&self) -> &[Identification] {
        &self.idents
    }

    pub fn has_metric(&self) -> bool {
        self.factors.iter().all(|f| f.model.has_metric())
    }

    pub fn is_flat(&self) -> bool {
        self.factors.iter().all(|f| f.model.is_flat())
    }

    pub fn is_hadamard(&self) -> bool {
        self.factors
            .iter()
            .all(|f| matches!(f.model, Model::Euclidean | Model::Klein))
    }

    /// Every point is a pole: `exp_p` is a diffeomorphism for all `p`.
    pub fn has_pole(&self) -> bool {
        self.factors.iter().all(|f| f.model.has_pole())
    }

    /// Every chord of the chart is a reparametrised geodesic and the chart is
    /// convex (flat ℝⁿ and the Klein model).
    pub fn is_chordal(&self) -> bool {
        self.factors.len() == 1 && self.factors[0].model.has_pole()
    }

    pub fn is_single(&self, model: Model) -> bool {
        self.factors.len() == 1 && self.factors[0].model == model
    }

    pub fn chart_count(&self) -> u32 {
        1 << self.factors.iter().filter(|f| f.chart_bit.is_some()).count()
    }

    pub fn in_chart(&self, x: &[f64], chart: u32) -> bool {
        if x.len() != self.dim || chart >= self.chart_count() || x.iter().any(|c| !c.is_finite()) {
            return false;
        }
        self.factors.iter().all(|f| {
            let y = &x[f.range()];
            match f.model {
                Model::Klein => dot(y, y) < 1.0,
                Model::Mobius | Model::Strip => y[1].abs() < 1.0,
                Model::Sphere { punctured: true } => dot(y, y).sqrt() > PUNCTURE_RADIUS,
                Model::Projective { punctured: true } => {
                    let r = dot(y, y).sqrt();
                    r > PUNCTURE_RADIUS && r < 1.0 / PUNCTURE_RADIUS
                }
                _ => true,
            }
        })
    }

    /// Does the chart segment from `a` to `b` run through a puncture? The
    /// integrator checks each accepted step, since a step can jump over the
    /// tiny excluded ball.
    pub fn segment_hits_puncture(&self, a: &[f64], b: &[f64]) -> bool {
        self.factors.iter().any(|f| {
            if !matches!(
                f.model,
                Model::Sphere { punctured: true } | Model::Projective { punctured: true }
            ) {
                return false;
            }
            let r = f.range();
            let (p, q) = (&a[r.clone()], &b[r]);
            let d: Vec<f64> = q.iter().zip(p).map(|(x, y)| x - y).collect();
            let dd = dot(&d, &d);
            let s = if dd > 0.0 {
                (-dot(p, &d) / dd).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let closest: f64 = p.iter().zip(&d).map(|(x, e)| (x + s * e).powi(2)).sum::<f64>().sqrt();
            closest <= PUNCTURE_RADIUS
        })
    }

    pub fn check_point(&self, x: &[f64], chart: u32) -> Result<()> {
        if self.in_chart(x, chart) {
            Ok(())
        } else {
            Err(GeoError::OutOfChart {
                space: self.id(),
                point: x.to_vec(),
            })
        }
    }

    pub fn check_state(&self, s: &GeodesicState) -> Result<()> {
        if s.velocity.len() != self.dim || s.velocity.iter().any(|c| !c.is_finite()) {
            return Err(GeoError::BadParams(format!(
                "velocity must have {} finite components",
                self.dim
            )));
        }
        self.check_point(s.point.as_slice(), s.chart)
    }

    /// `out[k] = Γ^k_ij a^i b^j`, symmetric in `a` and `b`.
    pub fn gamma_contract(&self, x: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) {
        for f in &self.factors {
            let r = f.range();
            let (x, a, b) = (&x[r.clone()], &a[r.clone()], &b[r.clone()]);
            let out = &mut out[r];
            match f.model {
                Model::Klein => {
                    let s = 1.0 / (1.0 - dot(x, x));
                    let (xa, xb) = (dot(x, a) * s, dot(x, b) * s);
                    for k in 0..x.len() {
                        out[k] = xa * b[k] + xb * a[k];
                    }
                }
                Model::Sphere { .. } | Model::Projective { .. } => {
                    // conformal metric λ²δ with ∇ log λ = -2w/(1+|w|²)
                    let s = -2.0 / (1.0 + x[0] * x[0] + x[1] * x[1]);
                    let g = [s * x[0], s * x[1]];
                    let (ga, gb, ab) = (dot(&g, a), dot(&g, b), dot(a, b));
                    for k in 0..2 {
                        out[k] = gb * a[k] + ga * b[k] - ab * g[k];
                    }
                }
                _ => out.fill(0.0),
            }
        }
    }

    /// Riemannian metric at `x`, when the space carries one.
    pub fn metric(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        if !self.has_metric() {
            return None;
        }
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for f in &self.factors {
            let o = f.offset;
            let y = &x[f.range()];
            match f.model {
                Model::Klein => {
                    let s = 1.0 / (1.0 - dot(y, y));
                    for i in 0..f.dim {
                        for j in 0..f.dim {
                            g[(o + i, o + j)] = s * s * y[i] * y[j] + if i == j { s } else { 0.0 };
                        }
                    }
                }
                Model::Sphere { .. } | Model::Projective { .. } => {
                    let lam = sphere::conformal_factor(Vector2::new(y[0], y[1]));
                    g[(o, o)] = lam * lam;
                    g[(o + 1, o + 1)] = lam * lam;
                }
                _ => {
                    for i in 0..f.dim {
                        g[(o + i, o + i)] = 1.0;
                    }
                }
            }
        }
        Some(g)
    }

    /// Metric inner product, or the chart-Euclidean one when there is no metric.
    pub fn inner(&self, x: &[f64], a: &[f64], b: &[f64]) -> f64 {
        if !self.has_metric() {
            return dot(a, b);
        }
        let mut total = 0.0;
        for f in &self.factors {
            let r = f.range();
            let (y, a, b) = (&x[r.clone()], &a[r.clone()], &b[r]);
            total += match f.model {
                Model::Klein => {
                    let s = 1.0 / (1.0 - dot(y, y));
                    s * dot(a, b) + s * s * dot(y, a) * dot(y, b)
                }
                Model::Sphere { .. } | Model::Projective { .. } => {
                    let lam = sphere::conformal_factor(Vector2::new(y[0], y[1]));
                    lam * lam * dot(a, b)
                }
                _ => dot(a, b),
            };
        }
        total
    }

    pub fn speed(&self, x: &[f64], v: &[f64]) -> f64 {
        self.inner(x, v, v).max(0.0).sqrt()
    }

    /// Rescale a state to unit speed under the normalization convention.
    pub fn unit_state(&self, s: &GeodesicState) -> Result<GeodesicState> {
        let speed = self.speed(s.point.as_slice(), s.velocity.as_slice());
        if !(speed > 0.0) || !speed.is_finite() {
            return Err(GeoError::BadParams("velocity must be nonzero".into()));
        }
        Ok(s.scaled(1.0 / speed))
    }

    /// Apply the identifications to a packed buffer `[x, v₁, …, v_m]` so that
    /// the point lies in its preferred fundamental domain or chart. Tangent
    /// vectors are carried by the Jacobian of each applied gluing map.
    pub fn normalize(&self, y: &mut [f64], chart: &mut u32) {
        for id in &self.idents {
            match *id {
                Identification::Periodic { axis, period } => {
                    let k = (y[axis] / period).floor();
                    if k != 0.0 {
                        y[axis] -= k * period;
                        if y[axis] >= period {
                            y[axis] -= period;
                        }
                    }
                }
                Identification::Glide {
                    axis,
                    period,
                    flip_axis,
                } => {
                    let k = (y[axis] / period).floor();
                    if k != 0.0 {
                        self.glide(y, axis, period, flip_axis, -k);
                    }
                }
                Identification::StereoInversion { axis, chart_bit } => {
                    if y[axis].hypot(y[axis + 1]) > sphere::SWITCH_RADIUS {
                        self.invert(y, axis, false);
                        *chart ^= 1 << chart_bit;
                    }
                }
                Identification::AntipodalInversion { axis } => {
                    if y[axis].hypot(y[axis + 1]) > sphere::SWITCH_RADIUS {
                        self.invert(y, axis, true);
                    }
                }
            }
        }
    }

    pub fn normalize_state(&self, s: &GeodesicState) -> GeodesicState {
        let mut y = pack(s);
        let mut chart = s.chart;
        self.normalize(&mut y, &mut chart);
        unpack(&y, self.dim, chart)
    }

    /// Re-express `s` by the gluing maps so that its point is as close as
    /// possible (in chart coordinates) to `reference`. Used to compare states
    /// across fundamental-domain walls and chart transitions.
    pub fn express_near(&self, s: &GeodesicState, reference: &[f64], reference_chart: u32) -> GeodesicState {
        let mut y = pack(s);
        let mut chart = s.chart;
        self.express_near_packed(&mut y, &mut chart, reference, reference_chart);
        unpack(&y, self.dim, chart)
    }

    pub fn express_near_packed(&self, y: &mut [f64], chart: &mut u32, reference: &[f64], reference_chart: u32) {
        for id in &self.idents {
            match *id {
                Identification::Periodic { axis, period } => {
                    let k = ((reference[axis] - y[axis]) / period).round();
                    y[axis] += k * period;
                }
                Identification::Glide {
                    axis,
                    period,
                    flip_axis,
                } => {
                    let k0 = ((reference[axis] - y[axis]) / period).round();
                    let cost = |k: f64| {
                        let dx = y[axis] + k * period - reference[axis];
                        let fy = if (k as i64).rem_euclid(2) == 1 {
                            -y[flip_axis]
                        } else {
                            y[flip_axis]
                        };
                        dx * dx + (fy - reference[flip_axis]).powi(2)
                    };
                    let k = [k0 - 1.0, k0, k0 + 1.0]
                        .into_iter()
                        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
                        .unwrap_or(k0);
                    if k != 0.0 {
                        self.glide(y, axis, period, flip_axis, k);
                    }
                }
                Identification::StereoInversion { axis, chart_bit } => {
                    let mine = (*chart >> chart_bit) & 1;
                    let theirs = (reference_chart >> chart_bit) & 1;
                    if mine != theirs && y[axis].hypot(y[axis + 1]) > PUNCTURE_RADIUS {
                        self.invert(y, axis, false);
                        *chart ^= 1 << chart_bit;
                    }
                }
                Identification::AntipodalInversion { axis } => {
                    let (u, v) = (y[axis], y[axis + 1]);
                    let r2 = u * u + v * v;
                    if r2 > PUNCTURE_RADIUS * PUNCTURE_RADIUS {
                        let (ru, rv) = (reference[axis], reference[axis + 1]);
                        let here = (u - ru).powi(2) + (v - rv).powi(2);
                        let there = (-u / r2 - ru).powi(2) + (-v / r2 - rv).powi(2);
                        if there < here {
                            self.invert(y, axis, true);
                        }
                    }
                }
            }
        }
    }

    fn glide(&self, y: &mut [f64], axis: usize, period: f64, flip_axis: usize, k: f64) {
        y[axis] += k * period;
        if (k as i64).rem_euclid(2) == 1 {
            for block in y.chunks_mut(self.dim) {
                block[flip_axis] = -block[flip_axis];
            }
        }
    }

    fn invert(&self, y: &mut [f64], axis: usize, antipodal: bool) {
        let w = Vector2::new(y[axis], y[axis + 1]);
        let sign = if antipodal { -1.0 } else { 1.0 };
        let (point, vectors) = y.split_at_mut(self.dim);
        for block in vectors.chunks_mut(self.dim) {
            let a = sphere::inversion_jacobian(w, Vector2::new(block[axis], block[axis + 1])) * sign;
            block[axis] = a.x;
            block[axis + 1] = a.y;
        }
        let w2 = w * (sign / w.norm_squared());
        point[axis] = w2.x;
        point[axis + 1] = w2.y;
    }

    /// A continuous distance between points of the space (not the geodesic
    /// distance): chart-Euclidean on flat and Klein factors after unwrapping,
    /// chordal in ℝ³ on sphere factors, chordal on `±q` for projective factors.
    pub fn separation(&self, a: &[f64], a_chart: u32, b: &[f64], b_chart: u32) -> f64 {
        let mut y = b.to_vec();
        let mut chart = b_chart;
        self.express_near_packed(&mut y, &mut chart, a, a_chart);
        let mut total = 0.0;
        for f in &self.factors {
            total += match f.model {
                Model::Sphere { .. } => (f.ambient(a, a_chart) - f.ambient(&y, chart)).norm_squared(),
                Model::Projective { .. } => {
                    let (p, q) = (f.ambient(a, a_chart), f.ambient(&y, chart));
                    (p - q).norm_squared().min((p + q).norm_squared())
                }
                _ => f.range().map(|i| (a[i] - y[i]).powi(2)).sum(),
            };
        }
        total.sqrt()
    }

    /// How far a point is from the edge of the chart domain: the Klein
    /// boundary, the edge of a flat strip, or a puncture. Infinite when the
    /// chart has no edge.
    pub fn boundary_distance(&self, x: &[f64], chart: u32) -> f64 {
        let mut d = f64::INFINITY;
        for f in &self.factors {
            let y = &x[f.range()];
            let here = match f.model {
                Model::Klein => 1.0 - dot(y, y).sqrt(),
                Model::Mobius | Model::Strip => 1.0 - y[1].abs(),
                Model::Sphere { punctured: true } | Model::Projective { punctured: true } => {
                    let q = f.ambient(x, chart);
                    let pole = Vector3::z();
                    (q - pole).norm().min((q + pole).norm())
                }
                _ => f64::INFINITY,
            };
            d = d.min(here);
        }
        d
    }

    /// A random point, spread over a moderate region of each factor: a ball of
    /// radius 2 for flat factors, radius 0.8 in the Klein chart, the uniform
    /// measure on spheres, and the fundamental domain of flat quotients.
    pub fn random_point(&self, rng: &mut SampleRng) -> (DVector<f64>, u32) {
        let mut x = DVector::zeros(self.dim);
        let mut chart = 0;
        for f in &self.factors {
            let o = f.offset;
            match f.model {
                Model::Euclidean | Model::PseudoEuclidean { .. } => {
                    x.rows_mut(o, f.dim).copy_from(&rng.in_ball(f.dim, 2.0));
                }
                Model::Klein => x.rows_mut(o, f.dim).copy_from(&rng.in_ball(f.dim, 0.8)),
                Model::Sphere { .. } | Model::Projective { .. } => {
                    let d = rng.direction(3);
                    let mut q = Vector3::new(d[0], d[1], d[2]);
                    if matches!(f.model, Model::Projective { .. }) && q.z < 0.0 {
                        q = -q;
                    }
                    let (c, w) = sphere::from_ambient(q);
                    x[o] = w.x;
                    x[o + 1] = w.y;
                    if let Some(bit) = f.chart_bit {
                        chart |= c << bit;
                    }
                }
                Model::Cylinder => {
                    x[o] = rng.range(-2.0, 2.0);
                    x[o + 1] = rng.range(0.0, TAU);
                }
                Model::Torus => {
                    x[o] = rng.range(0.0, TAU);
                    x[o + 1] = rng.range(0.0, TAU);
                }
                Model::Mobius => {
                    x[o] = rng.range(0.0, 1.0);
                    x[o + 1] = rng.range(-0.8, 0.8);
                }
                Model::Strip => {
                    x[o] = rng.range(-2.0, 2.0);
                    x[o + 1] = rng.range(-0.8, 0.8);
                }
                Model::Circle => x[o] = rng.range(0.0, TAU),
            }
        }
        (x, chart)
    }

    /// A random point with a random unit-speed velocity.
    pub fn random_state(&self, rng: &mut SampleRng) -> GeodesicState {
        let (x, chart) = self.random_point(rng);
        let v = rng.direction(self.dim);
        let s = GeodesicState::new(x, v).with_chart(chart);
        self.unit_state(&s).expect("random directions are nonzero")
    }

    /// Convert a point given by ambient/periodic-free coordinates into the
    /// space's normalized chart representation.
    pub fn normalize_point(&self, x: &[f64], chart: u32) -> (DVector<f64>, u32) {
        let mut y = x.to_vec();
        let mut c = chart;
        self.normalize(&mut y, &mut c);
        (DVector::from_vec(y), c)
    }
}

pub(crate) fn pack(s: &GeodesicState) -> Vec<f64> {
    let mut y = Vec::with_capacity(2 * s.dim());
    y.extend_from_slice(s.point.as_slice());
    y.extend_from_slice(s.velocity.as_slice());
    y
}

pub(crate) fn unpack(y: &[f64], dim: usize, chart: u32) -> GeodesicState {
    GeodesicState::from_slices(&y[..dim], &y[dim..2 * dim]).with_chart(chart)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn space(s: &str) -> Space {
        s.parse().unwrap()
    }

    #[test]
    fn flags_follow_the_models() {
        let e = space("euclidean(2)");
        assert!(e.is_flat() && e.is_hadamard() && e.has_metric());
        let k = space("klein2");
        assert!(!k.is_flat() && k.is_hadamard());
        let pe = space("pseudoeuclidean(3,1)");
        assert!(pe.is_flat() && !pe.has_metric() && pe.has_pole() && pe.metric(&[0.0; 3]).is_none());
        let p = space("product(euclidean(1),cylinder)");
        assert_eq!(p.dim(), 3);
        assert_eq!(
            p.identifications(),
            &[Identification::Periodic { axis: 2, period: TAU }]
        );
        assert_eq!(space("product(sphere2,sphere2)").chart_count(), 4);
    }

    #[test]
    fn chart_domains() {
        let k = space("klein2");
        assert!(k.in_chart(&[0.5, 0.5], 0));
        assert!(!k.in_chart(&[0.8, 0.8], 0));
        let p = space("punctured_projective_plane");
        assert!(!p.in_chart(&[0.0, 0.0], 0));
        assert!(p.in_chart(&[1e-6, 0.0], 0));
        assert!(!space("flat_mobius").in_chart(&[0.2, 1.0], 0));
        assert!(!space("euclidean2").in_chart(&[f64::NAN, 0.0], 0));
        assert!(!space("sphere2").in_chart(&[0.0, 0.0], 2));
    }

    #[test]
    fn klein_christoffel_values() {
        let k = space("klein2");
        let mut out = [0.0; 2];
        k.gamma_contract(&[0.5, 0.0], &[1.0, 0.0], &[1.0, 0.0], &mut out);
        assert_relative_eq!(out[0], 4.0 / 3.0, epsilon = 1e-15);
        k.gamma_contract(&[0.5, 0.0], &[1.0, 0.0], &[0.0, 1.0], &mut out);
        assert_relative_eq!(out[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn mobius_glide_flips_transverse_components() {
        let m = space("flat_mobius");
        let s = GeodesicState::from_slices(&[1.25, 0.5], &[1.0, 0.3]);
        let n = m.normalize_state(&s);
        assert_relative_eq!(n.point[0], 0.25, epsilon = 1e-15);
        assert_eq!(n.point[1], -0.5);
        assert_eq!(n.velocity[1], -0.3);
        let back = m.express_near(&n, &[1.2, 0.5], 0);
        assert_relative_eq!(back.point[0], 1.25, epsilon = 1e-15);
        assert_eq!(back.velocity[1], 0.3);
    }

    #[test]
    fn sphere_chart_switch_preserves_ambient_state() {
        let s2 = space("sphere2");
        let s = GeodesicState::from_slices(&[1.2, 0.6], &[0.4, -1.0]);
        let n = s2.normalize_state(&s);
        assert_eq!(n.chart, 1);
        let f = s2.factors()[0];
        assert_relative_eq!(
            f.ambient(n.point.as_slice(), 1),
            f.ambient(s.point.as_slice(), 0),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            f.ambient_tangent(n.point.as_slice(), 1, n.velocity.as_slice()),
            f.ambient_tangent(s.point.as_slice(), 0, s.velocity.as_slice()),
            epsilon = 1e-14
        );
    }

    #[test]
    fn projective_normalization_is_antipodal() {
        let p2 = space("projective_plane");
        let s = GeodesicState::from_slices(&[1.5, 0.0], &[0.0, 1.0]);
        let n = p2.normalize_state(&s);
        assert_eq!(n.chart, 0);
        let f = p2.factors()[0];
        let q0 = f.ambient(s.point.as_slice(), 0);
        let q1 = f.ambient(n.point.as_slice(), 0);
        assert_relative_eq!(q0, -q1, epsilon = 1e-14);
        assert_relative_eq!(
            f.ambient_tangent(n.point.as_slice(), 0, n.velocity.as_slice()),
            -f.ambient_tangent(s.point.as_slice(), 0, s.velocity.as_slice()),
            epsilon = 1e-14
        );
        assert!(p2.separation(s.point.as_slice(), 0, n.point.as_slice(), 0) < 1e-12);
    }

    #[test]
    fn separation_unwraps_periodic_axes() {
        let c = space("cylinder");
        assert_relative_eq!(c.separation(&[0.0, 0.1], 0, &[0.0, TAU - 0.1], 0), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn random_states_are_unit_and_in_chart() {
        let mut rng = SampleRng::new(3);
        for name in ["klein2", "sphere2", "flat_mobius", "product(circle,projective_plane)"] {
            let sp = space(name);
            for _ in 0..50 {
                let s = sp.random_state(&mut rng);
                sp.check_state(&s).unwrap();
                assert_relative_eq!(
                    sp.speed(s.point.as_slice(), s.velocity.as_slice()),
                    1.0,
                    epsilon = 1e-12
                );
            }
        }
    }
}
