//! Stereographic charts on the unit sphere.
//!
//! Chart 0 projects from the south pole (its origin is the north pole),
//! chart 1 from the north pole. They overlap away from the poles with
//! transition `w ↦ w/|w|²`, and `(0, w)` is antipodal to `(1, -w)`.

use nalgebra::{Vector2, Vector3};

/// Switch charts once a coordinate leaves this radius.
pub const SWITCH_RADIUS: f64 = 1.25;

fn sign(chart: u32) -> f64 {
    if chart & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn to_ambient(chart: u32, w: Vector2<f64>) -> Vector3<f64> {
    let r2 = w.norm_squared();
    let d = 1.0 + r2;
    Vector3::new(2.0 * w.x / d, 2.0 * w.y / d, sign(chart) * (1.0 - r2) / d)
}

pub fn tangent_to_ambient(chart: u32, w: Vector2<f64>, a: Vector2<f64>) -> Vector3<f64> {
    let r2 = w.norm_squared();
    let d = 1.0 + r2;
    let wa = w.dot(&a);
    let xy = a * (2.0 / d) - w * (4.0 * wa / (d * d));
    Vector3::new(xy.x, xy.y, -sign(chart) * 4.0 * wa / (d * d))
}

/// Chart coordinates of an ambient unit vector, choosing the chart in which
/// the point lies in the closed unit disc.
pub fn from_ambient(q: Vector3<f64>) -> (u32, Vector2<f64>) {
    let chart = if q.z >= 0.0 { 0 } else { 1 };
    (chart, from_ambient_in(chart, q))
}

pub fn from_ambient_in(chart: u32, q: Vector3<f64>) -> Vector2<f64> {
    Vector2::new(q.x, q.y) / (1.0 + sign(chart) * q.z)
}

pub fn tangent_from_ambient(chart: u32, q: Vector3<f64>, qdot: Vector3<f64>) -> Vector2<f64> {
    let s = sign(chart);
    let d = 1.0 + s * q.z;
    Vector2::new(qdot.x, qdot.y) / d - Vector2::new(q.x, q.y) * (s * qdot.z / (d * d))
}

/// Derivative of the inversion `w ↦ w/|w|²` applied to `a`.
pub fn inversion_jacobian(w: Vector2<f64>, a: Vector2<f64>) -> Vector2<f64> {
    let r2 = w.norm_squared();
    (a * r2 - w * (2.0 * w.dot(&a))) / (r2 * r2)
}

/// Conformal factor `λ` with metric `λ² δ` in either chart.
pub fn conformal_factor(w: Vector2<f64>) -> f64 {
    2.0 / (1.0 + w.norm_squared())
}
