use std::f64::consts::TAU;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{Space, SpaceSpec};
use crate::error::{GeoError, Result};
use crate::state::GeodesicState;

pub const COVERING_NAMES: [&str; 6] = [
    "line_over_circle",
    "plane_over_cylinder",
    "plane_over_torus",
    "plane_over_mobius",
    "sphere_over_projective",
    "punctured_sphere_over_punctured_projective",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoveringKind {
    LineOverCircle,
    PlaneOverCylinder,
    PlaneOverTorus,
    /// The flat strip ℝ×(−1,1) over the flat Möbius band.
    PlaneOverMobius,
    SphereOverProjective,
    PuncturedSphereOverPunctured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SheetCount {
    Finite(u32),
    Infinite,
}

/// Deck-transformation index selecting one preimage of a point.
///
/// For the sphere coverings the first slot is 0 or 1; for the flat coverings
/// the slots count translations along the periodic axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Sheet(pub [i64; 2]);

impl Sheet {
    pub fn new(a: i64) -> Sheet {
        Sheet([a, 0])
    }
}

/// A geodesic covering map `p: upstairs → downstairs`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringMap {
    name: &'static str,
    kind: CoveringKind,
    upstairs: Space,
    downstairs: Space,
}

pub fn make_covering(name: &str) -> Result<CoveringMap> {
    let (name, kind, up, down) = match name.trim() {
        "line_over_circle" => (
            COVERING_NAMES[0],
            CoveringKind::LineOverCircle,
            SpaceSpec::Euclidean(1),
            SpaceSpec::Circle,
        ),
        "plane_over_cylinder" => (
            COVERING_NAMES[1],
            CoveringKind::PlaneOverCylinder,
            SpaceSpec::Euclidean(2),
            SpaceSpec::Cylinder,
        ),
        "plane_over_torus" => (
            COVERING_NAMES[2],
            CoveringKind::PlaneOverTorus,
            SpaceSpec::Euclidean(2),
            SpaceSpec::FlatTorus,
        ),
        "plane_over_mobius" => (
            COVERING_NAMES[3],
            CoveringKind::PlaneOverMobius,
            SpaceSpec::FlatStrip,
            SpaceSpec::FlatMobius,
        ),
        "sphere_over_projective" => (
            COVERING_NAMES[4],
            CoveringKind::SphereOverProjective,
            SpaceSpec::Sphere2,
            SpaceSpec::ProjectivePlane,
        ),
        "punctured_sphere_over_punctured_projective" => (
            COVERING_NAMES[5],
            CoveringKind::PuncturedSphereOverPunctured,
            SpaceSpec::PuncturedSphere2,
            SpaceSpec::PuncturedProjectivePlane,
        ),
        other => return Err(GeoError::UnknownCovering(other.to_string())),
    };
    Ok(CoveringMap {
        name,
        kind,
        upstairs: Space::new(up)?,
        downstairs: Space::new(down)?,
    })
}

impl CoveringMap {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn kind(&self) -> CoveringKind {
        self.kind
    }

    pub fn upstairs(&self) -> &Space {
        &self.upstairs
    }

    pub fn downstairs(&self) -> &Space {
        &self.downstairs
    }

    pub fn sheet_count(&self) -> SheetCount {
        if self.is_spherical() {
            SheetCount::Finite(2)
        } else {
            SheetCount::Infinite
        }
    }

    fn is_spherical(&self) -> bool {
        matches!(
            self.kind,
            CoveringKind::SphereOverProjective | CoveringKind::PuncturedSphereOverPunctured
        )
    }

    pub fn check_sheet(&self, sheet: Sheet) -> Result<()> {
        let [a, b] = sheet.0;
        let ok = match self.kind {
            CoveringKind::PlaneOverTorus => true,
            CoveringKind::SphereOverProjective | CoveringKind::PuncturedSphereOverPunctured => {
                (a == 0 || a == 1) && b == 0
            }
            _ => b == 0,
        };
        if ok {
            Ok(())
        } else {
            Err(GeoError::BadSheet {
                covering: self.name.to_string(),
                sheet: sheet.0.to_vec(),
            })
        }
    }

    /// The differential `p_*`: image of an upstairs state, normalized downstairs.
    pub fn project_state(&self, s: &GeodesicState) -> GeodesicState {
        let mut down = s.clone().with_chart(0);
        if self.is_spherical() && s.chart == 1 {
            // chart 1 at w is antipodal to chart 0 at -w
            down.point = -&s.point;
            down.velocity = -&s.velocity;
        }
        self.downstairs.normalize_state(&down)
    }

    pub fn project(&self, x: &[f64], chart: u32) -> (DVector<f64>, u32) {
        let s = GeodesicState::new(DVector::from_column_slice(x), DVector::zeros(x.len())).with_chart(chart);
        let p = self.project_state(&s);
        (p.point, p.chart)
    }

    /// The preimage of a downstairs state on the given sheet.
    pub fn lift_state(&self, s: &GeodesicState, sheet: Sheet) -> Result<GeodesicState> {
        self.check_sheet(sheet)?;
        let s = self.downstairs.normalize_state(s);
        let [a, b] = sheet.0;
        let mut up = s.clone();
        match self.kind {
            CoveringKind::LineOverCircle => up.point[0] += TAU * a as f64,
            CoveringKind::PlaneOverCylinder => up.point[1] += TAU * a as f64,
            CoveringKind::PlaneOverTorus => {
                up.point[0] += TAU * a as f64;
                up.point[1] += TAU * b as f64;
            }
            CoveringKind::PlaneOverMobius => {
                up.point[0] += a as f64;
                if a.rem_euclid(2) == 1 {
                    up.point[1] = -up.point[1];
                    up.velocity[1] = -up.velocity[1];
                }
            }
            CoveringKind::SphereOverProjective | CoveringKind::PuncturedSphereOverPunctured => {
                if a == 1 {
                    up = GeodesicState::new(-&s.point, -&s.velocity).with_chart(1);
                }
                return Ok(self.upstairs.normalize_state(&up));
            }
        }
        Ok(up)
    }

    pub fn lift(&self, x: &[f64], chart: u32, sheet: Sheet) -> Result<(DVector<f64>, u32)> {
        let s = GeodesicState::new(DVector::from_column_slice(x), DVector::zeros(x.len())).with_chart(chart);
        let up = self.lift_state(&s, sheet)?;
        Ok((up.point, up.chart))
    }

    /// The sheet on which an upstairs point lies, so that lifting its
    /// projection to this sheet returns the point.
    pub fn sheet_of(&self, x: &[f64], chart: u32) -> Sheet {
        match self.kind {
            CoveringKind::LineOverCircle => Sheet::new((x[0] / TAU).floor() as i64),
            CoveringKind::PlaneOverCylinder => Sheet::new((x[1] / TAU).floor() as i64),
            CoveringKind::PlaneOverTorus => Sheet([(x[0] / TAU).floor() as i64, (x[1] / TAU).floor() as i64]),
            CoveringKind::PlaneOverMobius => Sheet::new(x[0].floor() as i64),
            CoveringKind::SphereOverProjective | CoveringKind::PuncturedSphereOverPunctured => {
                let f = self.upstairs.factors()[0];
                let q = f.ambient(x, chart);
                let (p, pc) = self.project(x, chart);
                let q0 = self.downstairs.factors()[0].ambient(p.as_slice(), pc);
                Sheet::new(if (q0 - q).norm() <= (q0 + q).norm() { 0 } else { 1 })
            }
        }
    }

    /// Deck transformation moving an upstairs state from its own sheet to
    /// `sheet` while keeping the projection fixed.
    pub fn deck(&self, s: &GeodesicState, sheet: Sheet) -> Result<GeodesicState> {
        let down = self.project_state(s);
        let own = self.sheet_of(s.point.as_slice(), s.chart);
        let target = match self.sheet_count() {
            SheetCount::Finite(_) => Sheet::new((own.0[0] + sheet.0[0]).rem_euclid(2)),
            SheetCount::Infinite => Sheet([own.0[0] + sheet.0[0], own.0[1] + sheet.0[1]]),
        };
        self.lift_state(&down, target)
    }
}
