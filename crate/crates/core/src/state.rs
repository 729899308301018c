use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::spaces::MAX_DIM;

/// Parse a comma-separated coordinate list such as `0.3,-1.2`.
///
/// Every entry must be a finite number; at most `MAX_DIM` entries.
pub fn parse_vector(s: &str) -> Result<DVector<f64>> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() > MAX_DIM {
        return Err(GeoError::Parse(format!(
            "vector has {} entries, at most {MAX_DIM} allowed",
            parts.len()
        )));
    }
    let xs = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| GeoError::Parse(format!("`{p}` is not a finite number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DVector::from_vec(xs))
}

/// A point plus a tangent vector, in chart coordinates.
///
/// `chart` selects the coordinate patch for spaces with more than one
/// (each stereographic sphere factor contributes one bit); it is zero for
/// single-chart spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    #[serde(with = "dvec")]
    pub point: DVector<f64>,
    #[serde(with = "dvec")]
    pub velocity: DVector<f64>,
    #[serde(default)]
    pub chart: u32,
}

impl GeodesicState {
    pub fn new(point: DVector<f64>, velocity: DVector<f64>) -> Self {
        Self {
            point,
            velocity,
            chart: 0,
        }
    }

    pub fn from_slices(point: &[f64], velocity: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(point), DVector::from_column_slice(velocity))
    }

    pub fn with_chart(mut self, chart: u32) -> Self {
        self.chart = chart;
        self
    }

    pub fn dim(&self) -> usize {
        self.point.len()
    }

    pub fn reversed(&self) -> Self {
        Self {
            point: self.point.clone(),
            velocity: -&self.velocity,
            chart: self.chart,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            point: self.point.clone(),
            velocity: &self.velocity * c,
            chart: self.chart,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.point.iter().chain(self.velocity.iter()).all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: GeodesicState,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub max_step: f64,
    pub min_step: f64,
    /// Largest accepted scaled error estimate (1.0 is the tolerance).
    pub max_error_ratio: f64,
}

/// A sampled geodesic. Sample times are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub stats: StepStats,
    /// True when integration stopped early because the geodesic left the chart domain.
    pub truncated: bool,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn t_start(&self) -> f64 {
        self.first().t
    }

    pub fn t_end(&self) -> f64 {
        self.last().t
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Index `i` with `samples[i].t <= t <= samples[i+1].t`, clamped to the ends.
    pub fn bracket(&self, t: f64) -> usize {
        let n = self.samples.len();
        if n < 2 {
            return 0;
        }
        let idx = self.samples.partition_point(|s| s.t <= t);
        idx.saturating_sub(1).min(n - 2)
    }

    /// Index of the sample whose time is nearest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let i = self.bracket(t);
        if i + 1 < self.samples.len() && (self.samples[i + 1].t - t).abs() < (self.samples[i].t - t).abs() {
            i + 1
        } else {
            i
        }
    }
}

/// Serialize `DVector<f64>` as a plain JSON array.
pub mod dvec {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Ok(DVector::from_vec(v))
    }
}
