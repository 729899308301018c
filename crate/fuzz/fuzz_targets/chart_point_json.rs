#![no_main]

use geospace::geodesic_space::{chart_ts_inverse, MobiusChartPoint, TSPoint};
use geospace::{Space, SpaceSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = serde_json::from_slice::<MobiusChartPoint>(data) {
        if p.validate().is_ok() {
            let q = p.position();
            assert!(q.norm() <= 1.0 + 1e-12);
        }
    }
    if let Ok(t) = serde_json::from_slice::<TSPoint>(data) {
        let n = t.direction.len();
        if (1..=8).contains(&n) && t.validate().is_ok() {
            for spec in [SpaceSpec::Euclidean(n), SpaceSpec::KleinHyperbolic(n)] {
                let space = Space::new(spec).unwrap();
                let _ = chart_ts_inverse(&space, &t);
            }
        }
    }
});
