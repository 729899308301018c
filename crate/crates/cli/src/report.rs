//! Subcommand bodies. Everything here is a pure function of its arguments
//! so that equal invocations produce byte-identical output.

use geospace::geodesic_space::{chart_g_r2, chart_ts, MobiusChartPoint, TSPoint};
use geospace::lab::{
    covering_suite, detect_closed, hull_estimate, non_hausdorff_witness, product_regularity_witness, puncture_escape,
    returning_test, HullOptions, Witness,
};
use geospace::rng::SampleRng;
use geospace::sky::{connect as solve_connect, ConnectOptions};
use geospace::{canonicalize, integrate, make_covering, GeoError, GeodesicState, Space, SpaceSpec};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use crate::{parse_vector, ChartKind, CliResult, Failure, Family, Format, Suite};

const NOTE: &str = "sampling suites: a reported witness is re-checkable evidence of a property failure; \
                    the absence of witnesses is evidence, not proof, that the property holds";

fn state(space: &Space, start: &[f64], dir: &[f64], chart: u32) -> CliResult<GeodesicState> {
    if start.len() != space.dim() || dir.len() != space.dim() {
        return Err(Failure::bad_args(format!(
            "{} needs {}-component --start and --dir",
            space.id(),
            space.dim()
        )));
    }
    let s = GeodesicState::from_slices(start, dir).with_chart(chart);
    space.check_state(&s)?;
    if s.velocity.norm() == 0.0 {
        return Err(Failure::bad_args("direction must be nonzero"));
    }
    Ok(s)
}

fn join(xs: impl IntoIterator<Item = f64>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn trace(
    space: &Space,
    start: &[f64],
    dir: &[f64],
    chart: u32,
    t: f64,
    tol: Option<f64>,
    format: Option<Format>,
) -> CliResult<String> {
    if !t.is_finite() {
        return Err(Failure::bad_args("--t must be finite"));
    }
    let tol = tol.unwrap_or(1e-9);
    if tol.is_nan() || tol <= 0.0 {
        return Err(Failure::bad_args("--tol must be positive"));
    }
    let s0 = state(space, start, dir, chart)?;
    let traj = integrate(space, &s0, t, tol)?;
    if traj.truncated {
        let note = json!({ "warning": { "code": "truncated", "message": format!("geodesic left the chart at t={}", traj.t_end()) } });
        eprintln!("{note}");
    }
    let n = space.dim();
    let labelled = space.chart_count() > 1;
    match format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut header: Vec<String> = vec!["t".into()];
            header.extend((0..n).map(|i| format!("x{i}")));
            header.extend((0..n).map(|i| format!("v{i}")));
            if labelled {
                header.push("chart".into());
            }
            let mut out = header.join(",");
            out.push('\n');
            for s in &traj.samples {
                out.push_str(&s.t.to_string());
                out.push(',');
                out.push_str(&join(s.state.point.iter().copied()));
                out.push(',');
                out.push_str(&join(s.state.velocity.iter().copied()));
                if labelled {
                    out.push_str(&format!(",{}", s.state.chart));
                }
                out.push('\n');
            }
            Ok(out)
        }
        Format::Json => Ok(crate::to_json(&json!({
            "space": space.id(),
            "tol": tol,
            "truncated": traj.truncated,
            "stats": traj.stats,
            "samples": traj.samples,
        }))),
        Format::Svg => Err(Failure::unsupported("trace output is CSV or JSON")),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn chart_family(
    space: &Space,
    family: Family,
    start: Option<&str>,
    dir: Option<&str>,
    through: &str,
    kmax: u32,
    sign: f64,
    samples: usize,
    seed: u64,
) -> CliResult<Vec<GeodesicState>> {
    match family {
        Family::Single => {
            let (Some(start), Some(dir)) = (start, dir) else {
                return Err(Failure::bad_args("the single family needs --start and --dir"));
            };
            Ok(vec![state(space, &parse_vector(start)?, &parse_vector(dir)?, 0)?])
        }
        Family::Slopes => {
            let p = parse_vector(through)?;
            if space.dim() != 2 || p.len() != 2 {
                return Err(Failure::unsupported("the slopes family lives in a 2-dimensional space"));
            }
            if !(sign == 1.0 || sign == -1.0) {
                return Err(Failure::bad_args("--sign is 1 or -1"));
            }
            if kmax == 0 || kmax > 60 {
                return Err(Failure::bad_args("--kmax must lie in 1..=60"));
            }
            (1..=kmax)
                .map(|k| state(space, &p, &[1.0, sign * 2f64.powi(k as i32)], 0))
                .collect()
        }
        Family::Random => {
            let root = SampleRng::new(seed);
            Ok((0..samples)
                .map(|i| space.random_state(&mut root.split(i as u64)))
                .collect())
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum ChartValue {
    GR2(MobiusChartPoint),
    Ts(TSPoint),
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartEntry {
    pub input: GeodesicState,
    pub rep: GeodesicState,
    pub value: ChartValue,
}

pub fn chart_points(space: &Space, chart: ChartKind, states: &[GeodesicState]) -> CliResult<Vec<ChartEntry>> {
    states
        .iter()
        .map(|s| {
            let (rep, value) = match chart {
                ChartKind::GR2 => {
                    let c = canonicalize(space, s, false)?;
                    let v = ChartValue::GR2(chart_g_r2(&c)?);
                    (c.rep, v)
                }
                ChartKind::Ts => {
                    let c = canonicalize(space, s, true)?;
                    let v = ChartValue::Ts(chart_ts(space, &c)?);
                    (c.rep, v)
                }
            };
            Ok(ChartEntry {
                input: s.clone(),
                rep,
                value,
            })
        })
        .collect()
}

pub fn connect(space: &Space, from: &[f64], to: &[f64], windings: u32) -> CliResult<Value> {
    if from.len() != space.dim() || to.len() != space.dim() {
        return Err(Failure::bad_args(format!(
            "{} needs {}-component points",
            space.id(),
            space.dim()
        )));
    }
    let (x, z) = (DVector::from_row_slice(from), DVector::from_row_slice(to));
    space.check_point(from, 0)?;
    space.check_point(to, 0)?;
    let opts = ConnectOptions {
        windings,
        n_starts: None,
    };
    let found = match solve_connect(space, &x, &z, &opts) {
        Ok(cs) => cs,
        Err(GeoError::NoConnectionFound) => vec![],
        Err(e) => return Err(e.into()),
    };
    let connections: Vec<Value> = found
        .iter()
        .map(|c| {
            json!({
                "length": c.length(),
                "residual": c.residual,
                "velocity": c.velocity,
                "t_from": c.t_x,
                "t_to": c.t_z,
                "class": c.class,
            })
        })
        .collect();
    Ok(json!({
        "space": space.id(),
        "from": from,
        "to": to,
        "windings": windings,
        "count": connections.len(),
        "max_residual": found.iter().map(|c| c.residual).fold(0.0, f64::max),
        "connections": connections,
    }))
}

// ---------------------------------------------------------------- properties

fn point_in_first_chart(space: &Space, rng: &mut SampleRng) -> DVector<f64> {
    for _ in 0..64 {
        let (x, chart) = space.random_point(rng);
        if chart == 0 {
            return x;
        }
    }
    // every shipped space has a chart-0 point near its first random draws;
    // fall back to a small offset from the origin
    DVector::from_element(space.dim(), 0.1)
}

fn closed_suite(space: &Space, n: usize, seed: u64, tol: f64) -> CliResult<Value> {
    let root = SampleRng::new(seed);
    let mut witnesses = vec![];
    let mut periodic = 0;
    let mut failures = 0;
    for i in 0..n {
        let s = space.random_state(&mut root.split(i as u64));
        let found = canonicalize(space, &s, true).and_then(|c| detect_closed(space, &c, 20.0, tol));
        match found {
            Ok(Some(w)) => {
                if let Witness::ClosedGeodesic(cw) = &w {
                    periodic += cw.periodic as usize;
                }
                witnesses.push(w);
            }
            Ok(None) => {}
            Err(_) => failures += 1,
        }
    }
    Ok(json!({
        "suite": "closed",
        "samples": n,
        "t_max": 20.0,
        "tol": tol,
        "closed": witnesses.len(),
        "periodic": periodic,
        "periodic_rate": if n > 0 { periodic as f64 / n as f64 } else { 0.0 },
        "sample_failures": failures,
        "witnesses": witnesses,
    }))
}

fn returning_suite(space: &Space, n: usize, seed: u64) -> CliResult<Value> {
    let mut rng = SampleRng::new(seed).split(1);
    let center = point_in_first_chart(space, &mut rng);
    let radius = 0.3;
    let t_max = 30.0;
    let w = returning_test(space, &center, radius, n, t_max, seed)?;
    Ok(json!({
        "suite": "returning",
        "samples": n,
        "center": center.as_slice(),
        "radius": radius,
        "t_max": t_max,
        "witnesses": w.into_iter().collect::<Vec<_>>(),
    }))
}

fn regularity_suite(space: &Space, seed: u64) -> CliResult<Value> {
    let (s1, s2) = match space.spec() {
        SpaceSpec::Product(a, b) => (Space::new((**a).clone())?, Space::new((**b).clone())?),
        other => (Space::new(other.clone())?, Space::new(SpaceSpec::Euclidean(1))?),
    };
    let root = SampleRng::new(seed);
    // coordinate directions first: they catch the closed circles of the
    // flat quotients, which random directions almost never hit
    let mut candidates = vec![];
    let mut rng = root.split(0);
    let base = point_in_first_chart(&s1, &mut rng);
    for i in 0..s1.dim() {
        let mut d = DVector::zeros(s1.dim());
        d[i] = 1.0;
        candidates.push(GeodesicState::new(base.clone(), d));
    }
    for i in 0..16u64 {
        candidates.push(s1.random_state(&mut root.split(i + 1)));
    }
    let mut gamma = None;
    for s in candidates {
        let Ok(c) = canonicalize(&s1, &s, true) else { continue };
        if let Ok(Some(_)) = detect_closed(&s1, &c, 20.0, 1e-6) {
            gamma = Some(c);
            break;
        }
    }
    let Some(gamma) = gamma else {
        return Ok(json!({
            "suite": "regularity-product",
            "factors": [s1.id(), s2.id()],
            "closed_factor_geodesic": false,
            "witnesses": [],
        }));
    };
    let beta = canonicalize(&s2, &s2.random_state(&mut root.split(99)), true)?;
    let eps: Vec<f64> = (1..=10).map(|k| 0.5f64.powi(k)).collect();
    let w = product_regularity_witness(&s1, &gamma, &s2, &beta, &eps, 20.0, 0.5)?;
    Ok(json!({
        "suite": "regularity-product",
        "factors": [s1.id(), s2.id()],
        "closed_factor_geodesic": true,
        "witnesses": [w],
    }))
}

fn hull_suite(space: &Space, seed: u64) -> CliResult<Value> {
    let mut rng = SampleRng::new(seed).split(2);
    let k: Vec<DVector<f64>> = (0..5).map(|_| point_in_first_chart(space, &mut rng)).collect();
    let report = hull_estimate(space, &k, &HullOptions::default())?;
    let mut witnesses: Vec<Witness> = report.witness.into_iter().collect();
    if matches!(
        space.spec(),
        SpaceSpec::PuncturedSphere2 | SpaceSpec::PuncturedProjectivePlane
    ) {
        witnesses.push(puncture_escape(space, &k[0], 0.5, 1e-6)?);
    }
    Ok(json!({
        "suite": "hull",
        "k": k.iter().map(|p| p.as_slice().to_vec()).collect::<Vec<_>>(),
        "cone": report.cone,
        "segments": report.segments,
        "hull_radius": report.hull_radius,
        "witnesses": witnesses,
    }))
}

fn covering_report(name: &str, n: usize, seed: u64, tol: f64) -> CliResult<Value> {
    let cov = make_covering(name)?;
    let report = covering_suite(&cov, n, seed, tol)?;
    let mut witnesses = report.witnesses;
    if name == "punctured_sphere_over_punctured_projective" {
        witnesses.push(non_hausdorff_witness(&cov, 10)?);
    }
    Ok(json!({
        "suite": "covering",
        "covering": report.covering,
        "samples": report.samples,
        "tol": tol,
        "passed": report.passed,
        "pass_rate": if n > 0 { report.passed as f64 / n as f64 } else { 1.0 },
        "max_gap": report.max_gap,
        "witnesses": witnesses,
    }))
}

fn skipped(suite: &str, f: Failure) -> Value {
    json!({ "suite": suite, "skipped": { "code": f.tag, "message": f.message } })
}

pub fn properties(
    space: Option<&Space>,
    covering: Option<&str>,
    suite: Suite,
    samples: Option<usize>,
    seed: u64,
    tol: Option<f64>,
) -> CliResult<Value> {
    let need_space = || space.ok_or_else(|| Failure::bad_args("this suite needs --space"));
    let need_covering = || covering.ok_or_else(|| Failure::bad_args("the covering suite needs --covering"));
    let mut suites = vec![];
    match suite {
        Suite::Closed => suites.push(closed_suite(
            need_space()?,
            samples.unwrap_or(100),
            seed,
            tol.unwrap_or(1e-6),
        )?),
        Suite::Returning => suites.push(returning_suite(need_space()?, samples.unwrap_or(100), seed)?),
        Suite::RegularityProduct => suites.push(regularity_suite(need_space()?, seed)?),
        Suite::Hull => suites.push(hull_suite(need_space()?, seed)?),
        Suite::Covering => suites.push(covering_report(
            need_covering()?,
            samples.unwrap_or(200),
            seed,
            tol.unwrap_or(1e-7),
        )?),
        Suite::All => {
            if space.is_none() && covering.is_none() {
                return Err(Failure::bad_args("the all suite needs --space or --covering"));
            }
            if let Some(space) = space {
                let runs: [(&str, CliResult<Value>); 4] = [
                    (
                        "closed",
                        closed_suite(space, samples.unwrap_or(100), seed, tol.unwrap_or(1e-6)),
                    ),
                    ("returning", returning_suite(space, samples.unwrap_or(100), seed)),
                    ("regularity-product", regularity_suite(space, seed)),
                    ("hull", hull_suite(space, seed)),
                ];
                for (name, r) in runs {
                    suites.push(r.unwrap_or_else(|f| skipped(name, f)));
                }
            }
            if let Some(name) = covering {
                let r = covering_report(name, samples.unwrap_or(200), seed, tol.unwrap_or(1e-7));
                suites.push(r.unwrap_or_else(|f| skipped("covering", f)));
            }
        }
    }
    Ok(json!({
        "note": NOTE,
        "space": space.map(Space::id),
        "covering": covering,
        "seed": seed,
        "suites": suites,
    }))
}
