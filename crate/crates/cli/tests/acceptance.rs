//! Acceptance run: ten numbered checks, one PASS/FAIL line each. Built with
//! `harness = false` so the lines are printed on every `cargo test`.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use geospace::geodesic_space::{
    chart_g_r2, chart_ts, chart_ts_inverse, hadamard_f, hadamard_f_inverse, MobiusChartPoint, TSPoint,
};
use geospace::lab::{
    covering_suite, detect_closed, hull_estimate, non_hausdorff_witness, product_regularity_witness, puncture_escape,
    HullOptions, Witness,
};
use geospace::rng::SampleRng;
use geospace::sky::{connect, foot, sky, triangle_first_law, ConnectOptions};
use geospace::spaces::COVERING_NAMES;
use geospace::{canonicalize, exp_state, integrate, make_covering, GeodesicState, Space};
use nalgebra::DVector;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn space(s: &str) -> Space {
    s.parse().unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// cosh d = (1 − u·w) / sqrt((1 − |u|²)(1 − |w|²))
fn klein_dist(u: &DVector<f64>, w: &DVector<f64>) -> f64 {
    ((1.0 - u.dot(w)) / ((1.0 - u.norm_squared()) * (1.0 - w.norm_squared())).sqrt()).acosh()
}

fn klein_point(rng: &mut SampleRng) -> DVector<f64> {
    rng.in_ball(2, 0.85)
}

// -------------------------------------------------------------------- 1

fn engine_fidelity() -> Check {
    let mut rng = SampleRng::new(101);
    let e = space("euclidean3");
    let mut worst_e: f64 = 0.0;
    for _ in 0..20 {
        let s = GeodesicState::new(rng.in_ball(3, 5.0), rng.in_ball(3, 2.0));
        let traj = integrate(&e, &s, 10.0, 1e-9).map_err(|x| x.to_string())?;
        for smp in &traj.samples {
            let exact = &s.point + &s.velocity * smp.t;
            worst_e = worst_e.max((&smp.state.point - exact).norm());
        }
        ensure((traj.t_end() - 10.0).abs() < 1e-12, || {
            "euclidean trace stopped early".into()
        })?;
    }
    ensure(worst_e < 1e-9, || format!("euclidean endpoint error {worst_e:e}"))?;

    let k = space("klein2");
    let mut worst_k: f64 = 0.0;
    for _ in 0..20 {
        let p = rng.in_ball(2, 0.5);
        let d = rng.direction(2);
        let s = k.unit_state(&GeodesicState::new(p.clone(), d.clone())).unwrap();
        let traj = integrate(&k, &s, 5.0, 1e-9).map_err(|x| x.to_string())?;
        for smp in &traj.samples {
            let r = &smp.state.point - &p;
            worst_k = worst_k.max((r[0] * d[1] - r[1] * d[0]).abs());
        }
    }
    ensure(worst_k < 1e-6, || format!("klein chord deviation {worst_k:e}"))?;

    let sph = space("sphere2");
    let mut worst_p: f64 = 0.0;
    for i in 0..20 {
        let s = sph.random_state(&mut rng.split(i));
        let c = canonicalize(&sph, &s, true).unwrap();
        match detect_closed(&sph, &c, 10.0, 1e-6).map_err(|x| x.to_string())? {
            Some(Witness::ClosedGeodesic(w)) => worst_p = worst_p.max((w.t - TAU).abs()),
            _ => return Err("great circle not detected as closed".into()),
        }
    }
    ensure(worst_p < 1e-5, || format!("sphere period error {worst_p:e}"))?;
    Ok(format!(
        "euclid {worst_e:.1e}, klein chord {worst_k:.1e}, sphere period {worst_p:.1e}"
    ))
}

// -------------------------------------------------------------------- 2

fn chart_round_trips() -> Check {
    let mut rng = SampleRng::new(202);
    let mut worst_ts: f64 = 0.0;
    for name in ["euclidean2", "euclidean3", "klein2"] {
        let sp = space(name);
        let n = sp.dim();
        let r = if name == "klein2" { 0.95 } else { 5.0 };
        for _ in 0..1000 {
            let d = rng.direction(n);
            let o = rng.in_ball(n, r);
            let offset = &o - &d * o.dot(&d);
            let t = TSPoint { direction: d, offset };
            let back =
                chart_ts(&sp, &chart_ts_inverse(&sp, &t).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            worst_ts = worst_ts
                .max((back.direction - &t.direction).amax())
                .max((back.offset - &t.offset).amax());
        }
    }
    ensure(worst_ts < 1e-9, || format!("ts round trip {worst_ts:e}"))?;

    let mut worst_c: f64 = 0.0;
    for name in [
        "euclidean2",
        "euclidean3",
        "klein2",
        "cylinder",
        "sphere2",
        "flat_mobius",
    ] {
        let sp = space(name);
        for _ in 0..200 {
            let a = sp.random_state(&mut rng);
            // the Möbius strip is open: halve slides that run off its edge
            let mut slide = rng.range(-1.5, 1.5);
            let b = loop {
                match exp_state(&sp, &a, slide) {
                    Ok(b) => break b.scaled(rng.range(0.5, 2.0)),
                    Err(_) if slide.abs() > 1e-3 => slide /= 2.0,
                    Err(e) => return Err(e.to_string()),
                }
            };
            for oriented in [true, false] {
                let ca = canonicalize(&sp, &a, oriented).map_err(|e| e.to_string())?;
                let cb = canonicalize(&sp, &b, oriented).map_err(|e| e.to_string())?;
                worst_c = worst_c.max(ca.distance(&cb, &sp));
            }
        }
    }
    ensure(worst_c < 1e-7, || format!("canonical reps differ by {worst_c:e}"))?;
    Ok(format!("ts {worst_ts:.1e}, canonicalize {worst_c:.1e}"))
}

// -------------------------------------------------------------------- 3

fn g_r2_point(p: [f64; 2], d: [f64; 2]) -> MobiusChartPoint {
    let e = space("euclidean2");
    chart_g_r2(&canonicalize(&e, &GeodesicState::from_slices(&p, &d), false).unwrap()).unwrap()
}

fn slope_limit() -> Check {
    let x = 1.0;
    // the vertical line x = 1 sits at the boundary angle of direction (−x, 1)
    let target_angle = 1f64.atan2(-x);
    ensure((target_angle - 3.0 * FRAC_PI_4).abs() < 1e-15, || "oracle angle".into())?;
    let vertical = g_r2_point([x, 0.0], [0.0, 1.0]);
    ensure(
        matches!(vertical, MobiusChartPoint::Boundary { theta } if (theta - target_angle).abs() < 1e-12),
        || format!("vertical line charted at {vertical:?}"),
    )?;

    let mut prev = f64::INFINITY;
    let mut last = (0.0, 0.0);
    for k in 1..=12 {
        let v = 2f64.powi(k);
        let up = g_r2_point([x, 0.0], [1.0, v]);
        let down = g_r2_point([x, 0.0], [1.0, -v]);
        let (du, dd) = (up.distance(&vertical), down.distance(&vertical));
        ensure(du <= prev + 1e-15, || format!("k={k}: distance {du} did not decrease"))?;
        prev = du;
        last = (du, dd);
        if k == 12 {
            // −2^k approaches the antipodal position; only the gluing makes it close
            let direct = (down.position() - vertical.position()).norm();
            ensure(direct > 1.9, || format!("negative slopes approach directly ({direct})"))?;
        }
    }
    ensure(last.0 < 1e-3 && last.1 < 1e-3, || format!("k=12 distances {:?}", last))?;

    // no boundary point at θ = 0: vertical lines fill (0, π), horizontal lines stay inside
    for a in [-1e6, -10.0, -1.0, 0.0, 1.0, 10.0, 1e6] {
        match g_r2_point([a, 0.0], [0.0, 1.0]) {
            MobiusChartPoint::Boundary { theta } => {
                ensure(theta > 0.0 && theta < PI, || format!("vertical x={a} at θ={theta}"))?
            }
            p => return Err(format!("vertical line charted inside: {p:?}")),
        }
        let h = g_r2_point([0.0, a], [1.0, 0.0]);
        ensure(matches!(h, MobiusChartPoint::Interior { .. }), || {
            format!("horizontal y={a} charted on the boundary")
        })?;
    }
    ensure(MobiusChartPoint::Boundary { theta: 0.0 }.validate().is_err(), || {
        "θ = 0 accepted".into()
    })?;
    Ok(format!(
        "k=12 distance to the 3π/4 limit {:.1e} (+2^k), {:.1e} (−2^k, glued)",
        last.0, last.1
    ))
}

// -------------------------------------------------------------------- 4

fn connectedness() -> Check {
    let mut rng = SampleRng::new(404);
    let mut worst: f64 = 0.0;
    for name in ["euclidean2", "euclidean3", "klein2"] {
        let sp = space(name);
        for i in 0..500 {
            let (x, _) = sp.random_point(&mut rng);
            let (z, _) = sp.random_point(&mut rng);
            let cs = connect(&sp, &x, &z, &ConnectOptions::default()).map_err(|e| format!("{name} pair {i}: {e}"))?;
            ensure(cs.len() == 1, || format!("{name} pair {i}: {} classes", cs.len()))?;
            worst = worst.max(cs[0].residual);
            if name != "klein2" {
                // straight segment oracle
                let dir = (&z - &x).normalize();
                ensure((&cs[0].velocity.velocity - dir).amax() < 1e-8, || {
                    format!("{name} pair {i}: not the segment")
                })?;
                ensure((cs[0].length() - (&z - &x).norm()).abs() < 1e-8, || {
                    format!("{name} pair {i}: wrong length")
                })?;
            } else {
                ensure((cs[0].length() - klein_dist(&x, &z)).abs() < 1e-6, || {
                    format!("klein pair {i}: wrong length")
                })?;
            }
        }
    }
    ensure(worst < 1e-6, || format!("residual {worst:e}"))?;

    let cyl = space("cylinder");
    let windings = 2;
    let mut fewest = usize::MAX;
    for _ in 0..50 {
        let (x, _) = cyl.random_point(&mut rng);
        let (z, _) = cyl.random_point(&mut rng);
        let cs = connect(
            &cyl,
            &x,
            &z,
            &ConnectOptions {
                windings,
                n_starts: None,
            },
        )
        .map_err(|e| e.to_string())?;
        for c in &cs {
            ensure(c.residual < 1e-6, || format!("cylinder residual {:e}", c.residual))?;
        }
        fewest = fewest.min(cs.len());
    }
    #[allow(clippy::int_plus_one)]
    ensure(fewest >= 2 * windings as usize + 1, || {
        format!("cylinder gave only {fewest} connections")
    })?;
    Ok(format!("max residual {worst:.1e}, cylinder ≥ {fewest} connections"))
}

// -------------------------------------------------------------------- 5

fn first_law() -> Check {
    let mut rng = SampleRng::new(505);
    let (k, e) = (space("klein2"), space("euclidean2"));
    let mut min_k = f64::INFINITY;
    let mut max_e: f64 = 0.0;
    for _ in 0..1000 {
        let (x, y, z) = (klein_point(&mut rng), klein_point(&mut rng), klein_point(&mut rng));
        let l = triangle_first_law(&k, &x, &y, &z).map_err(|e| e.to_string())?;
        // side lengths against the closed form
        let oracle = [klein_dist(&y, &z), klein_dist(&x, &z), klein_dist(&x, &y)];
        let mut got = [l.a1, l.a2, l.a3];
        let mut want = oracle;
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(want) {
            ensure((g - w).abs() < 1e-7, || format!("klein side {g} vs {w}"))?;
        }
        min_k = min_k.min(l.slack);
    }
    for _ in 0..1000 {
        let (x, y, z) = (rng.in_ball(2, 3.0), rng.in_ball(2, 3.0), rng.in_ball(2, 3.0));
        let l = triangle_first_law(&e, &x, &y, &z).map_err(|e| e.to_string())?;
        max_e = max_e.max(l.slack.abs());
    }
    ensure(min_k >= -1e-9, || format!("klein slack {min_k:e}"))?;
    ensure(max_e <= 1e-9, || format!("euclidean slack {max_e:e}"))?;

    let mut worst_orth: f64 = 0.0;
    for i in 0..100 {
        let p = klein_point(&mut rng);
        let c = canonicalize(&k, &k.random_state(&mut rng), true).unwrap();
        let f = foot(&k, &p, &c).map_err(|e| format!("foot {i}: {e}"))?;
        worst_orth = worst_orth.max(f.orthogonality);
        ensure((f.distance - klein_dist(&p, &f.point)).abs() < 1e-8, || {
            format!("foot {i}: distance mismatch")
        })?;
        for h in [1e-3, 1e-2, 1e-1] {
            let unit = k
                .unit_state(&GeodesicState::new(f.point.clone(), f.velocity.clone()))
                .unwrap();
            for s in [h, -h] {
                let Ok(q) = exp_state(&k, &unit, s) else { continue };
                ensure(klein_dist(&p, &q.point) > f.distance, || {
                    format!("foot {i}: not a strict minimum at h={s}")
                })?;
            }
        }
    }
    ensure(worst_orth < 1e-6, || format!("foot orthogonality {worst_orth:e}"))?;
    Ok(format!(
        "klein min slack {min_k:.1e}, euclid |slack| {max_e:.1e}, foot orth {worst_orth:.1e}"
    ))
}

// -------------------------------------------------------------------- 6

fn hadamard_diffeo() -> Check {
    let mut rng = SampleRng::new(606);
    let k = space("klein2");
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let p = rng.in_ball(2, 0.6);
        let ps = p.as_slice();
        let d = rng.direction(2);
        let x = &d / k.speed(ps, d.as_slice());
        let mut y = DVector::from_vec(vec![-x[1], x[0]]);
        let g = k.inner(ps, y.as_slice(), x.as_slice());
        y -= &x * g;
        y *= rng.range(-1.0, 1.0) / k.speed(ps, y.as_slice());
        let c = hadamard_f(&k, &p, &x, &y).map_err(|e| format!("input {i}: {e}"))?;
        let (bx, by) = hadamard_f_inverse(&k, &c, &p).map_err(|e| format!("input {i}: {e}"))?;
        worst = worst.max((bx - &x).amax()).max((by - &y).amax());
    }
    ensure(worst < 1e-6, || format!("F⁻¹∘F error {worst:e}"))?;

    let mut worst_sky: f64 = 0.0;
    for _ in 0..200 {
        let x = klein_point(&mut rng);
        let h = sky(&k, &x).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let d = rng.direction(2);
            let t = h.evaluate(&d).map_err(|e| e.to_string())?;
            worst_sky = worst_sky.max((t.direction - d).amax());
        }
    }
    ensure(worst_sky < 1e-10, || format!("sky section error {worst_sky:e}"))?;
    Ok(format!("F round trip {worst:.1e}, sky sections {worst_sky:.1e}"))
}

// -------------------------------------------------------------------- 7

fn product_regularity() -> Check {
    let cyl = space("cylinder");
    let line = space("euclidean1");
    let gamma = canonicalize(&cyl, &GeodesicState::from_slices(&[0.3, 1.0], &[0.0, 1.0]), true).unwrap();
    let beta = canonicalize(&line, &GeodesicState::from_slices(&[0.0], &[1.0]), true).unwrap();
    let eps: Vec<f64> = (1..=10).map(|k| 0.5f64.powi(k)).collect();
    let w = product_regularity_witness(&cyl, &gamma, &line, &beta, &eps, 20.0, 0.5).map_err(|e| e.to_string())?;
    let Witness::RegularityViolation(r) = &w else {
        return Err("wrong witness kind".into());
    };
    ensure((r.a - TAU).abs() < 1e-6, || format!("closing time {}", r.a))?;
    let mut prev = f64::INFINITY;
    for e in &r.entries {
        ensure(e.angle < prev, || format!("angles not decreasing at ε={}", e.eps))?;
        ensure(e.left_neighborhood, || {
            format!("λ(ε={}) stayed in the neighborhood", e.eps)
        })?;
        // λ = (γ, εβ) unit-normalized: its direction makes angle atan ε with (γ', 0)
        ensure((e.angle - e.eps.atan()).abs() < 1e-6, || {
            format!("ε={}: angle {} vs atan ε", e.eps, e.angle)
        })?;
        prev = e.angle;
    }
    ensure(prev < 1e-3, || format!("final angle {prev:e}"))?;
    ensure(w.recheck().map_err(|e| e.to_string())?, || {
        "witness recheck failed".into()
    })?;
    Ok(format!("angle at ε=2⁻¹⁰: {prev:.2e}"))
}

// -------------------------------------------------------------------- 8

fn covering_suite_check() -> Check {
    let mut worst: f64 = 0.0;
    for (i, name) in COVERING_NAMES.iter().enumerate() {
        let cov = make_covering(name).unwrap();
        let r = covering_suite(&cov, 200, 800 + i as u64, 1e-7).map_err(|e| format!("{name}: {e}"))?;
        ensure(r.passed == 200, || {
            format!("{name}: {} of 200 passed, max gap {:e}", r.passed, r.max_gap)
        })?;
        worst = worst.max(r.max_gap);
    }
    let cov = make_covering("punctured_sphere_over_punctured_projective").unwrap();
    let w = non_hausdorff_witness(&cov, 10).map_err(|e| e.to_string())?;
    let Witness::NonHausdorffLimit(nh) = &w else {
        return Err("wrong witness kind".into());
    };
    let tenth = nh.elements.get(9).ok_or("fewer than 10 elements")?;
    ensure(tenth.lift_distance.iter().all(|d| *d < 1e-3), || {
        format!("10th element distances {:?}", tenth.lift_distance)
    })?;
    ensure(w.recheck().map_err(|e| e.to_string())?, || {
        "witness recheck failed".into()
    })?;
    Ok(format!(
        "max square gap {worst:.1e}, 10th lift distances {:.1e}/{:.1e}",
        tenth.lift_distance[0], tenth.lift_distance[1]
    ))
}

// -------------------------------------------------------------------- 9

fn pseudoconvexity() -> Check {
    let k = space("klein2");
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = SampleRng::new(900 + seed);
        let pts: Vec<DVector<f64>> = (0..5).map(|_| klein_point(&mut rng)).collect();
        let a = hull_estimate(&k, &pts, &HullOptions::default()).map_err(|e| e.to_string())?;
        let b = hull_estimate(&k, &pts, &HullOptions::default()).map_err(|e| e.to_string())?;
        ensure(a.cone, || "klein hull did not use the cone construction".into())?;
        ensure(a.hull_radius.is_finite(), || "infinite hull radius".into())?;
        ensure(a.hull_radius.to_bits() == b.hull_radius.to_bits(), || {
            "hull radius not reproducible".into()
        })?;
        // chords are straight in the chart: no point is farther than half the longest chord
        let half_diam = pts
            .iter()
            .flat_map(|p| pts.iter().map(move |q| (p - q).norm() / 2.0))
            .fold(0.0, f64::max);
        ensure(a.hull_radius <= half_diam + 1e-9, || {
            format!("radius {} above {}", a.hull_radius, half_diam)
        })?;
        ensure(a.witness.is_none(), || "klein produced an escape witness".into())?;
        worst = worst.max(a.hull_radius);
    }
    let pp = space("punctured_projective_plane");
    let x = DVector::from_vec(vec![0.6, 0.2]);
    let w = puncture_escape(&pp, &x, 0.5, 1e-6).map_err(|e| e.to_string())?;
    let Witness::HullEscape(h) = &w else {
        return Err("wrong witness kind".into());
    };
    let closest = h
        .segments
        .iter()
        .map(|s| s.boundary_distance)
        .fold(f64::INFINITY, f64::min);
    ensure(closest < 1e-4, || format!("closest approach {closest:e}"))?;
    ensure(w.recheck().map_err(|e| e.to_string())?, || {
        "witness recheck failed".into()
    })?;
    Ok(format!(
        "klein hull radius ≤ {worst:.3}, puncture distance {closest:.1e}"
    ))
}

// -------------------------------------------------------------------- 10

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_geospace"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Check {
    let runs: [&[&str]; 6] = [
        &[
            "trace", "--space", "klein2", "--start", "0.1,0.2", "--dir", "1,0.5", "--t", "3",
        ],
        &[
            "chart",
            "--space",
            "euclidean3",
            "--chart",
            "ts",
            "--family",
            "random",
            "--samples",
            "200",
            "--seed",
            "11",
        ],
        &[
            "connect",
            "--space",
            "cylinder",
            "--from",
            "0,0",
            "--to",
            "1,3.14159",
            "--windings",
            "2",
        ],
        &[
            "properties",
            "--space",
            "sphere2",
            "--suite",
            "closed",
            "--seed",
            "7",
            "--samples",
            "20",
        ],
        &[
            "properties",
            "--space",
            "klein2",
            "--suite",
            "all",
            "--seed",
            "5",
            "--samples",
            "20",
        ],
        &[
            "properties",
            "--covering",
            "plane_over_mobius",
            "--suite",
            "covering",
            "--seed",
            "3",
        ],
    ];
    for args in runs {
        let a = run_cli(args)?;
        let b = run_cli(args)?;
        ensure(!a.is_empty(), || format!("{args:?}: empty output"))?;
        ensure(a == b, || format!("{args:?}: outputs differ"))?;
    }
    Ok(format!("{} commands byte-identical across runs", runs.len()))
}

fn main() -> ExitCode {
    let checks: [Criterion; 10] = [
        ("geodesic engine fidelity", engine_fidelity),
        ("chart round trips", chart_round_trips),
        ("slope family limit in the disc chart", slope_limit),
        ("connectedness", connectedness),
        ("first law of cosines and feet", first_law),
        ("Hadamard F and sky sections", hadamard_diffeo),
        ("product regularity witness", product_regularity),
        ("covering commuting square and lift limit", covering_suite_check),
        ("hull radius and puncture escape", pseudoconvexity),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
