use approx::assert_abs_diff_eq;
use geospace::geodesic_space::{chart_ts, chart_ts_inverse, hadamard_f, hadamard_f_inverse, TSPoint};
use geospace::sky::{connect, sky, sky_difference_roots, triangle_first_law, ConnectOptions};
use geospace::{canonicalize, exp_map, exp_state, log_map, make_covering, GeodesicState, Sheet, Space, SpaceSpec};
use nalgebra::DVector;
use proptest::prelude::*;

fn space(s: &str) -> Space {
    s.parse().unwrap()
}

fn vec_in(dim: usize, r: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-r..r, dim).prop_map(DVector::from_vec)
}

fn unit_vec(dim: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.0..1.0f64, dim)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-4)
        .prop_map(|v| DVector::from_vec(v).normalize())
}

fn klein_point() -> impl Strategy<Value = DVector<f64>> {
    vec_in(2, 0.7).prop_filter("inside", |p| p.norm() < 0.85)
}

// cosh d = (1 − u·w) / sqrt((1 − |u|²)(1 − |w|²))
fn klein_dist(u: &DVector<f64>, w: &DVector<f64>) -> f64 {
    ((1.0 - u.dot(w)) / ((1.0 - u.norm_squared()) * (1.0 - w.norm_squared())).sqrt()).acosh()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn euclidean_exp_is_translation(x in vec_in(3, 5.0), v in vec_in(3, 3.0)) {
        let e = space("euclidean3");
        let y = exp_map(&e, &x, &v).unwrap();
        assert_abs_diff_eq!(y, &x + &v, epsilon = 1e-9);
    }

    #[test]
    fn klein_exp_log_round_trip(p in klein_point(), q in klein_point()) {
        let k = space("klein2");
        let v = log_map(&k, &p, &q).unwrap();
        let back = exp_map(&k, &p, &v).unwrap();
        assert_abs_diff_eq!(back, q.clone(), epsilon = 1e-8);
        // the log length is the hyperbolic distance
        let len = k.speed(p.as_slice(), v.as_slice());
        assert_abs_diff_eq!(len, klein_dist(&p, &q), epsilon = 1e-8);
    }

    #[test]
    fn ts_chart_round_trip(d in unit_vec(3), o in vec_in(3, 3.0)) {
        let e = space("euclidean3");
        let offset = &o - &d * o.dot(&d);
        let t = TSPoint { direction: d, offset };
        let back = chart_ts(&e, &chart_ts_inverse(&e, &t).unwrap()).unwrap();
        assert_abs_diff_eq!(back.direction, t.direction, epsilon = 1e-9);
        assert_abs_diff_eq!(back.offset, t.offset, epsilon = 1e-9);
    }

    #[test]
    fn klein_ts_offsets_stay_in_disc(p in klein_point(), d in unit_vec(2)) {
        let k = space("klein2");
        let c = canonicalize(&k, &GeodesicState::new(p, d), true).unwrap();
        let t = chart_ts(&k, &c).unwrap();
        prop_assert!(t.offset.norm() < 1.0);
        assert_abs_diff_eq!(t.direction.dot(&t.offset), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn canonical_rep_ignores_sliding(p in klein_point(), d in unit_vec(2), s in -2.0..2.0f64) {
        let k = space("klein2");
        let a = GeodesicState::new(p, d);
        let b = exp_state(&k, &a, s).unwrap();
        let ca = canonicalize(&k, &a, true).unwrap();
        let cb = canonicalize(&k, &b, true).unwrap();
        prop_assert!(ca.distance(&cb, &k) < 1e-7);
    }

    #[test]
    fn unoriented_rep_ignores_reversal(p in vec_in(2, 3.0), d in unit_vec(2)) {
        let e = space("euclidean2");
        let a = canonicalize(&e, &GeodesicState::new(p.clone(), d.clone()), false).unwrap();
        let b = canonicalize(&e, &GeodesicState::new(p, -d), false).unwrap();
        prop_assert!(a.distance(&b, &e) < 1e-12);
    }

    #[test]
    fn skies_are_sections(x in klein_point(), d in unit_vec(2)) {
        let k = space("klein2");
        let h = sky(&k, &x).unwrap();
        assert_abs_diff_eq!(h.evaluate(&d).unwrap().direction, d, epsilon = 1e-10);
    }

    #[test]
    fn flat_skies_meet_once(x in vec_in(2, 3.0), z in vec_in(2, 3.0)) {
        prop_assume!((&x - &z).norm() > 1e-3);
        let e = space("euclidean2");
        let roots = sky_difference_roots(&e, &x, &z, 12).unwrap();
        prop_assert_eq!(roots.len(), 2);
        assert_abs_diff_eq!(roots[0].clone(), -roots[1].clone(), epsilon = 1e-8);
    }

    #[test]
    fn hadamard_connections_are_unique(x in klein_point(), z in klein_point()) {
        prop_assume!((&x - &z).norm() > 1e-3);
        let k = space("klein2");
        let cs = connect(&k, &x, &z, &ConnectOptions::default()).unwrap();
        prop_assert_eq!(cs.len(), 1);
        let c = &cs[0];
        prop_assert!(c.residual < 1e-6);
        let v = c.velocity.velocity.clone() * c.length();
        assert_abs_diff_eq!(exp_map(&k, &x, &v).unwrap(), z, epsilon = 1e-6);
    }

    #[test]
    fn first_law_slack(x in klein_point(), y in klein_point(), z in klein_point()) {
        prop_assume!((&x - &y).norm() > 1e-3 && (&x - &z).norm() > 1e-3 && (&y - &z).norm() > 1e-3);
        let k = space("klein2");
        let l = triangle_first_law(&k, &x, &y, &z).unwrap();
        prop_assert!(l.slack >= -1e-9, "slack {}", l.slack);
        let e = space("euclidean2");
        let l = triangle_first_law(&e, &x, &y, &z).unwrap();
        prop_assert!(l.slack.abs() <= 1e-9, "slack {}", l.slack);
    }

    #[test]
    fn hadamard_f_round_trip(p in klein_point(), x in unit_vec(2), s in -1.0..1.0f64) {
        let k = space("klein2");
        let ps = p.as_slice();
        let xu = &x / k.speed(ps, x.as_slice());
        // Y orthogonal to X in the metric at p
        let mut y = DVector::from_vec(vec![-xu[1], xu[0]]);
        let g = k.inner(ps, y.as_slice(), xu.as_slice());
        y -= &xu * g;
        y *= s / k.speed(ps, y.as_slice()).max(1e-12);
        let c = hadamard_f(&k, &p, &xu, &y).unwrap();
        let (bx, by) = hadamard_f_inverse(&k, &c, &p).unwrap();
        assert_abs_diff_eq!(bx, xu, epsilon = 1e-6);
        assert_abs_diff_eq!(by, y, epsilon = 1e-6);
    }

    #[test]
    fn spec_display_parses_back(n in 1usize..6, q in 0usize..3) {
        let specs = [
            SpaceSpec::Euclidean(n),
            SpaceSpec::PseudoEuclidean(n.max(2), q.min(n.max(2))),
            SpaceSpec::KleinHyperbolic(n),
            SpaceSpec::Product(Box::new(SpaceSpec::Euclidean(n)), Box::new(SpaceSpec::Sphere2)),
        ];
        for s in specs {
            let text = s.to_string();
            prop_assert_eq!(text.parse::<SpaceSpec>().unwrap(), s);
        }
    }

    #[test]
    fn lifts_project_back(seed in any::<u64>(), k in -3i64..3) {
        let mut rng = geospace::rng::SampleRng::new(seed);
        for name in ["plane_over_cylinder", "plane_over_mobius", "sphere_over_projective"] {
            let cov = make_covering(name).unwrap();
            let s = cov.downstairs().random_state(&mut rng);
            let sheet = if name == "sphere_over_projective" { Sheet::new(k.rem_euclid(2)) } else { Sheet::new(k) };
            let up = cov.lift_state(&s, sheet).unwrap();
            let down = cov.project_state(&up);
            let d = cov.downstairs();
            prop_assert!(d.separation(down.point.as_slice(), down.chart, s.point.as_slice(), s.chart) < 1e-12);
        }
    }
}
