//! Randomized invariants across the conformal, curve, elliptic, fixed-point
//! and experiment layers.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use proptest::prelude::*;

use splash_core::conformal::{frame_at, map_forward, map_inverse, sqrt_nearest, BranchCut, FrameModel, PlanePoint};
use splash_core::curve::{
    chord_arc_constant, classify_preimage, classify_splash, geometry, self_intersections, ClosedCurve, PreimageKind,
    SplashStatus,
};
use splash_core::elliptic::solve_weighted_poisson;
use splash_core::experiment::{run_scenario, stability_study, ScenarioConfig};
use splash_core::fixedpoint::{picard_run, PicardConfig};
use splash_core::grid::field::VectorField;
use splash_core::grid::maps::LogDisk;
use splash_core::grid::{DiscreteDomain, PolarGrid};
use splash_core::linalg::Mat2;
use splash_core::stokes::TimeGrid;

fn polar(r: f64, th: f64) -> PlanePoint {
    PlanePoint::new(r * th.cos(), r * th.sin())
}

/// A star-shaped curve `r(t) = base + Σ ripple`.
fn star(center: PlanePoint, base: f64, ripple: &[(f64, f64)], n: usize) -> ClosedCurve {
    ClosedCurve::from_fn(n, |t| {
        let r = base + ripple.iter().enumerate().map(|(k, (a, ph))| a * ((k + 2) as f64 * t + ph).cos()).sum::<f64>();
        PlanePoint::new(center.x + r * t.cos(), center.y + r * t.sin())
    })
    .unwrap()
}

fn orient(a: PlanePoint, b: PlanePoint, c: PlanePoint) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Strict transversal crossing by orientation signs alone.
fn crosses(a: PlanePoint, b: PlanePoint, c: PlanePoint, d: PlanePoint) -> bool {
    orient(a, b, c) * orient(a, b, d) < 0.0 && orient(c, d, a) * orient(c, d, b) < 0.0
}

fn all_pairs_crossings(c: &ClosedCurve) -> Vec<(usize, usize)> {
    let p = c.points();
    let n = p.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if crosses(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]) {
                out.push((i, j));
            }
        }
    }
    out
}

fn scenario(text: &str) -> ScenarioConfig {
    ScenarioConfig::parse(text, Path::new(".")).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_identities_hold(lr in -1.0f64..1.0, th in 0.0f64..TAU) {
        let f = frame_at(polar(10f64.powf(lr), th)).unwrap();
        let q2 = f.q2;
        prop_assert!((f.a * f.a.transpose() - Mat2::diag(q2)).max_abs() < 1e-12 * q2.max(1.0));
        let rot = f.a_inv.scale(q2) + Mat2::J * f.a.transpose() * Mat2::J;
        prop_assert!(rot.max_abs() < 1e-12 * q2.sqrt().max(1.0));
    }

    #[test]
    fn round_trip_on_the_branch_half_plane(lr in -1.0f64..1.0, th in -0.5 * PI + 1e-6..0.5 * PI - 1e-6) {
        let zt = polar(10f64.powf(lr), th);
        let back = map_forward(map_inverse(zt), &BranchCut::principal()).unwrap();
        prop_assert!(back.dist(&zt) < 1e-12);
    }

    #[test]
    fn frame_matches_finite_differences(lr in -0.5f64..0.5, th in -1.2f64..1.2) {
        let zt = polar(10f64.powf(lr), th);
        let z = map_inverse(zt);
        let fd = |h: f64| {
            let d = |dx: f64, dy: f64| sqrt_nearest(PlanePoint::new(z.x + dx, z.y + dy), zt);
            let (px, mx, py, my) = (d(h, 0.0), d(-h, 0.0), d(0.0, h), d(0.0, -h));
            // ∂P in physical coordinates is the frame A
            Mat2::new((px.x - mx.x) / (2.0 * h), (py.x - my.x) / (2.0 * h), (px.y - mx.y) / (2.0 * h), (py.y - my.y) / (2.0 * h))
        };
        let a = frame_at(zt).unwrap().a;
        let h = 1e-3 * z.norm();
        let (e1, e2) = ((fd(h) - a).max_abs(), (fd(0.5 * h) - a).max_abs());
        // second order until rounding takes over
        prop_assert!(e2 < 0.3 * e1 || e2 < 1e-9 * a.max_abs(), "{e1:e} {e2:e}");
    }

    #[test]
    fn chord_arc_is_rigid_invariant(
        ripple in proptest::collection::vec((-0.15f64..0.15, 0.0f64..TAU), 3),
        shift in (-5.0f64..5.0, -5.0f64..5.0),
        angle in 0.0f64..TAU,
    ) {
        let c = star(PlanePoint::new(0.0, 0.0), 1.0, &ripple, 128);
        let (s, co) = angle.sin_cos();
        let moved = c.map(|p| PlanePoint::new(co * p.x - s * p.y + shift.0, s * p.x + co * p.y + shift.1)).unwrap();
        prop_assert!((chord_arc_constant(&c) - chord_arc_constant(&moved)).abs() < 1e-12);
    }

    #[test]
    fn right_half_plane_curves_are_simple(
        ripple in proptest::collection::vec((-0.1f64..0.1, 0.0f64..TAU), 3),
        cx in 1.5f64..4.0,
        cy in -2.0f64..2.0,
        radius in 0.2f64..0.9,
    ) {
        let c = star(PlanePoint::new(cx, cy), radius, &ripple, 128);
        prop_assume!(c.points().iter().all(|p| p.x > 0.0));
        prop_assert_eq!(classify_preimage(&c, 1e-6).unwrap().case, PreimageKind::CaseASimple);
    }

    #[test]
    fn sweep_agrees_with_all_pairs(
        ripple in proptest::collection::vec((-0.9f64..0.9, 0.0f64..TAU), 4),
        n in 24usize..96,
    ) {
        let c = star(PlanePoint::new(0.0, 0.0), 1.0, &ripple, n);
        let swept: Vec<(usize, usize)> = self_intersections(&c).iter().map(|x| (x.seg_a, x.seg_b)).collect();
        prop_assert_eq!(swept, all_pairs_crossings(&c));
    }

    #[test]
    fn circles_are_regular(n in 64usize..400, r in 0.1f64..10.0) {
        let c = ClosedCurve::from_fn(n, |t| polar(r, t)).unwrap();
        prop_assert_eq!(classify_splash(&c, 1e-6 * r).unwrap().status, SplashStatus::RegularChordArc);
    }
}

#[test]
fn circle_curvature_converges_spectrally() {
    let r = 1.7;
    let err = |n: usize| {
        let c = ClosedCurve::from_fn(n, |t| PlanePoint::new(r * t.cos() + 0.3, r * t.sin())).unwrap();
        geometry(&c).unwrap().curvature.iter().fold(0.0_f64, |m, k| m.max((k - 1.0 / r).abs()))
    };
    // the spectral derivative is exact on a single mode, so the error is rounding
    for n in [16, 64, 256] {
        assert!(err(n) < 1e-10, "N = {n}: {:e}", err(n));
    }
    // fourth-order differences on non-power-of-two counts converge fast
    let (e1, e2) = (err(48), err(96));
    assert!(e2 < e1 / 12.0, "{e1:e} {e2:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn poisson_maximum_principle(
        src in proptest::collection::vec(0.0f64..2.0, 3),
        bc in proptest::collection::vec(0.0f64..1.0, 24),
    ) {
        let map = LogDisk { mu: 0.1, a: 0.3, b: 0.7 };
        let dom = DiscreteDomain::from_map(&map, PolarGrid::new(8, 24).unwrap(), FrameModel::default()).unwrap();
        let rhs: Vec<f64> = dom
            .nodes()
            .iter()
            .map(|p| -(src[0] + src[1] * p.x.sin().powi(2) + src[2] * (p.x * p.y).cos().powi(2)))
            .collect();
        let psi = solve_weighted_poisson(&dom, &rhs, &bc).unwrap();
        prop_assert!(psi.iter().all(|v| *v >= -1e-10));
    }

    #[test]
    fn flow_starts_at_the_identity(omega in -0.3f64..0.3) {
        let map = LogDisk { mu: 0.2, a: 0.25, b: 0.8 };
        let dom = DiscreteDomain::from_map(&map, PolarGrid::new(6, 16).unwrap(), FrameModel::default()).unwrap();
        let phys: Vec<[f64; 2]> = dom.nodes().iter().map(|p| [p.x * p.x - p.y * p.y, 2.0 * p.x * p.y]).collect();
        let v0 = VectorField::from_fn(dom.len(), |i| [-omega * phys[i][1], omega * phys[i][0]]);
        let config = PicardConfig { max_iter: 3, tol: 0.0, compat_tol: 0.5, ..PicardConfig::default() };
        let run = picard_run(&dom, TimeGrid::new(0.01, 2).unwrap(), &v0, &config).unwrap();
        prop_assert_eq!(run.state.flow.displacement[0].max_abs(), 0.0);
        prop_assert_eq!(run.state.w[0].max_abs(), 0.0);
        for i in 0..dom.len() {
            prop_assert_eq!(run.state.flow.position(&dom, 0, i), dom.nodes()[i]);
        }
    }

    #[test]
    fn bisection_brackets_the_touch(gap in 0.05f64..0.2, speed in 0.5f64..2.0) {
        let cfg = scenario(&format!("mode = kinematic\ngap = {gap}\nspeed = {speed}\nhorizon = 0.2\nsteps = 16\ntouch_tol = 1e-4\ntime_tol = 1e-7\n"));
        let out = run_scenario(&cfg).unwrap();
        let t = out.timeline.transition.unwrap();
        let (lo, hi) = t.bracket;
        prop_assert!(hi - lo <= 1e-7 && lo < t.t_star && t.t_star < hi);
        prop_assert_ne!(t.case, PreimageKind::CaseASimple);
        // arms at distance gap − 2vt
        let oracle = (gap - 1e-4) / (2.0 * speed);
        prop_assert!(lo <= oracle + 1e-12 && oracle <= hi + 1e-12, "{lo} {oracle} {hi}");
    }

    #[test]
    fn zero_translation_is_bitwise_identical(gap in 0.05f64..0.2) {
        let cfg = scenario(&format!("mode = kinematic\ngap = {gap}\nhorizon = 0.02\nsteps = 4\n"));
        let table = stability_study(&cfg, &[0.0, 1e-3]).unwrap();
        prop_assert_eq!(table.distance(0.0), Some(0.0));
    }
}
