use std::f64::consts::PI;

use conformal_lab::continuation::*;
use conformal_lab::field::{Chart, Field, FnField};
use conformal_lab::green::singular_part;
use conformal_lab::solver::{newton_solve, CurvatureSpec, SolverOptions};
use conformal_lab::{Divisor, Point};

/// Heat flow on the line applied to the periodic square wave that is +1 on
/// [e, e + 1/2) and −1 elsewhere.
fn smoothed_square(x: f64, e: f64, t: f64) -> f64 {
    let w = 2.0 * t.sqrt();
    let mut ind = 0.0;
    for m in -3..=3 {
        let m = m as f64;
        ind += 0.5 * (libm::erf((x - e + m) / w) - libm::erf((x - e - 0.5 + m) / w));
    }
    2.0 * ind - 1.0
}

#[test]
fn checkerboard_mollifier_follows_heat_kernel_oracle() {
    let n = 512;
    let h = 1.0 / n as f64;
    // Edges sit half a cell off the nodes so sampling is unambiguous.
    let e = -0.5 * h;
    let sq = |x: f64| {
        if (x - e).rem_euclid(1.0) < 0.5 {
            1.0
        } else {
            -1.0
        }
    };
    let k = Field::from_fn(n, Chart::Torus, |p| -1.5 - 0.5 * sq(p.x) * sq(p.y)).unwrap();

    let q = 2048;
    let hq = 1.0 / q as f64;
    let mids: Vec<f64> = (0..q).map(|i| (i as f64 + 0.5) * hq).collect();
    let jumps: Vec<f64> = mids.iter().map(|&x| sq(x)).collect();

    let mut discrete = Vec::new();
    let mut oracle = Vec::new();
    for stage in 1..=6u32 {
        let m = mollify_curvature(&k, stage, 2.0).unwrap();
        assert!(m.values().iter().all(|&v| (-2.0..=-0.5).contains(&v)));
        let l1 = m
            .values()
            .iter()
            .zip(k.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * h
            * h;
        let t = 4f64.powi(-(stage as i32));
        let s: Vec<f64> = mids.iter().map(|&x| smoothed_square(x, e, t)).collect();
        let mut o = 0.0;
        for i in 0..q {
            for j in 0..q {
                o += (0.5 * (s[i] * s[j] - jumps[i] * jumps[j])).abs();
            }
        }
        discrete.push(l1);
        oracle.push(o * hq * hq);
    }
    for (d, o) in discrete.iter().zip(&oracle) {
        assert!((d - o).abs() <= 2e-3 * o, "{d} vs {o}");
    }
    // L¹ ∝ √t once the smoothing width is below the block size, so the step
    // ratio decreases towards 1/2 from above.
    let ratios: Vec<f64> = discrete.windows(2).map(|w| w[1] / w[0]).collect();
    for w in ratios.windows(2) {
        assert!(w[1] < w[0], "{ratios:?}");
    }
    for (r, o) in ratios.iter().zip(oracle.windows(2).map(|w| w[1] / w[0])) {
        assert!((r - o).abs() < 2e-3, "{r} vs {o}");
    }
    assert!(ratios[4] > 0.5 && ratios[4] < 0.52, "{ratios:?}");
}

#[test]
fn mollified_curvature_stays_in_band_for_rough_input() {
    let n = 64;
    let k = Field::from_fn(n, Chart::Torus, |p| {
        let r = (p.x * 37.0 + p.y * 11.0).sin();
        if r > 0.3 {
            -3.0
        } else {
            -0.25
        }
    })
    .unwrap();
    for s in 1..6 {
        let m = mollify_curvature(&k, s, 4.0).unwrap();
        assert!(m.values().iter().all(|&v| (-4.0..=-0.25).contains(&v)));
    }
}

#[test]
fn cusp_continuation_stage_areas_follow_gauss_bonnet() {
    let div = Divisor::new(vec![Point::new(0.5, 0.5)], vec![-1.0]).unwrap();
    let sched =
        ContinuationSchedule::cusp_default(&div, &CurvatureTarget::Constant(-1.0), 6).unwrap();
    let run = run_continuation(&sched, 64, &SolverOptions::default()).unwrap();
    assert_eq!(run.stages.len(), 6);
    for s in &run.stages {
        let exact = 2.0 * PI * (1.0 - 2f64.powi(-(s.k as i32)));
        assert!(
            (s.area - exact).abs() < 1e-9 * exact,
            "stage {}: {} vs {exact}",
            s.k,
            s.area
        );
        assert!(s.within_area_bounds);
        assert!(s.gb_defect <= 1e-9);
    }
    for w in run.stages.windows(2) {
        assert!(w[1].area > w[0].area);
    }
    assert!((run.extrapolated_area.unwrap() - 2.0 * PI).abs() < 1e-9);
}

#[test]
fn one_step_schedule_matches_direct_solve() {
    let div = Divisor::new(vec![Point::new(0.3, 0.7)], vec![-0.5]).unwrap();
    let spec = CurvatureSpec::constant(-1.0).unwrap();
    let stage = Stage {
        index: 1,
        weights: vec![-0.5],
        curvature: spec.clone(),
    };
    let sched = ContinuationSchedule::new(div.clone(), vec![stage], true).unwrap();
    let run = run_continuation(&sched, 64, &SolverOptions::default()).unwrap();
    let direct = newton_solve(&spec, &singular_part(&div, 64).unwrap(), None, 1e-10).unwrap();
    let diff = run
        .last
        .v
        .zip_with(&direct.v, |a, b| a - b)
        .unwrap()
        .max_abs();
    assert!(diff < 1e-8, "{diff}");
    assert!(run.extrapolated_area.is_none());
}

#[test]
fn warm_and_cold_starts_agree() {
    let div = Divisor::new(
        vec![Point::new(0.25, 0.25), Point::new(0.7, 0.6)],
        vec![-1.0, -0.5],
    )
    .unwrap();
    let sched =
        ContinuationSchedule::cusp_default(&div, &CurvatureTarget::Constant(-1.0), 3).unwrap();
    let warm = run_continuation(&sched, 64, &SolverOptions::default()).unwrap();
    let cold =
        run_continuation(&sched.with_warm_start(false), 64, &SolverOptions::default()).unwrap();
    let diff = warm
        .last
        .v
        .zip_with(&cold.last.v, |a, b| a - b)
        .unwrap()
        .max_abs();
    assert!(diff < 1e-8, "{diff}");
}

#[test]
fn rough_curvature_continuation_respects_area_bounds() {
    let div = Divisor::new(vec![Point::new(0.5, 0.5)], vec![-1.0]).unwrap();
    let k = Field::from_fn(64, Chart::Torus, |p| {
        if (p.x < 0.5) ^ (p.y < 0.5) {
            -2.0
        } else {
            -1.0
        }
    })
    .unwrap();
    let target = CurvatureTarget::Grid {
        field: k,
        lambda: 2.0,
    };
    let sched = ContinuationSchedule::cusp_default(&div, &target, 4).unwrap();
    let run = run_continuation(&sched, 64, &SolverOptions::default()).unwrap();
    assert!(run.stages.iter().all(|s| s.within_area_bounds));
    // K e^{2u} integrates to 2πχ regardless of K.
    for s in &run.stages {
        assert!(s.gb_defect < 1e-9);
    }
}

#[test]
fn negative_curvature_solution_has_no_concentration() {
    let div = Divisor::new(vec![Point::new(0.3, 0.7)], vec![-0.5]).unwrap();
    let sol = newton_solve(
        &CurvatureSpec::constant(-1.0).unwrap(),
        &singular_part(&div, 128).unwrap(),
        None,
        1e-10,
    )
    .unwrap();
    let rep = no_bubble_scan(
        &MassSample::from_solution(&sol),
        &[0.0625, 0.125, 0.25],
        1.0,
    )
    .unwrap();
    assert!(rep.flags.is_empty(), "{:?}", rep.flags);
    assert!(rep.max_mass() > 0.0);
}

#[test]
fn spherical_cap_is_flagged_at_its_centre() {
    let (lambda, r) = (0.05, 0.25);
    let q = Point::new(0.0, 0.0);
    let cap =
        FnField::new(move |p: Point| (2.0 * lambda / (lambda * lambda + (p - q).norm_sq())).ln());
    let sample = MassSample::from_closed_form(&cap, 1.0, 512, 1.0).unwrap();
    let rep = no_bubble_scan(&sample, &[r], 1.0).unwrap();
    let best = rep
        .flags
        .iter()
        .max_by(|a, b| a.mass.total_cmp(&b.mass))
        .unwrap();
    assert!((best.center - q).norm() < 1e-12);
    let exact = 4.0 * PI * r * r / (lambda * lambda + r * r);
    assert!(
        (best.mass - exact).abs() < 1e-2 * exact,
        "{} vs {exact}",
        best.mass
    );
}
