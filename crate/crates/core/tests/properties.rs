use std::path::Path;

use conformal_lab::bubble::area::disk_area;
use conformal_lab::bubble::*;
use conformal_lab::continuation::StageReport;
use conformal_lab::field::{io, Chart, Field, Rescaled, ScalarField};
use conformal_lab::report::{reemit, to_json, RunReport};
use conformal_lab::Point;
use proptest::prelude::*;

fn cap(lambda0: f64, cx: f64) -> SyntheticFamily {
    SyntheticFamily::new(Generator::SphericalCap {
        lambda0,
        center: Point::new(cx, 0.0),
    })
    .unwrap()
}

fn power_seq(idx: &[u64], c: f64, p: f64, d: f64, q: f64) -> BlowupSeq {
    BlowupSeq::from_fn(idx, |k| {
        let k = k as f64;
        (Point::new(d * k.powf(-q), 0.0), c * k.powf(-p))
    })
    .unwrap()
}

fn flip(c: PairClass) -> PairClass {
    match c {
        PairClass::OnTopAB => PairClass::OnTopBA,
        PairClass::OnTopBA => PairClass::OnTopAB,
        other => other,
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e300..1e300f64,
        -1.0..1.0f64,
        Just(f64::MIN_POSITIVE),
        Just(5e-324),
        Just(-0.0),
        Just(std::f64::consts::PI),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pair_classification_is_antisymmetric(
        c1 in 0.1..4.0f64, p1 in 0.5..2.5f64, d1 in -1.0..1.0f64, q1 in 0.3..2.0f64,
        c2 in 0.1..4.0f64, p2 in 0.5..2.5f64, d2 in -1.0..1.0f64, q2 in 0.3..2.0f64,
    ) {
        let idx: Vec<u64> = (1..=12).map(|j| 4u64.pow(j)).collect();
        let tol = TrendTolerances::default();
        let a = power_seq(&idx, c1, p1, d1, q1);
        let b = power_seq(&idx, c2, p2, d2, q2);
        prop_assert_eq!(classify_pair(&a, &a, tol).unwrap(), PairClass::EssentiallySame);
        let ab = classify_pair(&a, &b, tol).unwrap();
        let ba = classify_pair(&b, &a, tol).unwrap();
        prop_assert_eq!(ba, flip(ab));
    }

    #[test]
    fn rescaling_preserves_area(
        lambda0 in 0.2..2.0f64, cx in -0.2..0.2f64,
        x in -0.1..0.1f64, r in 0.01..0.3f64, t in 0.1..2.0f64, k in 0u32..8,
    ) {
        let fam = cap(lambda0, cx);
        let u = fam.member(k).unwrap();
        let c = Point::new(x, 0.0);
        let v = Rescaled { inner: &u, center: c, scale: r };
        let lhs = disk_area(&v, Point::ORIGIN, t).unwrap();
        let rhs = disk_area(&u, c, t * r).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300), "{lhs} vs {rhs}");
    }

    #[test]
    fn nested_frames_compose(
        lambda0 in 0.2..2.0f64, cx in -0.2..0.2f64,
        a in 0.2..0.8f64, b in 0.9..1.5f64, s in 0.1..2.0f64,
        y0 in -0.3..0.3f64, y1 in -0.3..0.3f64,
    ) {
        let fam = cap(lambda0, cx);
        let idx: Vec<u64> = (3..11).collect();
        let outer = BlowupSeq::from_fn(&idx, |k| (Point::new(y0, 0.0), 2f64.powf(-a * k as f64))).unwrap();
        let inner = BlowupSeq::from_fn(&idx, |k| {
            (Point::new(cx, y1 * 2f64.powf(-b * k as f64)), s * 2f64.powf(-b * k as f64))
        })
        .unwrap();
        let frames = inner.relative_to(&outer).unwrap();
        for (i, &k) in idx.iter().enumerate() {
            let u = fam.member(k as u32).unwrap();
            let direct = Rescaled { inner: &u, center: inner.centers()[i], scale: inner.radii()[i] };
            let base = Rescaled { inner: &u, center: outer.centers()[i], scale: outer.radii()[i] };
            let (y, l) = frames[i];
            let nested = Rescaled { inner: &base, center: y, scale: l };
            for p in [Point::new(0.2, 0.1), Point::new(-0.7, 0.4)] {
                if direct.contains(p) {
                    prop_assert!((direct.value(p) - nested.value(p)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn neck_annuli_add_up_to_total(
        lambda0 in 0.2..2.0f64, k in 0u32..8, r_in in 1e-4..0.05f64, span in 1.5..200.0f64,
    ) {
        let fam = cap(lambda0, 0.0);
        let r_out = (r_in * span).min(fam.chart_radius() * 0.9);
        prop_assume!(r_out > r_in * 1.01);
        let prof = neck_area_profile(&fam.member(k).unwrap(), Point::ORIGIN, r_in, r_out).unwrap();
        let sum: f64 = prof.annuli.iter().map(|a| a.area).sum();
        prop_assert!((sum - prof.total).abs() <= 1e-9 * prof.total.max(1e-300));
        prop_assert!(prof.annuli.iter().all(|a| a.area <= prof.sup));
        prop_assert_eq!(prof.annuli.first().unwrap().outer, r_out);
        prop_assert_eq!(prof.annuli.last().unwrap().inner, r_in);
    }

    #[test]
    fn report_json_round_trips(vals in prop::collection::vec(finite(), 1..40), exit in 0i32..3) {
        let mut rep = RunReport::new("continue-cusp");
        rep.exit_code = exit;
        rep.hypothesis_violation = exit == 2;
        rep.stages = vals
            .chunks(5)
            .enumerate()
            .map(|(k, c)| StageReport {
                k: k as u32,
                chi: c[0],
                area: *c.get(1).unwrap_or(&0.0),
                gb_defect: *c.get(2).unwrap_or(&0.0),
                max_local_mass: *c.get(3).unwrap_or(&0.0),
                solve_iters: k * 7,
                residual_norm: *c.get(4).unwrap_or(&0.0),
                within_area_bounds: k % 2 == 0,
            })
            .collect();
        let json = to_json(&rep).unwrap();
        prop_assert_eq!(reemit(&json).unwrap(), json.clone());
        let back: RunReport = serde_json::from_str(&json).unwrap();
        for (s, t) in rep.stages.iter().zip(&back.stages) {
            for (x, y) in [(s.chi, t.chi), (s.area, t.area), (s.gb_defect, t.gb_defect),
                           (s.max_local_mass, t.max_local_mass), (s.residual_norm, t.residual_norm)] {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        prop_assert_eq!(to_json(&back).unwrap(), json);
    }

    #[test]
    fn grid_files_round_trip(
        log_n in 3u32..6, seed in prop::collection::vec(finite(), 1..8), which in 0usize..3,
        radius in 0.1..10.0f64,
    ) {
        let n = 1usize << log_n;
        let values: Vec<f64> = (0..n * n).map(|i| seed[i % seed.len()]).collect();
        let chart = match which {
            0 => Chart::Torus,
            1 => Chart::Disk { radius },
            _ => Chart::Annulus { r_in: radius * 0.01, r_out: radius },
        };
        let field = Field::new(n, chart, values).unwrap();
        let mut buf = Vec::new();
        io::write_to(&field, &mut buf).unwrap();
        let back = io::read_from(buf.as_slice(), Path::new("mem")).unwrap();
        prop_assert_eq!(back.n(), n);
        prop_assert_eq!(back.chart(), chart);
        let same = field.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }
}
