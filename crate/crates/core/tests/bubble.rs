use std::f64::consts::{E, PI};
use std::path::Path;

use conformal_lab::bubble::area::{annulus_area, disk_area, CylinderView};
use conformal_lab::bubble::*;
use conformal_lab::field::{Chart, Field, FnField, Rescaled, ScalarField};
use conformal_lab::measure::ResidueOptions;
use conformal_lab::Point;

fn fixture(name: &str) -> Fixture {
    Fixture::load(
        &Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("fixtures")
            .join(format!("{name}.toml")),
    )
    .unwrap()
}

fn identity(fx: &Fixture) -> AreaIdentityReport {
    area_identity_check(
        &fx.family,
        &fx.blowup_sequences().unwrap(),
        fx.window,
        &fx.indices(),
        HypothesisThresholds::default(),
    )
    .unwrap()
}

#[test]
fn cap_identity_defects_match_closed_form() {
    let fx = fixture("spherical-cap");
    let rep = identity(&fx);
    assert!(!rep.hypothesis_violation, "{:?}", rep.hypotheses);
    assert_eq!(rep.bubble_areas, vec![4.0 * PI]);
    assert_eq!(rep.limit_area, 0.0);
    assert!(rep.ghost);
    for (&k, d) in rep.ks.iter().zip(&rep.defects) {
        let l = 2f64.powi(-(k as i32));
        let exact = 4.0 * PI * l * l / (l * l + 0.25);
        assert!((d.abs() - exact).abs() < 1e-6, "k = {k}: {d} vs {exact}");
    }
    assert!(rep.defect < 1e-9, "{:?}", rep.extrapolated);
    assert!(rep.extrapolated.error < 1e-9);
}

#[test]
fn smooth_family_has_vanishing_defect() {
    let rep = identity(&fixture("smooth-convergent"));
    assert!(!rep.hypothesis_violation);
    assert!(rep.bubble_areas.is_empty());
    assert!(!rep.ghost);
    // Hyperbolic disk of radius 2: Area(D_{1/2}) = 4π·(1/4)/(4 − 1/4).
    assert!((rep.limit_area - 4.0 * PI / 15.0).abs() < 1e-12);
    assert!(rep.defect <= 1e-8, "{:?}", rep.extrapolated);
}

#[test]
fn flat_neck_keeps_area_and_violates_sign_hypothesis() {
    let fx = fixture("flat-neck");
    let rep = identity(&fx);
    assert!(rep.hypothesis_violation);
    assert!(!rep.hypotheses.sign_ok);
    assert!((rep.defect - 2.0 * PI).abs() < 1e-8, "{}", rep.defect);

    // Neck region r_k < r < 1/4: total 2π although every e-annulus carries 2π/k².
    for k in [4u32, 8, 12] {
        let u = fx.family.member(k).unwrap();
        let r_in = 0.25 * (-(k as f64).powi(2)).exp();
        let prof = neck_area_profile(&u, Point::ORIGIN, r_in, 0.25).unwrap();
        assert!((prof.total - 2.0 * PI).abs() < 1e-9, "{}", prof.total);
        assert!((prof.sup - 2.0 * PI / (k * k) as f64).abs() < 1e-9);
    }
}

#[test]
fn three_circle_linear_model_matches_closed_form() {
    for b in [-0.25, -1.0, -4.0] {
        for l in [5.0, 10.0, 20.0] {
            let fam = SyntheticFamily::new(Generator::LinearCylinder { a: 0.3, b }).unwrap();
            let kappa = -b / 2.0;
            let rep = three_circle_check(&fam, 1, kappa, l, 0.0).unwrap();
            let exact = |i: f64| {
                (PI / b) * (2.0 * 0.3 + 2.0 * b * (i - 1.0) * l).exp() * ((2.0 * b * l).exp() - 1.0)
            };
            assert!(((rep.area_q1 - exact(1.0)) / exact(1.0)).abs() < 1e-10);
            assert!(((rep.area_q2 - exact(2.0)) / exact(2.0)).abs() < 1e-10);
            assert!(rep.closed_form_error().unwrap() < 1e-10);
            assert_eq!(rep.hypothesis, checks::FluxSign::Decreasing);
            assert_eq!(rep.inequality_holds, Some(true));
        }
    }
}

#[test]
fn flat_cylinder_violates_flux_hypothesis() {
    let fx = fixture("flat-cylinder");
    let tc = fx.three_circle.unwrap();
    let rep = three_circle_check(&fx.family, tc.k, tc.kappa, tc.length, tc.offset).unwrap();
    assert!(rep.hypothesis_violated());
    assert_eq!(rep.inequality_holds, None);
}

#[test]
fn annulus_form_reproduces_cylinder_areas() {
    // u = β log r is v = −(β + 1) t on the cylinder.
    let (beta, l) = (-0.5, 10.0);
    let b = -(beta + 1.0);
    let fam = SyntheticFamily::new(Generator::Cone { beta }).unwrap();
    let rep = three_circle_check(&fam, 1, 0.25, l, 2.0 * l).unwrap();
    let exact = |i: f64| {
        (PI / b) * (2.0 * b * (2.0 * l + (i - 1.0) * l)).exp() * ((2.0 * b * l).exp() - 1.0)
    };
    assert!(((rep.area_q1 - exact(1.0)) / exact(1.0)).abs() < 1e-10);
    assert!(((rep.area_q2 - exact(2.0)) / exact(2.0)).abs() < 1e-10);
    let u = fam.member(1).unwrap();
    let planar = annulus_area(&u, Point::ORIGIN, (-3.0 * l).exp(), (-2.0 * l).exp()).unwrap();
    assert!(((planar - rep.area_q1) / planar).abs() < 1e-10);
    assert_eq!(rep.inequality_holds, Some(true));
    let v = CylinderView {
        inner: u,
        center: Point::ORIGIN,
    };
    assert!(
        (conformal_lab::bubble::area::CylinderField::value(&v, 0.3, 25.0) - b * 25.0).abs() < 1e-12
    );
}

#[test]
fn neck_profiles_of_model_metrics() {
    // Flat cylinder end: every full e-annulus has area 2π.
    let end = fixture("flat-cylinder-end");
    let neck = end.neck.clone().unwrap();
    let prof = neck_area_profile(
        &end.family.member(1).unwrap(),
        Point::ORIGIN,
        neck.r_in,
        neck.r_out,
    )
    .unwrap();
    for a in prof
        .annuli
        .iter()
        .filter(|a| (a.outer / a.inner - E).abs() < 1e-9)
    {
        assert!((a.area - 2.0 * PI).abs() < 1e-10);
    }
    assert!((prof.total - 2.0 * PI * (neck.r_out / neck.r_in).ln()).abs() < 1e-9);
    let sum: f64 = prof.annuli.iter().map(|a| a.area).sum();
    assert!((sum - prof.total).abs() < 1e-11 * prof.total);

    // Hyperbolic cusp: antiderivative −2π/L(r), L = log(1/r).
    let cusp = fixture("hyperbolic-cusp");
    let neck = cusp.neck.clone().unwrap();
    let prof = neck_area_profile(
        &cusp.family.member(1).unwrap(),
        Point::ORIGIN,
        neck.r_in,
        neck.r_out,
    )
    .unwrap();
    let big_l = |r: f64| (1.0 / r).ln();
    let exact = 2.0 * PI * (1.0 / big_l(neck.r_out) - 1.0 / big_l(neck.r_in));
    assert!(
        (prof.total - exact).abs() < 1e-11,
        "{} vs {exact}",
        prof.total
    );
    for a in &prof.annuli {
        let ex = 2.0 * PI * (1.0 / big_l(a.outer) - 1.0 / big_l(a.inner));
        assert!((a.area - ex).abs() < 1e-12);
    }

    // Euclidean metric: π r²(1 − e^{−2}).
    let zero = fixture("zero");
    let prof =
        neck_area_profile(&zero.family.member(1).unwrap(), Point::ORIGIN, 0.01, 0.5).unwrap();
    assert!((prof.annuli[0].area - PI * 0.25 * (1.0 - (-2.0f64).exp())).abs() < 1e-13);
}

#[test]
fn vanishing_sup_forces_vanishing_neck_for_signed_families() {
    // Neck D_ρ \ D_{r_k/ρ} around the concentration point, k large, ρ shrinking.
    for name in ["spherical-cap", "smooth-convergent", "hyperbolic-cusp"] {
        let fx = fixture(name);
        assert_ne!(fx.family.sign_class(), SignClass::Violating);
        let k = fx.ks[1];
        let u = fx.family.member(k).unwrap();
        let scale = fx
            .blowup_sequences()
            .unwrap()
            .first()
            .map_or(1e-12, |s| s.radii()[s.len() - 1]);
        let mut prev: Option<(f64, f64)> = None;
        let mut first = None;
        for rho in [0.25, 0.0625, 0.015625, 0.00390625] {
            let p = neck_area_profile(&u, Point::ORIGIN, scale / rho, rho).unwrap();
            if let Some((sup, total)) = prev {
                assert!(
                    p.sup < sup && p.total < total,
                    "{name}: {} {}",
                    p.sup,
                    p.total
                );
            }
            first.get_or_insert((p.sup, p.total));
            prev = Some((p.sup, p.total));
        }
        // The cusp decays only like 1/log(1/ρ), hence the loose factor.
        let (sup, total) = prev.unwrap();
        let (sup0, total0) = first.unwrap();
        assert!(
            sup < 0.25 * sup0 && total < 0.25 * total0,
            "{name}: sup {sup} total {total}"
        );
    }
    // The flat neck has sup → 0 but total 2π: the sign hypothesis is needed.
    let fx = fixture("flat-neck");
    let u = fx.family.member(12).unwrap();
    let p = neck_area_profile(&u, Point::ORIGIN, 0.25 * (-144f64).exp(), 0.25).unwrap();
    assert!(p.sup < 0.05 && (p.total - 2.0 * PI).abs() < 1e-9);
}

#[test]
fn neck_curvature_of_standard_bubble() {
    let opts = ResidueOptions::default();
    let outer = FnField::new(|_p: Point| 0.0);
    let bubble = FnField::new(|y: Point| (2.0 / (1.0 + y.norm_sq())).ln());
    let rep = neck_curvature_limit(&outer, &bubble, Point::ORIGIN, opts).unwrap();
    assert!((rep.value + 4.0 * PI).abs() < 1e-3, "{}", rep.value);
    let beta = 0.7;
    let cone = FnField::new(move |p: Point| beta * p.norm().ln() + p.x);
    let rep = neck_curvature_limit(&cone, &bubble, Point::ORIGIN, opts).unwrap();
    assert!((rep.value + 2.0 * PI * (2.0 + beta)).abs() < 1e-3);

    // A cylinder-to-plane end −2 log|x| has no residue at infinity.
    let cyl = FnField::new(|y: Point| -2.0 * y.norm().ln());
    let rep = neck_curvature_limit(&cone, &cyl, Point::ORIGIN, opts).unwrap();
    assert!(rep.bubble.value.abs() < 1e-6);
    assert!((rep.value + 2.0 * PI * (2.0 + beta)).abs() < 1e-3);
}

#[test]
fn rescaling_cap_gives_standard_bubble() {
    let fam = SyntheticFamily::new(Generator::SphericalCap {
        lambda0: 1.0,
        center: Point::ORIGIN,
    })
    .unwrap();
    let bubble = |y: Point| (2.0 / (1.0 + y.norm_sq())).ln();
    for k in [3u32, 6, 9] {
        let l = 2f64.powi(-(k as i32));
        let v = Rescaled {
            inner: fam.member(k).unwrap(),
            center: Point::ORIGIN,
            scale: l,
        };
        for y in [
            Point::new(0.3, -0.2),
            Point::new(2.0, 1.0),
            Point::new(-5.0, 0.0),
        ] {
            assert!((v.value(y) - bubble(y)).abs() < 1e-12);
        }
        // Area invariance under change of variables.
        let lhs = disk_area(&v, Point::ORIGIN, 3.0).unwrap();
        let rhs = disk_area(&fam.member(k).unwrap(), Point::ORIGIN, 3.0 * l).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
    }
}

#[test]
fn grid_rescale_converges_at_second_order() {
    let lambda = 0.2;
    let cap = move |p: Point| (2.0 * lambda / (lambda * lambda + p.norm_sq())).ln();
    let bubble = |y: Point| (2.0 / (1.0 + y.norm_sq())).ln();
    let mut errs = Vec::new();
    for n in [64, 128, 256] {
        let u = Field::from_fn(n, Chart::Disk { radius: 1.0 }, cap).unwrap();
        let v = rescale(&u, Point::ORIGIN, lambda, 4.0).unwrap();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let y = v.node(i, j);
                if y.norm() < 4.0 {
                    err = err.max((v.get(i, j) - bubble(y)).abs());
                }
            }
        }
        errs.push(err);
    }
    assert!(
        errs[1] < errs[0] / 3.0 && errs[2] < errs[1] / 3.0,
        "{errs:?}"
    );
}

#[test]
fn composition_law_for_nested_frames() {
    // v'_k(x) = v_k(l_k x + y_k) + log l_k with v_k the blow-up at (x_k, r_k).
    let fam = SyntheticFamily::new(Generator::SphericalCap {
        lambda0: 0.5,
        center: Point::new(0.1, 0.0),
    })
    .unwrap();
    let idx: Vec<u64> = (4..12).collect();
    let outer = BlowupSeq::from_fn(&idx, |k| (Point::ORIGIN, 2f64.powi(-(k as i32) / 2))).unwrap();
    let inner = BlowupSeq::from_fn(&idx, |k| {
        (Point::new(0.1, 0.0), 0.5 * 2f64.powi(-(k as i32)))
    })
    .unwrap();
    let frames = inner.relative_to(&outer).unwrap();
    for (i, &k) in idx.iter().enumerate() {
        let u = fam.member(k as u32).unwrap();
        let direct = Rescaled {
            inner: &u,
            center: inner.centers()[i],
            scale: inner.radii()[i],
        };
        let base = Rescaled {
            inner: &u,
            center: outer.centers()[i],
            scale: outer.radii()[i],
        };
        let (y, l) = frames[i];
        let nested = Rescaled {
            inner: &base,
            center: y,
            scale: l,
        };
        for x in [Point::new(0.2, 0.1), Point::new(-1.0, 0.5)] {
            assert!((direct.value(x) - nested.value(x)).abs() < 1e-9);
        }
    }
}

#[test]
fn classification_is_symmetric() {
    let idx: Vec<u64> = (1..=12).map(|j| 4u64.pow(j)).collect();
    let tol = TrendTolerances::default();
    let seqs = [
        BlowupSeq::from_fn(&idx, |k| (Point::ORIGIN, 1.0 / (k as f64).powi(2))).unwrap(),
        BlowupSeq::from_fn(&idx, |k| (Point::ORIGIN, 1.0 / k as f64)).unwrap(),
        BlowupSeq::from_fn(&idx, |k| {
            (Point::new(1.0 / (k as f64).sqrt(), 0.0), 1.0 / k as f64)
        })
        .unwrap(),
        BlowupSeq::from_fn(&idx, |k| (Point::new(0.5 / k as f64, 0.0), 2.0 / k as f64)).unwrap(),
    ];
    for a in &seqs {
        assert_eq!(
            classify_pair(a, a, tol).unwrap(),
            PairClass::EssentiallySame
        );
        for b in &seqs {
            let ab = classify_pair(a, b, tol).unwrap();
            let ba = classify_pair(b, a, tol).unwrap();
            let flipped = match ab {
                PairClass::OnTopAB => PairClass::OnTopBA,
                PairClass::OnTopBA => PairClass::OnTopAB,
                other => other,
            };
            assert_eq!(ba, flipped);
        }
    }
    assert_eq!(
        classify_pair(&seqs[1], &seqs[3], tol).unwrap(),
        PairClass::EssentiallySame
    );
}

#[test]
fn whole_corpus_loads_and_runs() {
    let corpus = load_corpus(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")).unwrap();
    assert!(corpus.len() >= 8);
    for fx in &corpus {
        if let Some(tc) = &fx.three_circle {
            three_circle_check(&fx.family, tc.k, tc.kappa, tc.length, tc.offset).unwrap();
        }
        if let Some(n) = &fx.neck {
            neck_area_profile(&fx.family.member(n.k).unwrap(), n.center, n.r_in, n.r_out).unwrap();
        }
    }
}
