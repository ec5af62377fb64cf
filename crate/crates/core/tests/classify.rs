use proptest::prelude::*;
use sel_core::numerics::{classify_origin_integral, classify_tail_integral, Antiderivative};

// Reference values computed independently with 30-digit arithmetic.
const INV_T_LN2: f64 = 1.993_559_680_665_363_8;

#[test]
fn power_tails() {
    for (s, conv) in [(0.5, false), (0.9, false), (1.0, false), (1.03, true), (1.1, true), (2.0, true)] {
        let v = classify_tail_integral(|t: f64| Ok(t.powf(-s)), 1.0, 1e-10).unwrap();
        assert_eq!(v.is_convergent(), conv, "s={s}: {v:?}");
        assert_eq!(v.is_divergent(), !conv, "s={s}: {v:?}");
        if conv {
            let exact = 1.0 / (s - 1.0);
            assert!((v.value().unwrap() - exact).abs() < 1e-8 * exact, "s={s}: {v:?}");
        }
    }
}

#[test]
fn power_origin() {
    for (s, conv) in [(0.5, true), (0.9, true), (1.0, false), (1.5, false)] {
        let v = classify_origin_integral(|t: f64| Ok(t.powf(-s)), 1.0, 1e-10).unwrap();
        assert_eq!(v.is_convergent(), conv, "s={s}: {v:?}");
        if conv {
            assert!((v.value().unwrap() - 1.0 / (1.0 - s)).abs() < 1e-7, "s={s}: {v:?}");
            assert!((v.slope() + s).abs() < 1e-6);
        }
    }
}

#[test]
fn logarithmic_tails() {
    let v = classify_tail_integral(|t: f64| Ok(1.0 / (t * (1.0 + t).ln().powi(2))), 1.0, 1e-10).unwrap();
    let (value, err) = match v {
        sel_core::numerics::ConvergenceVerdict::Convergent { value, err, .. } => (value, err),
        other => panic!("{other:?}"),
    };
    assert!((value - INV_T_LN2).abs() <= err, "{value} ± {err}");
    assert!(err < 1e-4);

    let v = classify_tail_integral(|t: f64| Ok(1.0 / (t * (1.0 + t).ln())), 1.0, 1e-10).unwrap();
    assert!(!v.is_convergent(), "{v:?}");
}

#[test]
fn keller_osserman_integrands() {
    let ko = |f: fn(f64) -> f64| {
        let ff = move |t: f64| Ok(f(t));
        let a = Antiderivative::new(&ff, 1e300, 1e-13).unwrap();
        classify_tail_integral(|t: f64| Ok(a.eval(&ff, t)?.powf(-0.5)), 1.0, 1e-10).unwrap()
    };
    let v = ko(|t| t * t);
    assert!((v.value().unwrap() - 12f64.sqrt()).abs() < 1e-9, "{v:?}");
    assert!(ko(|t| t).is_divergent());
    assert!(ko(|t| t * (1.0 + t).ln()).is_divergent());
    assert!(ko(|t| t * (1.0 + t).ln().powi(4)).is_convergent());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn clear_powers_classify(s in prop_oneof![0.2f64..0.9, 1.1f64..4.0]) {
        let v = classify_tail_integral(|t: f64| Ok(t.powf(-s)), 1.0, 1e-9).unwrap();
        prop_assert_eq!(v.is_convergent(), s > 1.0);
        if s > 1.0 {
            prop_assert!((v.value().unwrap() * (s - 1.0) - 1.0).abs() < 1e-7);
        }
    }
}
