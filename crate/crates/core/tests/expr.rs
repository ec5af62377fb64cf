use proptest::prelude::*;
use sel_core::expr::{Expr, Func};
use sel_core::{parse_expression, ScalarFn};

/// Trees that stay finite and differentiable on `[0.2, 1.5]`.
fn smooth_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(0.25f64..3.0).prop_map(Expr::Const), Just(Expr::Var)];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), 1u8..4).prop_map(|(a, k)| Expr::Pow(Box::new(a), Box::new(Expr::Const(k as f64)))),
            (inner.clone(), prop::sample::select(vec![Func::Sin, Func::Cos, Func::Atan, Func::Exp]))
                .prop_map(|(a, f)| Expr::Call(f, Box::new(a))),
        ]
    })
}

fn central_difference(e: &Expr, t: f64) -> f64 {
    let d = |h: f64| (e.eval(t + h).unwrap() - e.eval(t - h).unwrap()) / (2.0 * h);
    let (a, b) = (d(1e-3), d(5e-4));
    (4.0 * b - a) / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn derivative_matches_finite_differences(e in smooth_expr(), t in 0.2f64..1.5) {
        let v = e.eval(t).unwrap();
        prop_assume!(v.abs() < 1e6);
        let exact = e.differentiate().eval(t).unwrap();
        let fd = central_difference(&e, t);
        prop_assume!(exact.abs() < 1e6);
        prop_assert!((exact - fd).abs() <= 1e-5 * (1.0 + exact.abs()), "{e}: {exact} vs {fd}");
    }

    #[test]
    fn printed_form_parses_back_to_the_same_tree(e in smooth_expr()) {
        let printed = e.to_string();
        let back = parse_expression(&printed).unwrap();
        prop_assert_eq!(&back, &e);
    }

    #[test]
    fn power_values_match_powf(p in -3.0f64..5.0, t in 0.01f64..50.0) {
        let f = ScalarFn::parse(&format!("t^({p})")).unwrap();
        let v = f.eval(t).unwrap();
        prop_assert!((v - t.powf(p)).abs() <= 1e-13 * t.powf(p));
        let d = f.eval_derivative(t).unwrap();
        prop_assert!((d - p * t.powf(p - 1.0)).abs() <= 1e-12 * (p * t.powf(p - 1.0)).abs() + 1e-300);
    }
}

#[test]
fn precedence_and_associativity() {
    let e = ScalarFn::parse("-t^2").unwrap();
    assert_eq!(e.eval(3.0).unwrap(), -9.0);
    let e = ScalarFn::parse("2^3^2").unwrap();
    assert_eq!(e.eval(0.0).unwrap(), 512.0);
    let e = ScalarFn::parse("t*ln(1+t)^4").unwrap();
    let t: f64 = 2.5;
    assert!((e.eval(t).unwrap() - t * (1.0 + t).ln().powi(4)).abs() < 1e-13);
}

#[test]
fn domain_violations_are_errors() {
    assert!(ScalarFn::parse("ln(t)").unwrap().eval(-1.0).is_err());
    assert!(ScalarFn::parse("sqrt(t)").unwrap().eval(-1.0).is_err());
    assert!(ScalarFn::parse("t^(-1/2)").unwrap().eval(0.0).is_err());
    assert!(ScalarFn::parse("(-t)^0.5").unwrap().eval(2.0).is_err());
}

#[test]
fn syntax_errors_name_the_offset() {
    let e = parse_expression("t + * 2").unwrap_err();
    assert_eq!(e.offset(), 4);
    let e = parse_expression("foo(t)").unwrap_err();
    assert!(e.to_string().contains("foo"));
}
