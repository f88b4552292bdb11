mod common;

use common::{field, gradient_error, CORPUS, POINTS};
use heatkernel::coeffparse::{divergence, CoefficientField};
use proptest::prelude::*;

#[test]
fn corpus_gradients_match_central_differences() {
    for text in CORPUS {
        let f = field(text);
        for x in POINTS {
            let err = gradient_error(&f, x);
            assert!(err <= 1e-6, "{text} at {x:?}: relative error {err:e}");
        }
    }
}

#[test]
fn corpus_round_trips_through_display() {
    for text in CORPUS {
        let f = field(text);
        let again = field(&f.to_string());
        for x in POINTS {
            assert_eq!(f.eval(x).unwrap().to_bits(), again.eval(x).unwrap().to_bits(), "{text}");
        }
    }
}

fn smooth_point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.5f64..2.5, 3)
}

proptest! {
    #[test]
    fn polynomial_gradients_are_exact(x in smooth_point(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let f = CoefficientField::parse(&format!("{a}*x1^2*x2 + {b}*x3^3 - x1*x3"), 3).unwrap();
        let g = f.grad(&x).unwrap();
        let want = [2.0 * a * x[0] * x[1] - x[2], a * x[0] * x[0], 3.0 * b * x[2] * x[2] - x[0]];
        for (gi, wi) in g.iter().zip(want) {
            prop_assert!((gi - wi).abs() <= 1e-12 * wi.abs().max(1.0));
        }
    }

    // The first 19 entries have no kinks; fractional powers need x1 > 0.
    #[test]
    fn smooth_corpus_gradients_at_random_points(x1 in 0.1f64..2.5, rest in prop::collection::vec(-2.5f64..2.5, 2), k in 0usize..19) {
        let x = [x1, rest[0], rest[1]];
        prop_assert!(gradient_error(&field(CORPUS[k]), &x) <= 1e-6);
    }

    #[test]
    fn divergence_is_the_trace_of_the_jacobian(x in smooth_point()) {
        let parts: Vec<_> = ["x1*x2", "sin(x2) + x3^2", "exp(x1 - x3)"].iter().map(|s| field(s)).collect();
        let want = x[1] + x[1].cos() - (x[0] - x[2]).exp();
        let got = divergence(&parts, &x).unwrap();
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
        let node = CoefficientField::divergence_of(&parts).eval(&x).unwrap();
        prop_assert!((node - want).abs() <= 1e-12 * want.abs().max(1.0));
    }
}
