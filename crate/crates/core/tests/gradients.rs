//! Backpropagation against central finite differences.

#[path = "common/gradcheck.rs"]
mod gradcheck;

use gradcheck::{perceptron_case, pspbd_case};
use proptest::prelude::*;

#[test]
fn perceptron_without_hidden_layer() {
    for s in 0..4 {
        perceptron_case(s, None, 0.5).unwrap();
    }
}

#[test]
fn perceptron_with_hidden_layer() {
    for s in 0..4 {
        perceptron_case(s, Some(6), 0.75).unwrap();
    }
}

#[test]
fn pspbd_shared_and_multi_head() {
    for s in 0..4 {
        pspbd_case(s, true).unwrap();
        pspbd_case(s, false).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn perceptron_gradients_match(s in any::<u64>(), hidden in prop::option::of(2usize..8), lambda in 0.0f32..1.0) {
        perceptron_case(s, hidden, lambda).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn pspbd_gradients_match(s in any::<u64>(), shared in any::<bool>()) {
        pspbd_case(s, shared).map_err(TestCaseError::fail)?;
    }
}
