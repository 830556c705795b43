mod common;

use batle::losses::{head_gradients, LossInputs, LossWeights};
use batle::network::{backward, forward, BackwardScope, Component, DropoutMode};
use common::{analytic, loss_at, max_relative_error, one_hot_weights, random_case};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn backprop_matches_central_differences(seed in 0u64..1_000_000, k in 0usize..6) {
        let case = random_case(seed);
        let w = if k < 5 { one_hot_weights(k) } else { LossWeights::default() };
        let e = max_relative_error(&case, &w, 1e-5, 1e-6);
        prop_assert!(e < 1e-4, "relative error {e:e}");
    }

    #[test]
    fn gradient_is_linear_in_the_weights(seed in 0u64..1_000_000, a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let case = random_case(seed);
        let wa = LossWeights::from_array([a, 0.0, 0.0, 0.0, b]);
        let combined = analytic(&case, &wa);
        let y = analytic(&case, &one_hot_weights(0));
        let r = analytic(&case, &one_hot_weights(4));
        let (c, y, r) = (combined.tensors(|_| true), y.tensors(|_| true), r.tensors(|_| true));
        for i in 0..c.len() {
            for j in 0..c[i].len() {
                let want = a * y[i][j] + b * r[i][j];
                prop_assert!((c[i][j] - want).abs() <= 1e-10 * (1.0 + want.abs()));
            }
        }
    }
}

#[test]
fn discriminator_scope_matches_differences_on_its_own_weights() {
    for seed in 0..8 {
        let case = random_case(500 + seed);
        let w = one_hot_weights(2);
        let inputs = LossInputs::from_combined(&case.data);
        let tape = forward(&case.params, case.data.covariates.view(), DropoutMode::Fixed(&case.masks)).unwrap();
        let up = head_gradients(&tape.output, &inputs, &w, case.params.config.outcome_head).unwrap();
        let scoped = backward(&case.params, &tape, &up, BackwardScope::DiscriminatorOnly).unwrap();
        let full = analytic(&case, &w);

        let only_d = |c: Component| c == Component::Discriminator;
        let (s, f) = (scoped.tensors(only_d), full.tensors(only_d));
        for i in 0..s.len() {
            assert_eq!(s[i], f[i], "seed {seed}: discriminator gradients differ between scopes");
        }
        for t in scoped.tensors(|c| c != Component::Discriminator) {
            assert!(t.iter().all(|&v| v == 0.0), "seed {seed}: scope leaked outside d");
        }
        // Central differences on one discriminator weight.
        let h = 1e-5;
        let mut plus = case.params.clone();
        plus.tensors_mut(only_d)[0][0] += h;
        let mut minus = case.params.clone();
        minus.tensors_mut(only_d)[0][0] -= h;
        let fd = (loss_at(&case, &plus, &w) - loss_at(&case, &minus, &w)) / (2.0 * h);
        assert!((fd - s[0][0]).abs() <= 1e-6 * (1.0 + fd.abs()), "seed {seed}: {fd} vs {}", s[0][0]);
    }
}

#[test]
fn zero_weights_give_zero_gradients() {
    let case = random_case(77);
    let g = analytic(&case, &LossWeights::from_array([0.0; 5]));
    assert!(g.tensors(|_| true).iter().all(|t| t.iter().all(|&v| v == 0.0)));
}
