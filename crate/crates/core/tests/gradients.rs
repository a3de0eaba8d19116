mod common;

use cbert_core::heads::HeadKind;
use common::*;

#[test]
fn composed_gradients_match_finite_differences() {
    let fx = synthetic_fixture(3, 5, 20);
    for kind in [HeadKind::Cbert, HeadKind::Event, HeadKind::Masked] {
        let mut model = model_for(kind, tiny_config(fx.vocab.len(), 8, 1, 2, 20));
        jitter(&mut model, 0.3, 1);
        let data = if kind == HeadKind::Masked { &fx.masked } else { &fx.marked };
        for r in data.iter().take(2) {
            let gc = grad_check(&model, r, 1e-4, 1e-6);
            assert!(gc.max_rel_error < 1e-4, "{kind}: {}", gc.worst);
        }
    }
}

#[test]
fn two_layer_gradients_match_finite_differences() {
    let fx = synthetic_fixture(2, 8, 16);
    let mut model = model_for(HeadKind::Event, tiny_config(fx.vocab.len(), 8, 2, 2, 16));
    jitter(&mut model, 0.3, 4);
    let gc = grad_check(&model, &fx.marked[1], 1e-4, 1e-6);
    assert!(gc.max_rel_error < 1e-4, "{}", gc.worst);
}
