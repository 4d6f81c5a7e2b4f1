mod common;

use guided_rl::actor_critic::{actor_loss_reinforce, LossSample, ScaleStats};
use guided_rl::approx::softmax;

#[test]
fn every_loss_matches_finite_differences() {
    for (name, err) in common::gradient_errors() {
        assert!(err < 1e-4, "{name}: relative error {err:e}");
    }
}

/// Two-armed bandit. With the batch drawn in exact policy proportions the
/// Reinforce gradient w.r.t. the logits is `−π_j (μ_j − J) / S`, the
/// negated policy gradient of `J = Σ π_a μ_a`, whatever the baseline.
#[test]
fn bandit_gradient_matches_closed_form() {
    let net = common::small_net(2);
    let means = [0.2, 0.8];
    let baseline = 0.35;
    let scale = ScaleStats {
        value: 2.0,
        ema_decay: 0.99,
    };
    // (output bias, arm counts) with counts proportional to softmax(bias)
    let cases: [([f64; 2], [usize; 2]); 3] = [
        ([0.0, 0.0], [1, 1]),
        ([0.25f64.ln(), 0.75f64.ln()], [1, 3]),
        ([0.6f64.ln(), 0.4f64.ln()], [3, 2]),
    ];
    for (bias, counts) in cases {
        let mut params = net.zeros();
        let slot = net.layout().get("layer1.bias").unwrap().clone();
        params.values[slot.offset..slot.offset + 2].copy_from_slice(&bias);
        let pi = softmax(&bias);
        let samples: Vec<LossSample> = (0..2)
            .flat_map(|a| {
                (0..counts[a]).map(move |_| LossSample {
                    state: 0,
                    action: a,
                    target: means[a],
                    value: baseline,
                    guide: None,
                })
            })
            .collect();
        let out = actor_loss_reinforce(&net, &params, &samples, &scale).unwrap();
        let j: f64 = pi.iter().zip(&means).map(|(p, m)| p * m).sum();
        let got = &out.grad[slot.offset..slot.offset + 2];
        for a in 0..2 {
            let want = -pi[a] * (means[a] - j) / scale.value;
            let rel = (got[a] - want).abs() / want.abs();
            assert!(rel < 1e-6, "bias {bias:?} arm {a}: {} vs {want}", got[a]);
        }
    }
}
