use guided_rl::env::planning::optimal_actions;
use guided_rl::env::EnvSpec;
use guided_rl_demo::{grid_view, two_hot_with_decode, weight_curve};

#[test]
fn grid_search_picks_optimal_actions() {
    let view = grid_view(3, 3, 0.0, 2000, 0).unwrap();
    let mdp = EnvSpec::grid(3, 3).build(0.99, 0).unwrap();
    assert_eq!(view.values.len(), 9);
    assert!(view.search[8].is_empty());
    for s in 0..8 {
        let pi = &view.search[s];
        let best = (0..4).max_by(|a, b| pi[*a].total_cmp(&pi[*b])).unwrap();
        let optimal = optimal_actions(&mdp, &view.values, s, 1e-9);
        assert!(optimal.contains(&best), "state {s}: search {pi:?}, optimal {optimal:?}");
        assert!(optimal.contains(&view.greedy[s]));
    }
}

#[test]
fn two_hot_decodes_to_input() {
    let w = two_hot_with_decode(0.37, 11, -1.0, 1.0).unwrap();
    assert_eq!(w.len(), 12);
    assert!((w[11] - 0.37).abs() < 1e-12);
    assert!((w[..11].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(two_hot_with_decode(0.0, 1, 0.0, 1.0).is_err());
}

#[test]
fn weight_curve_is_clipped_and_monotone() {
    let c = weight_curve(0.7, 5.0, 1.0, 10.0, -1.0, 1.0, 41);
    assert_eq!(c.len(), 41);
    assert_eq!(c[0], 0.7);
    assert!((c[40] - 7.0).abs() < 1e-12);
    assert!(c.windows(2).all(|w| w[1] >= w[0]));
}
