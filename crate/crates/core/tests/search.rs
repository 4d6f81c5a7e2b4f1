mod common;

use guided_rl::env::EnvSpec;

#[test]
fn large_budget_search_agrees_with_value_iteration() {
    for spec in [EnvSpec::chain(5), EnvSpec::grid(3, 3)] {
        let mdp = spec.build(0.99, 0).unwrap();
        let (agree, total) = common::search_agreement(&mdp, 10_000);
        assert!(agree * 100 >= total * 95, "{}: {agree}/{total}", spec.label());
    }
}
