mod common;

#[test]
fn bootstrap_interval_covers_true_iqm() {
    let rate = common::bootstrap_coverage();
    assert!((0.90..=0.99).contains(&rate), "coverage {rate}");
}
