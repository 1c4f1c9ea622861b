mod common;

use common::round_trip;

#[test]
fn noiseless_recovery_within_one_percent() {
    for start in [1, 2] {
        let worst = round_trip(None, start);
        assert!(worst < 0.01, "start {start}: worst error {worst}");
    }
}

#[test]
fn noisy_recovery_within_five_percent() {
    let ok = (0..6).filter(|s| round_trip(Some(100 + s), 200 + s) < 0.05).count();
    assert!(ok >= 5, "{ok}/6 fits within 5%");
}
