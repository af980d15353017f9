mod common;

#[test]
fn later_frames_never_reach_earlier_predictions() {
    assert_eq!(common::causality_check().unwrap(), 20);
}
