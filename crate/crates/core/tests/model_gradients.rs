mod common;

#[test]
fn composed_paths_match_central_differences() {
    let errors = common::composed_grad_errors();
    assert!(errors.len() >= 14);
    for (path, err) in &errors {
        assert!(*err <= common::GRAD_TOL, "{path}: relative error {err:e}");
    }
}
