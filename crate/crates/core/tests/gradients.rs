use coldrec::hgtcore::gradsuite::{cvcl_toy_error, primitive_errors};

const SEEDS: u64 = 20;
const TOL: f64 = 1e-3;

#[test]
fn primitives_match_finite_differences() {
    for (name, worst) in primitive_errors(SEEDS).unwrap() {
        assert!(worst < TOL, "{name}: max relative error {worst:e}");
    }
}

#[test]
fn end_to_end_loss_matches_finite_differences() {
    let worst = cvcl_toy_error(SEEDS).unwrap();
    assert!(worst < TOL, "max relative error {worst:e}");
}
