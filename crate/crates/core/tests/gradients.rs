mod common;

use common::{critic_gradient_error, head_gradient_error, tree_gradient_error, FD_TOL};

#[test]
fn log_joint_policy_matches_finite_differences() {
    let err = tree_gradient_error(9, 100);
    assert!(err <= FD_TOL, "worst relative error {err:e}");
}

#[test]
fn head_gradients_match_finite_differences() {
    let err = head_gradient_error(5, 101);
    assert!(err <= FD_TOL, "worst relative error {err:e}");
}

#[test]
fn critic_loss_gradient_matches_finite_differences() {
    let err = critic_gradient_error(102);
    assert!(err <= FD_TOL, "worst relative error {err:e}");
}

#[test]
fn three_agent_formula_agrees_with_general_pairwise_formula() {
    use common::{pairwise_formula, random_tree, random_views, three_agent_formula, Toy};
    use mackrl_core::approx::Architecture;
    use mackrl_core::rng::{keyed_stream, Domain};
    use rand::Rng;
    let mut rng = keyed_stream(Domain::Verification, 103, 0, 0);
    let toy = Toy { n: 3, k: 3, dim: 2 };
    for _ in 0..20 {
        let tree = random_tree(&toy, Architecture::Linear, true, &mut rng);
        let views = random_views(&toy, &mut rng);
        let ev = tree
            .evaluate(&toy, &views, rng.random_range(0.0..0.5))
            .unwrap();
        let joint: Vec<usize> = (0..3).map(|_| rng.random_range(0..3)).collect();
        let a = three_agent_formula(&tree, &ev, &joint);
        let b = pairwise_formula(&tree, &ev, &joint);
        assert!((a - b).abs() < 1e-14, "{a} vs {b}");
    }
}
