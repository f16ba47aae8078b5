use mackrl_core::approx::Architecture;
use mackrl_core::envs::{EnvRng, Environment, MatrixGame, MatrixGameConfig, Transition};
use mackrl_core::partition::AgentSet;
use mackrl_core::rng::{keyed_stream, Domain};
use mackrl_core::trainer::{
    collect, train, update, Algorithm, DelegationStats, Learner, RunConfig,
};
use mackrl_core::tree::{GroupSampler, Perception, SelectionMode};

fn quick_matrix(algorithm: Algorithm, seed: u64) -> RunConfig {
    let mut c = RunConfig::matrix(algorithm, 2.0 / 3.0, 0.1, seed);
    c.total_env_steps = 3_000;
    c.eval_interval = 1_000;
    c
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn runs_reproduce_bit_exactly() {
    for alg in [Algorithm::Mackrl, Algorithm::Iac, Algorithm::CkJal] {
        let a = train(&quick_matrix(alg, 5)).unwrap();
        let b = train(&quick_matrix(alg, 5)).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(
                (&x.metric, x.env_steps, x.value.to_bits()),
                (&y.metric, y.env_steps, y.value.to_bits())
            );
        }
        assert_eq!(
            bits(&a.learner.tree.flat_params()),
            bits(&b.learner.tree.flat_params())
        );
        let c = train(&quick_matrix(alg, 6)).unwrap();
        assert_ne!(
            bits(&a.learner.tree.flat_params()),
            bits(&c.learner.tree.flat_params())
        );
    }
}

#[test]
fn short_grid_run_reproduces() {
    let mut cfg = RunConfig::grid(Algorithm::Mackrl, 2);
    cfg.total_env_steps = 2_000;
    cfg.eval_interval = 1_000;
    cfg.eval_episodes = 5;
    let a = train(&cfg).unwrap();
    let b = train(&cfg).unwrap();
    assert_eq!(a.records, b.records);
    assert!(a.records.iter().all(|r| r.value.is_finite()));
}

#[test]
fn greedy_collection_is_identical_for_identical_seeds() {
    let cfg = quick_matrix(Algorithm::Mackrl, 1);
    let learner = Learner::for_config(&cfg).unwrap();
    let env = MatrixGame::new(MatrixGameConfig::from_ck_fraction(2.0 / 3.0, 0.1).unwrap());
    let run = |first| {
        let mut stats = DelegationStats::default();
        collect(
            &env,
            &learner.tree,
            SelectionMode::Greedy,
            9,
            first,
            32,
            8,
            &mut stats,
        )
        .unwrap()
    };
    let (a, b) = (run(0), run(0));
    assert_eq!(a, b);
    assert_ne!(
        a.episodes
            .iter()
            .map(|e| e.steps[0].state.clone())
            .collect::<Vec<_>>(),
        run(32)
            .episodes
            .iter()
            .map(|e| e.steps[0].state.clone())
            .collect::<Vec<_>>()
    );
}

#[test]
fn full_exploration_gives_uniform_joint_actions() {
    const EPISODES: usize = 50_000;
    let cfg = quick_matrix(Algorithm::Mackrl, 3);
    let mut learner = Learner::for_config(&cfg).unwrap();
    // Away from uniform so that only exploration can flatten the policy.
    learner.tree.set_delegate_bias(-4.0);
    let env = MatrixGame::new(MatrixGameConfig::from_ck_fraction(2.0 / 3.0, 0.0).unwrap());
    let mode = SelectionMode::Sample {
        epsilon: 1.0,
        sampler: GroupSampler::InverseCdf,
    };
    let mut stats = DelegationStats::default();
    let batch = collect(&env, &learner.tree, mode, 4, 0, EPISODES, 8, &mut stats).unwrap();
    let mut counts = [0u64; 25];
    for ep in &batch.episodes {
        let u = &ep.steps[0].actions;
        counts[u[0] * 5 + u[1]] += 1;
    }
    let e = EPISODES as f64 / 25.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // 24 degrees of freedom: mean 24, sd ~6.9; 3 sd above the mean.
    assert!(chi2 < 24.0 + 3.0 * 48f64.sqrt(), "chi2 {chi2}");
    // Delegation at uniform pair controllers: 1 in 26.
    let rate = stats.overall().unwrap();
    assert!((rate - 1.0 / 26.0).abs() < 0.01, "delegation rate {rate}");
}

/// Two agents, two actions, three silent steps.
#[derive(Clone)]
struct Silent {
    t: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct Nothing;

impl Perception for Silent {
    type View = Nothing;

    fn n_agents(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn group_dim(&self, _size: usize) -> usize {
        1
    }

    fn group_features(&self, _view: &Nothing, _owner: usize, _group: AgentSet, out: &mut Vec<f64>) {
        out.push(1.0);
    }

    fn own_dim(&self) -> usize {
        1
    }

    fn own_features(&self, _view: &Nothing, _agent: usize, out: &mut Vec<f64>) {
        out.push(1.0);
    }
}

impl Environment for Silent {
    fn reset(&mut self, _rng: &mut EnvRng) {
        self.t = 0;
    }

    fn views(&self) -> Vec<Nothing> {
        vec![Nothing, Nothing]
    }

    fn step(&mut self, _joint: &[usize], _rng: &mut EnvRng) -> mackrl_core::Result<Transition> {
        self.t += 1;
        Ok(Transition {
            reward: 0.0,
            done: self.t >= 3,
        })
    }

    fn horizon(&self) -> usize {
        3
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn state_features(&self, out: &mut Vec<f64>) {
        out.push(self.t as f64);
    }

    fn ck_richness(&self, _view: &Nothing, _owner: usize, _group: AgentSet) -> Option<usize> {
        Some(0)
    }
}

#[test]
fn zero_advantage_leaves_parameters_unchanged() {
    let env = Silent { t: 0 };
    for alg in [
        Algorithm::Mackrl,
        Algorithm::CentralV,
        Algorithm::Iac,
        Algorithm::Jal,
    ] {
        let mut cfg = RunConfig::grid(alg, 0);
        cfg.model.critic = Architecture::Linear;
        let mut rng = keyed_stream(Domain::Initialisation, 0, 0, 0);
        let mut learner = Learner::new(&env, &cfg, &mut rng).unwrap();
        for c in &mut learner.critics {
            c.head.params.fill(0.0);
            c.target.params.fill(0.0);
        }
        let before = learner.clone();
        let mode = SelectionMode::Sample {
            epsilon: 0.2,
            sampler: GroupSampler::InverseCdf,
        };
        let mut stats = DelegationStats::default();
        let batch = collect(&env, &learner.tree, mode, 1, 0, 8, 4, &mut stats).unwrap();
        let up = update(&env, &mut learner, &batch, 0.2, &cfg.hyper).unwrap();
        assert_eq!(up.mean_advantage, 0.0);
        assert_eq!(
            bits(&learner.tree.flat_params()),
            bits(&before.tree.flat_params()),
            "{alg:?}"
        );
        for (a, b) in learner.critics.iter().zip(&before.critics) {
            assert_eq!(bits(&a.head.params), bits(&b.head.params));
        }
    }
}

/// With `lr = eps = L` and large `L`, Adam's first step is `g L / (|g| + L)`, so
/// the update exposes the ascent direction it accumulated.
#[test]
fn matrix_update_is_reinforce_with_baseline_on_the_marginal() {
    const L: f64 = 1e6;
    const BASELINE: f64 = 0.4;
    const EPSILON: f64 = 0.1;
    let mut cfg = quick_matrix(Algorithm::Mackrl, 8);
    cfg.env = mackrl_core::trainer::EnvConfig::Matrix {
        ck_fraction: 2.0 / 3.0,
        flip_p: 0.0,
    };
    cfg.model.delegate_bias = 0.0;
    cfg.hyper.actor_lr = L;
    cfg.hyper.adam_eps = L;
    cfg.hyper.critic_lr = 1e-300;
    let env = MatrixGame::new(MatrixGameConfig::from_ck_fraction(2.0 / 3.0, 0.0).unwrap());
    let mut learner = Learner::for_config(&cfg).unwrap();
    let mut rng = keyed_stream(Domain::Verification, 8, 1, 0);
    let mut p = learner.tree.flat_params();
    for x in &mut p {
        *x = rand::Rng::random_range(&mut rng, -1.0..1.0);
    }
    learner.tree.set_flat_params(&p).unwrap();
    for c in &mut learner.critics {
        c.head.set_output_offset(0, BASELINE);
        c.target.set_output_offset(0, BASELINE);
    }

    let mode = SelectionMode::Sample {
        epsilon: EPSILON,
        sampler: GroupSampler::InverseCdf,
    };
    let mut stats = DelegationStats::default();
    let batch = collect(&env, &learner.tree, mode, 8, 0, 16, 8, &mut stats).unwrap();

    // Expected ascent direction from central differences of log P(u).
    let tree = learner.tree.clone();
    let root = tree.nodes()[tree.root()].group;
    let n = batch.episodes.len() as f64;
    let mut expected = vec![0.0; p.len()];
    let h = 1e-6;
    for ep in &batch.episodes {
        let step = &ep.steps[0];
        let adv = step.reward - BASELINE;
        let mut t = tree.clone();
        let mut q = p.clone();
        for i in 0..p.len() {
            q[i] = p[i] + h;
            t.set_flat_params(&q).unwrap();
            let up = t
                .joint_policy(&env, &step.views, root, &step.actions, EPSILON)
                .unwrap()
                .ln();
            q[i] = p[i] - h;
            t.set_flat_params(&q).unwrap();
            let down = t
                .joint_policy(&env, &step.views, root, &step.actions, EPSILON)
                .unwrap()
                .ln();
            q[i] = p[i];
            expected[i] += adv * (up - down) / (2.0 * h) / n;
        }
    }

    update(&env, &mut learner, &batch, EPSILON, &cfg.hyper).unwrap();
    let after = learner.tree.flat_params();
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let step = after[i] - p[i];
        let g = step * L / (L - step.abs());
        worst = worst.max((g - expected[i]).abs());
    }
    let scale = expected.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(scale > 1e-3, "degenerate batch");
    assert!(
        worst <= 1e-6 + 1e-5 * scale,
        "worst abs diff {worst} at scale {scale}"
    );
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = quick_matrix(Algorithm::Mackrl, 0);
    c.hyper.lambda = 1.5;
    assert!(train(&c).is_err());
    let mut c = quick_matrix(Algorithm::Mackrl, 0);
    c.hyper.actor_lr = 0.0;
    assert!(c.validate().is_err());
    let mut c = quick_matrix(Algorithm::Mackrl, 0);
    c.partition_subsample = Some(0);
    assert!(c.validate().is_err());
}
