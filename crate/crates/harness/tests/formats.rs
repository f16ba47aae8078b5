//! Config, metric and checkpoint formats as properties.

use mackrl_core::trainer::{
    Algorithm, EnvConfig, EvalPolicy, Learner, MetricRecord, Phase, RunConfig,
};
use mackrl_harness::config::config_to_json;
use mackrl_harness::metrics::{read_metrics, write_metrics, HEADER};
use mackrl_harness::{parse_config, Checkpoint};
use proptest::prelude::*;

fn algorithm() -> impl Strategy<Value = Algorithm> {
    prop_oneof![
        Just(Algorithm::Mackrl),
        Just(Algorithm::CentralV),
        Just(Algorithm::Iac),
        Just(Algorithm::Jal),
        Just(Algorithm::CkJal),
    ]
}

prop_compose! {
    fn run_config()(
        alg in algorithm(),
        grid in any::<bool>(),
        f in 0.0..=1.0f64,
        flip in 0.0..=1.0f64,
        seed in any::<u64>(),
        steps in 1u64..1_000_000,
        lr in 1e-6..1.0f64,
        lambda in 0.0..=1.0f64,
        sub in proptest::option::of(1usize..4),
        sample in any::<bool>(),
    ) -> RunConfig {
        let mut c = if grid { RunConfig::grid(alg, seed) } else { RunConfig::matrix(alg, f, flip, seed) };
        c.total_env_steps = steps;
        c.hyper.actor_lr = lr;
        c.hyper.critic_lr = lr / 3.0;
        c.hyper.lambda = lambda;
        c.partition_subsample = sub;
        c.eval_policy = if sample { EvalPolicy::Sample } else { EvalPolicy::Greedy };
        c
    }
}

proptest! {
    #[test]
    fn config_round_trip_is_identity(c in run_config()) {
        let once = parse_config(&config_to_json(&c)).unwrap();
        prop_assert_eq!(&once, &c);
        prop_assert_eq!(config_to_json(&once), config_to_json(&c));
    }

    #[test]
    fn metric_rows_round_trip(
        rows in proptest::collection::vec(
            ("[a-z0-9_=.-]{1,12}", any::<u64>(), any::<u64>(), any::<bool>(), "[a-z_]{1,10}", -1e12..1e12f64),
            0..30,
        )
    ) {
        let records: Vec<MetricRecord> = rows
            .into_iter()
            .map(|(run_id, seed, env_steps, eval, metric, value)| MetricRecord {
                run_id, seed, env_steps, phase: if eval { Phase::Eval } else { Phase::Train }, metric, value,
            })
            .collect();
        let mut buf = Vec::new();
        write_metrics(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        prop_assert_eq!(lines.next().unwrap(), HEADER.join(","));
        for l in lines {
            let fields: Vec<&str> = l.split(',').collect();
            prop_assert_eq!(fields.len(), 6);
            prop_assert!(fields[5].parse::<f64>().unwrap().is_finite());
        }
        prop_assert_eq!(read_metrics(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(seed in any::<u64>(), alg in algorithm(), grid in any::<bool>()) {
        let c = if grid { RunConfig::grid(alg, seed) } else { RunConfig::matrix(alg, 0.5, 0.0, seed) };
        let learner = Learner::for_config(&c).unwrap();
        let ck = Checkpoint::capture(&learner, seed, 0);
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        prop_assert_eq!(&back.header, &ck.header);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.params), bits(&ck.params));
    }
}

#[test]
fn unknown_fields_and_out_of_range_values_are_rejected() {
    let c = RunConfig::matrix(Algorithm::Mackrl, 0.5, 0.0, 0);
    let mut v = serde_json::to_value(&c).unwrap();
    v["env"] = serde_json::json!({ "matrix": { "ck_fraction": 1.5, "flip_p": 0.0 } });
    assert!(parse_config(&v.to_string()).is_err());
    assert!(matches!(c.env, EnvConfig::Matrix { .. }));
}
