//! Metric CSV: `run_id,seed,env_steps,phase,metric,value`, one row per record.

use std::io::{Read, Write};

use mackrl_core::trainer::MetricRecord;

use crate::error::{HarnessError, Result};

pub const HEADER: [&str; 6] = ["run_id", "seed", "env_steps", "phase", "metric", "value"];

/// Writes `records`; a non-finite value aborts before anything is written.
pub fn write_metrics<W: Write>(out: W, records: &[MetricRecord]) -> Result<()> {
    if let Some(r) = records.iter().find(|r| !r.value.is_finite()) {
        return Err(HarnessError::NonFinite {
            metric: r.metric.clone(),
            value: r.value,
            env_steps: r.env_steps,
        });
    }
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::io("<csv>", e))?;
    Ok(())
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(HarnessError::Usage(format!(
            "unexpected metric header {header:?}"
        )));
    }
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Value of the last evaluation `return` record.
pub fn final_eval_return(records: &[MetricRecord]) -> Option<f64> {
    records
        .iter()
        .rev()
        .find(|r| r.phase == mackrl_core::trainer::Phase::Eval && r.metric == "return")
        .map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mackrl_core::trainer::Phase;

    fn rec(value: f64) -> MetricRecord {
        MetricRecord {
            run_id: "r".into(),
            seed: 3,
            env_steps: 10,
            phase: Phase::Eval,
            metric: "return".into(),
            value,
        }
    }

    #[test]
    fn round_trip() {
        let rs = vec![rec(0.5), rec(-1.25e-7)];
        let mut buf = Vec::new();
        write_metrics(&mut buf, &rs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("run_id,seed,env_steps,phase,metric,value\n"));
        assert!(text.contains(",eval,return,"));
        assert_eq!(read_metrics(buf.as_slice()).unwrap(), rs);
    }

    #[test]
    fn nan_is_refused() {
        let mut buf = Vec::new();
        assert!(matches!(
            write_metrics(&mut buf, &[rec(f64::NAN)]),
            Err(HarnessError::NonFinite { .. })
        ));
        assert!(buf.is_empty());
    }
}
