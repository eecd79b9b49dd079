//! Parameter sweeps over simulated rounds.

use serde::Serialize;

use super::{run_round, sample_messages, SimConfig, SimError};
use crate::group::PrimeGroup;
use crate::protocol::Variant;

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub groups: usize,
    pub messages: usize,
    /// Rows handled by the busiest group.
    pub touches: usize,
    /// `T·M/G`, the load an even spread gives each group.
    pub expected: f64,
    pub latency_s: f64,
}

pub fn scaling_sweep<G: PrimeGroup>(configs: &[SimConfig]) -> Result<Vec<SweepRow>, SimError> {
    configs
        .iter()
        .map(|cfg| {
            let msgs = sample_messages(cfg.messages, cfg.msg_len, cfg.seed);
            let res = run_round::<G>(cfg.clone(), &msgs)?;
            Ok(SweepRow {
                groups: cfg.groups,
                messages: cfg.messages,
                touches: res.metrics.touches.iter().copied().max().unwrap_or(0),
                expected: (cfg.iterations * res.metrics.rows) as f64 / cfg.groups as f64,
                latency_s: res.metrics.latency_s,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct VariantComparison {
    pub nizk_latency_s: f64,
    pub trap_latency_s: f64,
    /// `nizk / trap`.
    pub ratio: f64,
    pub nizk_rows: usize,
    pub trap_rows: usize,
}

/// Runs the same workload through both variants.
pub fn compare_variants<G: PrimeGroup>(cfg: &SimConfig) -> Result<VariantComparison, SimError> {
    let msgs = sample_messages(cfg.messages, cfg.msg_len, cfg.seed);
    let nizk = run_round::<G>(SimConfig { variant: Variant::Nizk, ..cfg.clone() }, &msgs)?;
    let trap = run_round::<G>(SimConfig { variant: Variant::Trap, ..cfg.clone() }, &msgs)?;
    Ok(VariantComparison {
        nizk_latency_s: nizk.metrics.latency_s,
        trap_latency_s: trap.metrics.latency_s,
        ratio: nizk.metrics.latency_s / trap.metrics.latency_s,
        nizk_rows: nizk.metrics.rows,
        trap_rows: trap.metrics.rows,
    })
}
