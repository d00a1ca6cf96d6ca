use rayon::prelude::*;
use serde::Serialize;

use super::{run_sim, SimConfig, SimMetrics};
use crate::error::{Error, Result};

/// Mean and sample standard deviation over the runs that reported a value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Stat> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Stat {
            mean,
            std,
            count: v.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub aat: Stat,
    pub flow_aat: Vec<Stat>,
    pub flow_delay: Vec<Option<Stat>>,
    pub link_throughput: Vec<Stat>,
    pub link_delivery_ratio: Vec<Option<Stat>>,
    pub link_retransmission_fraction: Vec<Option<Stat>>,
    pub node_mean_queue: Vec<Stat>,
    pub relay_throughput_ratio: Vec<Option<Stat>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub runs: Vec<SimMetrics>,
    pub summary: Summary,
}

/// Runs `n` independent simulations with seeds `seed, seed + 1, ...` and
/// summarizes them. Runs execute in parallel; results keep seed order.
pub fn replicate(config: &SimConfig, n: usize) -> Result<Replication> {
    if n == 0 {
        return Err(Error::invalid("n_replications", 0.0, "must be at least 1"));
    }
    let runs: Vec<SimMetrics> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut c = config.clone();
            c.seed = config.seed.wrapping_add(i as u64);
            run_sim(&c)
        })
        .collect::<Result<_>>()?;
    let summary = summarize(&runs);
    Ok(Replication { runs, summary })
}

fn summarize(runs: &[SimMetrics]) -> Summary {
    let first = &runs[0];
    let per = |f: &dyn Fn(&SimMetrics) -> f64| Stat::of(runs.iter().map(f)).expect("non-empty");
    let opt = |f: &dyn Fn(&SimMetrics) -> Option<f64>| Stat::of(runs.iter().filter_map(f));
    Summary {
        aat: per(&|m| m.aat),
        flow_aat: (0..first.flows.len())
            .map(|k| per(&|m| m.flows[k].aat))
            .collect(),
        flow_delay: (0..first.flows.len())
            .map(|k| opt(&|m| m.flows[k].mean_delay))
            .collect(),
        link_throughput: (0..first.links.len())
            .map(|k| per(&|m| m.links[k].throughput))
            .collect(),
        link_delivery_ratio: (0..first.links.len())
            .map(|k| opt(&|m| m.links[k].delivery_ratio))
            .collect(),
        link_retransmission_fraction: (0..first.links.len())
            .map(|k| opt(&|m| m.links[k].retransmission_fraction))
            .collect(),
        node_mean_queue: (0..first.nodes.len())
            .map(|k| per(&|m| m.nodes[k].mean_queue))
            .collect(),
        relay_throughput_ratio: (0..first.relays.len())
            .map(|k| opt(&|m| m.relays[k].throughput_ratio))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::throughput::FlowAllocation;
    use crate::topologies::builtin_topology;

    fn config() -> SimConfig {
        SimConfig {
            n_slots: 2_000,
            ..SimConfig::new(
                builtin_topology(1, 0.5).unwrap(),
                FlowAllocation::new(vec![0.5, 1.0]),
            )
        }
    }

    #[test]
    fn single_replication_is_the_run() {
        let r = replicate(&config(), 1).unwrap();
        let m = run_sim(&config()).unwrap();
        assert_eq!(r.runs[0], m);
        assert_eq!(r.summary.aat.mean, m.aat);
        assert_eq!(r.summary.aat.std, 0.0);
    }

    #[test]
    fn seeds_advance() {
        let r = replicate(&config(), 3).unwrap();
        let seeds: Vec<u64> = r.runs.iter().map(|m| m.seed).collect();
        assert_eq!(seeds, vec![1, 2, 3]);
        assert_eq!(r, replicate(&config(), 3).unwrap());
    }
}
