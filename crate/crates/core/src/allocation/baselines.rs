use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{solve_tofra, AllocationResult, AnnealingConfig, OptimizationProblem, Scheme};
use crate::error::Result;
use crate::network::{bottleneck_success_prob, end_to_end_success_prob};

/// Every flow at rate 1, with no constraint enforced.
pub fn allocate_fmp(problem: &OptimizationProblem) -> AllocationResult {
    let mut alloc =
        crate::throughput::FlowAllocation::new(vec![1.0; problem.scenario().flow_count()]);
    problem.fill_aux(&mut alloc);
    problem.result(Scheme::Fmp, alloc, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BestPathVariant {
    /// Highest product of interference-free link success probabilities.
    EndToEnd,
    /// Highest minimum interference-free link success probability.
    WidestBottleneck,
}

impl BestPathVariant {
    pub fn scheme(self) -> Scheme {
        match self {
            BestPathVariant::EndToEnd => Scheme::BpE2e,
            BestPathVariant::WidestBottleneck => Scheme::BpWb,
        }
    }
}

impl fmt::Display for BestPathVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.scheme().label())
    }
}

impl FromStr for BestPathVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.parse::<Scheme>()? {
            Scheme::BpE2e => Ok(BestPathVariant::EndToEnd),
            Scheme::BpWb => Ok(BestPathVariant::WidestBottleneck),
            other => Err(format!("`{other}` is not a best-path scheme")),
        }
    }
}

/// Keeps only the best path by `variant` (lowest index on ties) and
/// optimizes its rate alone.
pub fn allocate_best_path(
    problem: &OptimizationProblem,
    variant: BestPathVariant,
    config: &AnnealingConfig,
) -> Result<AllocationResult> {
    let scenario = problem.scenario();
    let mut chosen = 0;
    let mut best = f64::NEG_INFINITY;
    for (k, path) in scenario.paths().iter().enumerate() {
        let score = match variant {
            BestPathVariant::EndToEnd => end_to_end_success_prob(scenario, path)?,
            BestPathVariant::WidestBottleneck => bottleneck_success_prob(scenario, path)?,
        };
        if score > best {
            best = score;
            chosen = k;
        }
    }
    let single = problem.clone().restricted_to(&[chosen]);
    let solved = solve_tofra(&single, config)?;
    Ok(single.result(variant.scheme(), solved.allocation, Some(chosen)))
}
