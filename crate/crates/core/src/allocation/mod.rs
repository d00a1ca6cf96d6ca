//! Flow rate allocation.
//!
//! The optimization problem maximizes, over source rates `q` and auxiliary
//! rates `q'` of multi-hop flows,
//!
//! ```text
//! sum_k  T(src_k, dst_k)   for single-link paths
//!        q'_k              for multi-hop paths
//! ```
//!
//! subject to
//!
//! - S1: `0 <= q_k <= 1`,
//! - S2: the first link of each path carries no more than any later link,
//! - S3: `0 <= q'_k <= 1`,
//! - S4: `q'_k <= T(i,j)` for every link of a multi-hop path.
//!
//! For fixed `q` the objective grows with each `q'_k` and S3/S4 are its only
//! constraints, so the optimum is always `q'_k = min(1, min_link T)`. The
//! allocators therefore search over `q` alone and set `q'` in closed form.
//! With that choice the objective equals the aggregate throughput.

mod anneal;
mod baselines;
mod grid;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::Scenario;
use crate::throughput::{FlowAllocation, ModelOptions, ThroughputModel};

pub use anneal::{solve_tofra, AnnealingConfig};
pub use baselines::{allocate_best_path, allocate_fmp, BestPathVariant};
pub use grid::{grid_search_oracle, MAX_GRID_DIMENSION};

/// Constraint slack accepted by the allocators themselves.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    Tofra,
    Fmp,
    BpE2e,
    BpWb,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Tofra, Scheme::Fmp, Scheme::BpE2e, Scheme::BpWb];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Tofra => "TOFRA",
            Scheme::Fmp => "FMP",
            Scheme::BpE2e => "BP_e2e",
            Scheme::BpWb => "BP_wb",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "tofra" => Ok(Scheme::Tofra),
            "fmp" => Ok(Scheme::Fmp),
            "bpe2e" => Ok(Scheme::BpE2e),
            "bpwb" => Ok(Scheme::BpWb),
            _ => Err(format!(
                "unknown scheme `{s}` (expected tofra, fmp, bp-e2e or bp-wb)"
            )),
        }
    }
}

/// Result of evaluating one allocation against the problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub objective: f64,
    pub aat: f64,
    pub path_throughputs: Vec<f64>,
    /// Per path, the throughput of each link in path order.
    pub link_throughputs: Vec<Vec<f64>>,
    /// Total amount by which first links exceed later links (S2).
    pub s2_violation: f64,
    /// Total amount by which `q'` exceeds a link throughput or 1 (S3, S4).
    pub s4_violation: f64,
}

impl Evaluation {
    pub fn feasible(&self, tol: f64) -> bool {
        self.s2_violation <= tol && self.s4_violation <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Feasibility {
    pub s1: bool,
    pub s2: bool,
    pub s3: bool,
    pub s4: bool,
}

impl Feasibility {
    pub fn all(&self) -> bool {
        self.s1 && self.s2 && self.s3 && self.s4
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationResult {
    pub scheme: Scheme,
    /// Display label such as `TOFRA-SIC(R)` or `BP_wb`.
    pub label: String,
    pub allocation: FlowAllocation,
    pub objective: f64,
    /// Predicted aggregate throughput at `allocation`.
    pub aat: f64,
    pub path_throughputs: Vec<f64>,
    pub link_throughputs: Vec<Vec<f64>>,
    pub feasibility: Feasibility,
    /// Path kept by the best-path baselines.
    pub selected_path: Option<usize>,
}

/// The allocation problem over one scenario.
#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    model: ThroughputModel,
    /// Suffix appended to the TOFRA label, e.g. `IAN`.
    policy_label: Option<String>,
    /// Flows the optimizer may change; the rest stay at rate 0.
    free: Vec<usize>,
}

impl OptimizationProblem {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        Self::with_options(scenario, ModelOptions::default())
    }

    pub fn with_options(scenario: &Scenario, options: ModelOptions) -> Result<Self> {
        Ok(Self::from_model(ThroughputModel::with_options(
            scenario, options,
        )?))
    }

    pub fn from_model(model: ThroughputModel) -> Self {
        let free = (0..model.scenario().flow_count()).collect();
        Self {
            model,
            policy_label: None,
            free,
        }
    }

    pub fn with_policy_label(mut self, label: impl Into<String>) -> Self {
        self.policy_label = Some(label.into());
        self
    }

    /// Restricts the search to `flows`; all others are held at rate 0.
    pub fn restricted_to(mut self, flows: &[usize]) -> Self {
        self.free = flows.to_vec();
        self
    }

    pub fn model(&self) -> &ThroughputModel {
        &self.model
    }

    pub fn scenario(&self) -> &Scenario {
        self.model.scenario()
    }

    pub fn free_flows(&self) -> &[usize] {
        &self.free
    }

    pub fn policy_label(&self) -> Option<&str> {
        self.policy_label.as_deref()
    }

    /// Decision variables of the problem as stated: one rate per free flow
    /// plus one auxiliary rate per free multi-hop flow.
    pub fn decision_variables(&self) -> usize {
        let paths = self.scenario().paths();
        self.free
            .iter()
            .map(|&k| if paths[k].hops() > 1 { 2 } else { 1 })
            .sum()
    }

    /// Full allocation from the free-flow rates, with `q'` set to its optimum.
    pub fn allocation_from(&self, x: &[f64]) -> FlowAllocation {
        let mut alloc = FlowAllocation::zeros(self.scenario().flow_count());
        for (&k, &q) in self.free.iter().zip(x) {
            alloc.rates[k] = q;
        }
        self.fill_aux(&mut alloc);
        alloc
    }

    /// Sets `q'_k = min(1, min_link T)` on every multi-hop flow.
    pub fn fill_aux(&self, alloc: &mut FlowAllocation) {
        for (k, path) in self.scenario().paths().iter().enumerate() {
            alloc.aux[k] = (path.hops() > 1).then(|| self.model.path_throughput(alloc, k).min(1.0));
        }
    }

    pub fn evaluate(&self, alloc: &FlowAllocation) -> Evaluation {
        let paths = self.scenario().paths();
        let link_throughputs: Vec<Vec<f64>> = (0..paths.len())
            .map(|k| self.model.path_link_throughputs(alloc, k))
            .collect();
        let mut objective = 0.0;
        let mut path_throughputs = Vec::with_capacity(paths.len());
        let mut s2_violation = 0.0;
        let mut s4_violation = 0.0;
        for (k, links) in link_throughputs.iter().enumerate() {
            let bottleneck = links.iter().copied().fold(f64::INFINITY, f64::min);
            path_throughputs.push(bottleneck);
            s2_violation += links[1..]
                .iter()
                .map(|&t| (links[0] - t).max(0.0))
                .sum::<f64>();
            if paths[k].hops() > 1 {
                let aux = alloc.aux[k].unwrap_or(0.0);
                objective += aux;
                s4_violation += links.iter().map(|&t| (aux - t).max(0.0)).sum::<f64>();
                s4_violation += (aux - 1.0).max(0.0) + (-aux).max(0.0);
            } else {
                objective += links[0];
            }
        }
        Evaluation {
            objective,
            aat: path_throughputs.iter().sum(),
            path_throughputs,
            link_throughputs,
            s2_violation,
            s4_violation,
        }
    }

    pub(crate) fn result(
        &self,
        scheme: Scheme,
        alloc: FlowAllocation,
        selected_path: Option<usize>,
    ) -> AllocationResult {
        let ev = self.evaluate(&alloc);
        let s1 = alloc.rates.iter().all(|q| (0.0..=1.0).contains(q));
        let s3 = alloc.aux.iter().flatten().all(|q| (0.0..=1.0).contains(q));
        let label = match (scheme, &self.policy_label) {
            (Scheme::Tofra, Some(p)) => format!("TOFRA-{p}"),
            _ => scheme.label().to_string(),
        };
        AllocationResult {
            scheme,
            label,
            objective: ev.objective,
            aat: ev.aat,
            feasibility: Feasibility {
                s1,
                s2: ev.s2_violation <= FEASIBILITY_TOL,
                s3,
                s4: ev.s4_violation <= FEASIBILITY_TOL,
            },
            path_throughputs: ev.path_throughputs,
            link_throughputs: ev.link_throughputs,
            allocation: alloc,
            selected_path,
        }
    }
}
