//! Scheme-by-policy sweeps comparing the analytic model with simulation.
//!
//! A plan expands into one cell per (scenario, gamma, scheme, policy). Each
//! cell solves its allocation, evaluates the predicted aggregate throughput,
//! runs replicated simulations and writes its own CSV and JSON files. The
//! aggregate table and report follow once all cells finish.

pub mod output;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::allocation::{
    allocate_best_path, allocate_fmp, solve_tofra, AllocationResult, AnnealingConfig,
    BestPathVariant, OptimizationProblem, Scheme,
};
use crate::config::load_scenario_file;
use crate::error::{Error, Result};
use crate::network::{Role, Scenario};
use crate::sim::{replicate, SimConfig, DEFAULT_MAX_RETRANSMITS, DEFAULT_SLOTS};
use crate::throughput::{ThroughputModel, MIXED_PATTERN_SEED};
use crate::topologies::{builtin_scenario, PolicyVariant};

pub use output::Format;

/// Reference deviation between analysis and packet-level simulation
/// reported for the original testbed.
pub const REFERENCE_DEVIATION: f64 = 0.0156;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ScenarioRef {
    Builtin(u8),
    /// A scenario file; its own reception policies are used and the plan's
    /// policy list is ignored for it.
    File(PathBuf),
}

impl ScenarioRef {
    pub fn label(&self) -> String {
        match self {
            ScenarioRef::Builtin(i) => i.to_string(),
            ScenarioRef::File(p) => p.file_stem().map_or_else(
                || p.display().to_string(),
                |s| s.to_string_lossy().into_owned(),
            ),
        }
    }
}

/// Builds the scenario of one cell. Files keep their own policies and only
/// have their thresholds replaced.
pub fn resolve_scenario(
    scenario: &ScenarioRef,
    gamma: f64,
    policy: Option<PolicyVariant>,
) -> Result<Scenario> {
    match scenario {
        ScenarioRef::Builtin(i) => {
            builtin_scenario(*i, gamma, policy.unwrap_or(PolicyVariant::Ian))
        }
        ScenarioRef::File(path) => load_scenario_file(path)?.with_threshold(gamma),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub scenarios: Vec<ScenarioRef>,
    pub gammas: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub policies: Vec<PolicyVariant>,
    pub seed: u64,
    pub replications: usize,
    pub n_slots: u64,
    pub max_retransmits: Option<u32>,
    pub annealing: AnnealingConfig,
    /// Where per-cell and aggregate files go; `None` writes nothing.
    pub output_dir: Option<PathBuf>,
    pub format: Format,
    pub workers: usize,
    pub timestamp: bool,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            scenarios: (1..=3).map(ScenarioRef::Builtin).collect(),
            gammas: vec![0.5, 2.0],
            schemes: Scheme::ALL.to_vec(),
            policies: PolicyVariant::ALL.to_vec(),
            seed: 1,
            replications: 10,
            n_slots: DEFAULT_SLOTS,
            max_retransmits: Some(DEFAULT_MAX_RETRANSMITS),
            annealing: AnnealingConfig::default(),
            output_dir: None,
            format: Format::Csv,
            workers: 0,
            timestamp: true,
        }
    }
}

/// One cell of a plan before it runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub scenario: ScenarioRef,
    pub gamma: f64,
    pub scheme: Scheme,
    /// `None` for scenario files.
    pub policy: Option<PolicyVariant>,
}

impl Cell {
    pub fn policy_label(&self) -> &'static str {
        self.policy.map_or("config", PolicyVariant::label)
    }

    /// File stem unique within a plan.
    pub fn file_stem(&self) -> String {
        let policy: String = self
            .policy_label()
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() {
                    c.to_ascii_lowercase()
                } else {
                    '-'
                }
            })
            .collect::<String>()
            .trim_end_matches('-')
            .to_string();
        format!(
            "topo-{}_g{}_{}_{}",
            self.scenario.label(),
            self.gamma,
            self.scheme.label().to_ascii_lowercase(),
            policy
        )
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(Error::validation(what, "must not be empty"));
        if self.scenarios.is_empty() {
            return empty("scenarios");
        }
        if self.gammas.is_empty() {
            return empty("gammas");
        }
        if self.schemes.is_empty() {
            return empty("schemes");
        }
        if self.policies.is_empty() {
            return empty("policies");
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications", 0.0, "must be at least 1"));
        }
        if self.n_slots == 0 {
            return Err(Error::invalid("n_slots", 0.0, "must be at least 1"));
        }
        let cells = self.cells();
        let stems: std::collections::BTreeSet<String> = cells.iter().map(Cell::file_stem).collect();
        if stems.len() != cells.len() {
            return Err(Error::validation(
                "plan",
                "cells map to colliding output paths",
            ));
        }
        self.annealing.validate()
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for scenario in &self.scenarios {
            for &gamma in &self.gammas {
                for &scheme in &self.schemes {
                    match scenario {
                        ScenarioRef::Builtin(_) => {
                            for &p in &self.policies {
                                cells.push(Cell {
                                    scenario: scenario.clone(),
                                    gamma,
                                    scheme,
                                    policy: Some(p),
                                });
                            }
                        }
                        ScenarioRef::File(_) => cells.push(Cell {
                            scenario: scenario.clone(),
                            gamma,
                            scheme,
                            policy: None,
                        }),
                    }
                }
            }
        }
        cells
    }
}

/// The fixed-column row written for every cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub topo: String,
    pub gamma: f64,
    pub scheme: String,
    pub policy: String,
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub aat_num: Option<f64>,
    pub aat_sim: Option<f64>,
    pub aat_sim_std: Option<f64>,
    pub delay_f1: Option<f64>,
    pub delay_f2: Option<f64>,
    #[serde(rename = "qratio_R")]
    pub qratio_r: Option<f64>,
    pub retx_frac_2d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub cell: Cell,
    pub label: String,
    pub rates: Vec<f64>,
    pub aat_num: f64,
    pub objective: f64,
    pub feasible: bool,
    pub aat_sim: f64,
    pub aat_sim_std: f64,
    /// `|num - sim| / num`, when `num > 0`.
    pub deviation: Option<f64>,
    pub flow_delay: Vec<Option<f64>>,
    /// Delivery ratio of each flow's first link.
    pub first_link_delivery: Vec<Option<f64>>,
    /// Retransmission fraction of each flow's first link.
    pub first_link_retransmission: Vec<Option<f64>>,
    /// Throughput ratio of each relay, by node name.
    pub relay_ratio: Vec<(String, Option<f64>)>,
    pub mean_queue: Vec<(String, f64)>,
    /// Links whose decode table uses Monte-Carlo estimates.
    pub monte_carlo_links: Vec<String>,
}

impl CellReport {
    pub fn csv_row(&self) -> CsvRow {
        CsvRow {
            topo: self.cell.scenario.label(),
            gamma: self.cell.gamma,
            scheme: self.cell.scheme.label().to_string(),
            policy: self.cell.policy_label().to_string(),
            q1: self.rates.first().copied(),
            q2: self.rates.get(1).copied(),
            aat_num: Some(self.aat_num),
            aat_sim: Some(self.aat_sim),
            aat_sim_std: Some(self.aat_sim_std),
            delay_f1: self.flow_delay.first().copied().flatten(),
            delay_f2: self.flow_delay.get(1).copied().flatten(),
            qratio_r: self.relay_ratio.first().and_then(|r| r.1),
            retx_frac_2d: self.first_link_retransmission.get(1).copied().flatten(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellOutcome {
    pub cell: Cell,
    pub report: Option<CellReport>,
    pub error: Option<String>,
}

impl CellOutcome {
    pub fn csv_row(&self) -> CsvRow {
        match &self.report {
            Some(r) => r.csv_row(),
            None => CsvRow {
                topo: self.cell.scenario.label(),
                gamma: self.cell.gamma,
                scheme: self.cell.scheme.label().to_string(),
                policy: self.cell.policy_label().to_string(),
                q1: None,
                q2: None,
                aat_num: None,
                aat_sim: None,
                aat_sim_std: None,
                delay_f1: None,
                delay_f2: None,
                qratio_r: None,
                retx_frac_2d: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub cells: Vec<CellOutcome>,
    /// Mean deviation over successful TOFRA cells with a positive prediction.
    pub mean_tofra_deviation: Option<f64>,
    pub reference_deviation: f64,
    pub n_slots: u64,
    pub replications: usize,
    pub seed: u64,
    pub monte_carlo_samples: u64,
    pub monte_carlo_seed: u64,
}

impl ComparisonReport {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    pub fn rows(&self) -> Vec<CsvRow> {
        self.cells.iter().map(CellOutcome::csv_row).collect()
    }

    pub fn find(
        &self,
        topo: &str,
        gamma: f64,
        scheme: Scheme,
        policy: &str,
    ) -> Option<&CellReport> {
        self.cells
            .iter()
            .filter_map(|c| c.report.as_ref())
            .find(|r| {
                r.cell.scenario.label() == topo
                    && r.cell.gamma == gamma
                    && r.cell.scheme == scheme
                    && r.cell.policy_label() == policy
            })
    }
}

/// Allocation of one scheme on a prepared problem.
pub fn allocate(
    problem: &OptimizationProblem,
    scheme: Scheme,
    config: &AnnealingConfig,
) -> Result<AllocationResult> {
    match scheme {
        Scheme::Tofra => solve_tofra(problem, config),
        Scheme::Fmp => Ok(allocate_fmp(problem)),
        Scheme::BpE2e => allocate_best_path(problem, BestPathVariant::EndToEnd, config),
        Scheme::BpWb => allocate_best_path(problem, BestPathVariant::WidestBottleneck, config),
    }
}

pub fn run_cell(plan: &ExperimentPlan, cell: &Cell) -> Result<CellReport> {
    let scenario = resolve_scenario(&cell.scenario, cell.gamma, cell.policy)?;
    let model = ThroughputModel::new(&scenario)?;
    let monte_carlo_links = model
        .monte_carlo_links()
        .into_iter()
        .map(|l| scenario.link_label(l))
        .collect();
    let problem = OptimizationProblem::from_model(model).with_policy_label(cell.policy_label());
    let alloc = allocate(&problem, cell.scheme, &plan.annealing)?;

    let sim = SimConfig {
        n_slots: plan.n_slots,
        max_retransmits: plan.max_retransmits,
        seed: plan.seed,
        ..SimConfig::new(scenario.clone(), alloc.allocation.clone())
    };
    let rep = replicate(&sim, plan.replications)?;
    let summary = &rep.summary;
    let first_links: Vec<usize> = scenario
        .paths()
        .iter()
        .map(|p| {
            let first = p.first_link();
            rep.runs[0]
                .links
                .iter()
                .position(|l| l.link == first)
                .expect("path link simulated")
        })
        .collect();
    let aat_sim = summary.aat.mean;
    Ok(CellReport {
        cell: cell.clone(),
        label: alloc.label.clone(),
        rates: alloc.allocation.rates.clone(),
        aat_num: alloc.aat,
        objective: alloc.objective,
        feasible: alloc.feasibility.all(),
        aat_sim,
        aat_sim_std: summary.aat.std,
        deviation: (alloc.aat > 0.0).then(|| (alloc.aat - aat_sim).abs() / alloc.aat),
        flow_delay: summary
            .flow_delay
            .iter()
            .map(|s| s.map(|s| s.mean))
            .collect(),
        first_link_delivery: first_links
            .iter()
            .map(|&i| summary.link_delivery_ratio[i].map(|s| s.mean))
            .collect(),
        first_link_retransmission: first_links
            .iter()
            .map(|&i| summary.link_retransmission_fraction[i].map(|s| s.mean))
            .collect(),
        relay_ratio: scenario
            .nodes()
            .iter()
            .filter(|v| v.role == Role::Relay)
            .zip(&summary.relay_throughput_ratio)
            .map(|(v, s)| (v.name.clone(), s.map(|s| s.mean)))
            .collect(),
        mean_queue: rep.runs[0]
            .nodes
            .iter()
            .zip(&summary.node_mean_queue)
            .map(|(n, s)| (n.name.clone(), s.mean))
            .collect(),
        monte_carlo_links,
    })
}

fn write_cell(plan: &ExperimentPlan, outcome: &CellOutcome) -> Result<()> {
    let Some(dir) = &plan.output_dir else {
        return Ok(());
    };
    let stem = dir.join("cells").join(outcome.cell.file_stem());
    let rows = [outcome.csv_row()];
    output::write_atomic(
        &stem.with_extension("csv"),
        &output::to_csv(&rows, plan.timestamp)?,
    )?;
    output::write_atomic(
        &stem.with_extension("json"),
        &output::to_json(outcome, plan.timestamp)?,
    )
}

/// Runs every cell (concurrently, up to `plan.workers` threads; 0 means
/// one per core) and writes per-cell files plus `comparison.csv`,
/// `comparison.json` and `report.json` when an output directory is set.
///
/// Cell failures are recorded in the report rather than aborting the plan.
pub fn run_plan(plan: &ExperimentPlan) -> Result<ComparisonReport> {
    plan.validate()?;
    let cells = plan.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::validation("workers", e.to_string()))?;
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let outcome = match run_cell(plan, cell) {
                    Ok(r) => CellOutcome {
                        cell: cell.clone(),
                        report: Some(r),
                        error: None,
                    },
                    Err(e) => CellOutcome {
                        cell: cell.clone(),
                        report: None,
                        error: Some(e.to_string()),
                    },
                };
                match write_cell(plan, &outcome) {
                    Ok(()) => outcome,
                    Err(e) => CellOutcome {
                        error: Some(e.to_string()),
                        ..outcome
                    },
                }
            })
            .collect()
    });

    let devs: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.report.as_ref())
        .filter(|r| r.cell.scheme == Scheme::Tofra)
        .filter_map(|r| r.deviation)
        .collect();
    let report = ComparisonReport {
        mean_tofra_deviation: (!devs.is_empty())
            .then(|| devs.iter().sum::<f64>() / devs.len() as f64),
        reference_deviation: REFERENCE_DEVIATION,
        cells: outcomes,
        n_slots: plan.n_slots,
        replications: plan.replications,
        seed: plan.seed,
        monte_carlo_samples: crate::throughput::MIXED_PATTERN_SAMPLES,
        monte_carlo_seed: MIXED_PATTERN_SEED,
    };

    if let Some(dir) = &plan.output_dir {
        let rows = report.rows();
        output::write_atomic(
            &dir.join("comparison.csv"),
            &output::to_csv(&rows, plan.timestamp)?,
        )?;
        output::write_atomic(
            &dir.join("comparison.json"),
            &output::to_json(&rows, plan.timestamp)?,
        )?;
        output::write_atomic(
            &dir.join("report.json"),
            &output::to_json(&report, plan.timestamp)?,
        )?;
    }
    Ok(report)
}
