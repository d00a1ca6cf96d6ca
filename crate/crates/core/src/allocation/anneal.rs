use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AllocationResult, OptimizationProblem, Scheme, FEASIBILITY_TOL};
use crate::error::{Error, Result};

/// Simulated annealing schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealingConfig {
    pub initial_temperature: f64,
    pub cooling_factor: f64,
    pub iterations_per_temperature: usize,
    /// Annealing stops once the temperature drops below this.
    pub final_temperature: f64,
    pub restarts: usize,
    /// Standard deviation of the Gaussian proposal on each rate.
    pub proposal_step: f64,
    pub constraint_penalty_weight: f64,
    /// Above this temperature constraint violations are penalized; below it
    /// infeasible proposals are rejected.
    pub penalty_temperature: f64,
    /// Smallest step of the pattern search that polishes the best point.
    pub polish_tolerance: f64,
    pub seed: u64,
}

impl Default for AnnealingConfig {
    fn default() -> Self {
        Self {
            initial_temperature: 1.0,
            cooling_factor: 0.95,
            iterations_per_temperature: 200,
            final_temperature: 1e-4,
            restarts: 8,
            proposal_step: 0.05,
            constraint_penalty_weight: 10.0,
            penalty_temperature: 0.01,
            polish_tolerance: 1e-9,
            seed: 1,
        }
    }
}

impl AnnealingConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial_temperature", self.initial_temperature),
            ("final_temperature", self.final_temperature),
            ("proposal_step", self.proposal_step),
            ("constraint_penalty_weight", self.constraint_penalty_weight),
            ("polish_tolerance", self.polish_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, v, "must be positive"));
            }
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return Err(Error::invalid(
                "cooling_factor",
                self.cooling_factor,
                "must lie in (0, 1)",
            ));
        }
        if self.iterations_per_temperature == 0 {
            return Err(Error::invalid(
                "iterations_per_temperature",
                0.0,
                "must be positive",
            ));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts", 0.0, "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Best {
    x: Vec<f64>,
    objective: f64,
}

/// Throughput-optimal flow rate allocation by simulated annealing.
///
/// Restarts run in parallel with seeds `seed + i` and are merged by best
/// objective (lowest restart index on ties), so the result does not depend
/// on thread scheduling. The best feasible point is then polished by a
/// deterministic pattern search.
pub fn solve_tofra(
    problem: &OptimizationProblem,
    config: &AnnealingConfig,
) -> Result<AllocationResult> {
    config.validate()?;
    let dim = problem.free_flows().len();
    let zeros = Best {
        x: vec![0.0; dim],
        objective: 0.0,
    };
    let best = if dim == 0 {
        zeros
    } else {
        let runs: Vec<Best> = (0..config.restarts)
            .into_par_iter()
            .map(|i| anneal_once(problem, config, config.seed.wrapping_add(i as u64)))
            .collect();
        let mut best = zeros;
        for run in runs {
            if run.objective > best.objective {
                best = run;
            }
        }
        polish(problem, best, config.polish_tolerance)
    };
    let alloc = problem.allocation_from(&best.x);
    Ok(problem.result(Scheme::Tofra, alloc, None))
}

/// Objective and total violation of the free-flow rates `x`.
fn score(problem: &OptimizationProblem, x: &[f64]) -> (f64, f64) {
    let ev = problem.evaluate(&problem.allocation_from(x));
    (ev.objective, ev.s2_violation + ev.s4_violation)
}

fn anneal_once(problem: &OptimizationProblem, config: &AnnealingConfig, seed: u64) -> Best {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, config.proposal_step).expect("validated step");
    let dim = problem.free_flows().len();

    let mut best = Best {
        x: vec![0.0; dim],
        objective: 0.0,
    };
    let mut x: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    let (mut obj, mut viol) = score(problem, &x);
    if viol <= FEASIBILITY_TOL && obj > best.objective {
        best = Best {
            x: x.clone(),
            objective: obj,
        };
    }

    let mut t = config.initial_temperature;
    let mut penalizing = t > config.penalty_temperature;
    while t >= config.final_temperature {
        if penalizing && t <= config.penalty_temperature {
            penalizing = false;
            if viol > FEASIBILITY_TOL {
                x.clone_from(&best.x);
                (obj, viol) = score(problem, &x);
            }
        }
        let energy = |o: f64, v: f64| {
            if penalizing {
                o - config.constraint_penalty_weight * v
            } else {
                o
            }
        };
        for _ in 0..config.iterations_per_temperature {
            let cand: Vec<f64> = x
                .iter()
                .map(|&q| (q + step.sample(&mut rng)).clamp(0.0, 1.0))
                .collect();
            let (c_obj, c_viol) = score(problem, &cand);
            // The uniform draw is taken unconditionally to keep the random
            // stream independent of acceptance decisions.
            let u: f64 = rng.gen();
            if !penalizing && c_viol > FEASIBILITY_TOL {
                continue;
            }
            let delta = energy(c_obj, c_viol) - energy(obj, viol);
            if delta >= 0.0 || u < (delta / t).exp() {
                x = cand;
                obj = c_obj;
                viol = c_viol;
                if viol <= FEASIBILITY_TOL && obj > best.objective {
                    best = Best {
                        x: x.clone(),
                        objective: obj,
                    };
                }
            }
        }
        t *= config.cooling_factor;
    }
    best
}

/// Coordinate pattern search from `start`, keeping feasibility, with the
/// step halved whenever no move improves.
fn polish(problem: &OptimizationProblem, start: Best, tolerance: f64) -> Best {
    let mut best = start;
    let mut step = 0.05;
    while step >= tolerance {
        let mut improved = false;
        for n in 0..best.x.len() {
            for dir in [1.0, -1.0] {
                let mut cand = best.x.clone();
                cand[n] = (cand[n] + dir * step).clamp(0.0, 1.0);
                if cand[n] == best.x[n] {
                    continue;
                }
                let (obj, viol) = score(problem, &cand);
                if viol <= FEASIBILITY_TOL && obj > best.objective {
                    best = Best {
                        x: cand,
                        objective: obj,
                    };
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}
