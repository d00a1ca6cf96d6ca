use super::{AllocationResult, OptimizationProblem, Scheme, FEASIBILITY_TOL};
use crate::error::{Error, Result};

pub const MAX_GRID_DIMENSION: usize = 4;

/// Exhaustive scan of the rate hypercube at spacing `resolution`.
///
/// Grid points are `k * resolution` for `k = 0, 1, ...` plus the upper
/// bound 1. Auxiliary rates are resolved exactly rather than gridded. The
/// first point (in lexicographic scan order) attaining the best feasible
/// objective wins.
pub fn grid_search_oracle(
    problem: &OptimizationProblem,
    resolution: f64,
) -> Result<AllocationResult> {
    if !(resolution > 0.0 && resolution <= 0.1) {
        return Err(Error::invalid(
            "resolution",
            resolution,
            "must lie in (0, 0.1]",
        ));
    }
    let dims = problem.decision_variables();
    if dims > MAX_GRID_DIMENSION {
        return Err(Error::Dimension {
            got: dims,
            max: MAX_GRID_DIMENSION,
        });
    }
    let steps = (1.0 / resolution + 1e-9).floor() as usize;
    let mut axis: Vec<f64> = (0..=steps).map(|k| k as f64 * resolution).collect();
    if *axis.last().unwrap() < 1.0 {
        axis.push(1.0);
    }

    let n = problem.free_flows().len();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut best_x = x.clone();
    let mut best_obj = f64::NEG_INFINITY;
    loop {
        for (v, &i) in x.iter_mut().zip(&idx) {
            *v = axis[i];
        }
        let ev = problem.evaluate(&problem.allocation_from(&x));
        if ev.feasible(FEASIBILITY_TOL) && ev.objective > best_obj {
            best_obj = ev.objective;
            best_x.clone_from(&x);
        }
        let mut d = n;
        loop {
            if d == 0 {
                let alloc = problem.allocation_from(&best_x);
                return Ok(problem.result(Scheme::Tofra, alloc, None));
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axis.len() {
                break;
            }
            idx[d] = 0;
        }
    }
}
