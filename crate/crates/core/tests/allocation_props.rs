mod common;

use std::collections::BTreeMap;

use sicflow::allocation::{
    allocate_best_path, allocate_fmp, grid_search_oracle, solve_tofra, AnnealingConfig,
    BestPathVariant, OptimizationProblem,
};
use sicflow::channel::{ChannelParams, Point};
use sicflow::network::{NodeId, Path, Role, Scenario};
use sicflow::throughput::ModelOptions;

fn fast_problem(s: &Scenario) -> OptimizationProblem {
    let options = ModelOptions {
        mc_samples: 20_000,
        ..ModelOptions::default()
    };
    OptimizationProblem::with_options(s, options).unwrap()
}

fn quick() -> AnnealingConfig {
    AnnealingConfig {
        restarts: 2,
        iterations_per_temperature: 60,
        ..AnnealingConfig::default()
    }
}

/// Sources at `xs` on the x axis, each sending straight to a destination
/// at the origin.
fn single_hop(xs: &[f64], gamma: f64) -> Scenario {
    let mut nodes = vec![common::node(
        0,
        "d".into(),
        Point::new(0.0, 0.0),
        Role::Destination,
        gamma,
        1.0,
        0.3,
    )];
    let mut paths = Vec::new();
    for (k, &x) in xs.iter().enumerate() {
        nodes.push(common::node(
            k + 1,
            format!("s{k}"),
            Point::new(x, 0.0),
            Role::Source,
            gamma,
            1.0,
            0.3,
        ));
        paths.push(Path {
            flow: format!("f{k}"),
            nodes: vec![NodeId(k + 1), NodeId(0)],
        });
    }
    Scenario::new(
        "single-hop",
        ChannelParams::unit_noise(3.0),
        nodes,
        paths,
        BTreeMap::new(),
        BTreeMap::new(),
    )
    .unwrap()
}

#[test]
fn tofra_output_satisfies_constraints() {
    let mut rng = common::rng(21);
    for i in 0..8 {
        let s = if i % 2 == 0 {
            common::random_two_flow(&mut rng)
        } else {
            common::random_network(&mut rng)
        };
        let p = fast_problem(&s);
        let r = solve_tofra(&p, &quick().with_seed(i)).unwrap();
        assert!(r.feasibility.all());
        // The oracle reads decode probabilities at the default sample count,
        // so only closed-form instances are compared exactly.
        if p.model().monte_carlo_links().is_empty() {
            common::check_constraints(&s, &r, 1e-6).unwrap();
        }
    }
}

#[test]
fn tofra_beats_feasible_baselines() {
    let mut rng = common::rng(22);
    for i in 0..6 {
        let s = common::random_two_flow(&mut rng);
        let p = OptimizationProblem::new(&s).unwrap();
        let cfg = quick().with_seed(i);
        let t = solve_tofra(&p, &cfg).unwrap();
        let mut baselines = vec![allocate_fmp(&p)];
        for v in [BestPathVariant::EndToEnd, BestPathVariant::WidestBottleneck] {
            baselines.push(allocate_best_path(&p, v, &cfg).unwrap());
        }
        for b in baselines.iter().filter(|b| b.feasibility.all()) {
            assert!(
                t.objective >= b.objective - 1e-6,
                "{} {} > TOFRA {}",
                b.label,
                b.objective,
                t.objective
            );
        }
    }
}

#[test]
fn same_seed_same_answer() {
    let s = common::random_two_flow(&mut common::rng(23));
    let p = OptimizationProblem::new(&s).unwrap();
    let a = solve_tofra(&p, &quick().with_seed(5)).unwrap();
    let b = solve_tofra(&p, &quick().with_seed(5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn lone_link_runs_at_full_rate() {
    let s = single_hop(&[0.8], 1.0);
    let p = OptimizationProblem::new(&s).unwrap();
    let r = solve_tofra(&p, &quick()).unwrap();
    assert!((r.allocation.rates[0] - 1.0).abs() < 1e-9);
    let g = grid_search_oracle(&p, 0.1).unwrap();
    assert_eq!(g.allocation.rates[0], 1.0);
}

#[test]
fn finer_grids_never_lose() {
    let mut rng = common::rng(24);
    for _ in 0..4 {
        let s = common::random_two_flow(&mut rng);
        let p = OptimizationProblem::new(&s).unwrap();
        // 0.1 divides 0.05 divides 0.01, so the point sets nest.
        let objs: Vec<f64> = [0.1, 0.05, 0.01]
            .iter()
            .map(|&r| grid_search_oracle(&p, r).unwrap().objective)
            .collect();
        assert!(
            objs[0] <= objs[1] + 1e-12 && objs[1] <= objs[2] + 1e-12,
            "{objs:?}"
        );
    }
}

#[test]
fn annealing_close_to_grid() {
    let mut rng = common::rng(25);
    for i in 0..3 {
        let s = common::random_two_flow(&mut rng);
        let p = OptimizationProblem::new(&s).unwrap();
        let t = solve_tofra(&p, &AnnealingConfig::default().with_seed(i)).unwrap();
        let g = grid_search_oracle(&p, 0.01).unwrap();
        // The annealer also searches between grid points.
        assert!(
            t.objective >= g.objective - 1e-3,
            "sa {} grid {}",
            t.objective,
            g.objective
        );
    }
}

#[test]
fn ties_go_to_the_first_path() {
    let s = single_hop(&[0.7, -0.7], 0.5);
    let p = OptimizationProblem::new(&s).unwrap();
    for v in [BestPathVariant::EndToEnd, BestPathVariant::WidestBottleneck] {
        let r = allocate_best_path(&p, v, &quick()).unwrap();
        assert_eq!(r.selected_path, Some(0));
        assert_eq!(r.allocation.rates[1], 0.0);
    }
}

#[test]
fn grid_rejects_bad_resolution() {
    let s = single_hop(&[0.8], 1.0);
    let p = OptimizationProblem::new(&s).unwrap();
    for r in [0.0, -0.1, 0.5, f64::NAN] {
        assert!(grid_search_oracle(&p, r).is_err());
    }
}
