use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sicflow::allocation::{
    grid_search_oracle, solve_tofra, AnnealingConfig, OptimizationProblem, Scheme,
};
use sicflow::calibrate::calibrate_topology1;
use sicflow::channel::{self, ChannelParams, ReceptionPolicy};
use sicflow::experiments::output::{self, Format};
use sicflow::experiments::{allocate, resolve_scenario, run_plan, ExperimentPlan, ScenarioRef};
use sicflow::network::{Link, Scenario, DEFAULT_POWER};
use sicflow::sim::{replicate, write_trace_csv, SimConfig, DEFAULT_MAX_RETRANSMITS, DEFAULT_SLOTS};
use sicflow::throughput::{FlowAllocation, ThroughputModel};
use sicflow::topologies::PolicyVariant;
use sicflow::{Error, Result};

const EXIT_FAILURE: u8 = 1;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sicflow",
    version,
    about = "Flow allocation and slotted simulation for random-access networks with SIC receivers"
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Output file (a directory for `compare`). Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit the generation timestamp from outputs.
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Seed for annealing, simulation and Monte-Carlo estimates.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predicted link, path and aggregate throughput of an allocation.
    Analyze {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Source rate of every flow, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<f64>,
    },
    /// Runs one allocation scheme.
    Optimize {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "tofra", value_parser = parse_scheme)]
        scheme: Scheme,
    },
    /// Runs the slot simulator.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Source rates; without them the rates come from `--scheme`.
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        #[arg(long, default_value = "tofra", value_parser = parse_scheme)]
        scheme: Scheme,
        #[command(flatten)]
        sim: SimArgs,
        /// Per-slot event log of the first replication, as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Full scheme-by-policy comparison of model and simulation.
    Compare {
        /// Builtin topologies (repeatable).
        #[arg(long = "topology", default_values_t = [1u8, 2, 3], value_parser = clap::value_parser!(u8).range(1..=3))]
        topologies: Vec<u8>,
        /// Scenario files (repeatable); used in addition to the topologies.
        #[arg(long = "scenario")]
        scenarios: Vec<PathBuf>,
        #[arg(long = "gamma", default_values_t = [0.5, 2.0])]
        gammas: Vec<f64>,
        #[arg(long = "scheme", value_parser = parse_scheme)]
        schemes: Vec<Scheme>,
        #[arg(long = "policy", value_parser = parse_policy)]
        policies: Vec<PolicyVariant>,
        #[command(flatten)]
        sim: SimArgs,
        /// Concurrent cells; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Recovers the distances of builtin topology 1 from its operating points.
    Calibrate,
    /// Cross-checks the optimizer or the closed forms against brute force.
    Oracle {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum, default_value = "grid")]
        kind: OracleKind,
        /// Grid spacing for `--kind grid`.
        #[arg(long, default_value_t = 0.01)]
        resolution: f64,
        /// Samples per estimate for `--kind mc`.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Grid,
    Mc,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Builtin topology.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3), conflicts_with = "scenario")]
    topology: u8,
    /// Scenario file (TOML); its own reception policies apply.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// SINR threshold of every node.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Reception policy of a builtin topology.
    #[arg(long, default_value = "ian", value_parser = parse_policy)]
    policy: PolicyVariant,
}

impl ScenarioArgs {
    fn reference(&self) -> ScenarioRef {
        match &self.scenario {
            Some(p) => ScenarioRef::File(p.clone()),
            None => ScenarioRef::Builtin(self.topology),
        }
    }

    fn policy_label(&self) -> &'static str {
        if self.scenario.is_some() {
            "config"
        } else {
            self.policy.label()
        }
    }

    fn build(&self) -> Result<Scenario> {
        resolve_scenario(&self.reference(), self.gamma, Some(self.policy))
    }
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = DEFAULT_SLOTS)]
    slots: u64,
    #[arg(long, default_value_t = 10)]
    replications: usize,
    /// Retransmit limit per hop, or `inf`.
    #[arg(long, default_value_t = DEFAULT_MAX_RETRANSMITS.to_string())]
    max_retransmits: String,
}

impl SimArgs {
    fn max_retransmits(&self) -> Result<Option<u32>> {
        if self.max_retransmits.eq_ignore_ascii_case("inf") {
            return Ok(None);
        }
        self.max_retransmits
            .parse()
            .map(Some)
            .map_err(|_| Error::Validation {
                field: "max-retransmits".into(),
                message: "expected a non-negative integer or `inf`".into(),
            })
    }
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse()
}

fn parse_policy(s: &str) -> std::result::Result<PolicyVariant, String> {
    s.parse()
}

struct Ctx {
    format: Format,
    out: Option<PathBuf>,
    timestamp: bool,
    seed: u64,
}

impl Ctx {
    fn emit<T: Serialize>(&self, rows: &[T]) -> Result<()> {
        let text = output::render(rows, self.format, self.timestamp)?;
        match &self.out {
            Some(path) => output::write_atomic(path, &text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn annealing(&self) -> AnnealingConfig {
        AnnealingConfig::default().with_seed(self.seed)
    }
}

#[derive(Serialize)]
struct ThroughputRow {
    kind: &'static str,
    item: String,
    throughput: f64,
}

#[derive(Serialize)]
struct AllocationRow {
    topo: String,
    gamma: f64,
    scheme: &'static str,
    policy: &'static str,
    label: String,
    q1: Option<f64>,
    q2: Option<f64>,
    rates: String,
    aat_num: f64,
    objective: f64,
    feasible: bool,
}

#[derive(Serialize)]
struct MetricRow {
    metric: &'static str,
    item: String,
    mean: Option<f64>,
    std: Option<f64>,
}

#[derive(Serialize)]
struct CalibrationRow {
    quantity: String,
    link: &'static str,
    policy: &'static str,
    gamma: Option<f64>,
    target: Option<f64>,
    achieved: f64,
    residual: Option<f64>,
    tolerance: Option<f64>,
}

#[derive(Serialize)]
struct GridOracleRow {
    method: &'static str,
    rates: String,
    objective: f64,
    gap_to_grid: f64,
}

#[derive(Serialize)]
struct McOracleRow {
    link: String,
    interferer: String,
    policy: &'static str,
    closed_form: f64,
    monte_carlo: f64,
    std_error: f64,
    z_score: f64,
}

fn join(rates: &[f64]) -> String {
    rates
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

fn analyze(ctx: &Ctx, args: &ScenarioArgs, rates: Vec<f64>) -> Result<()> {
    let s = args.build()?;
    let alloc = FlowAllocation::new(rates);
    alloc.validate(&s)?;
    let model = ThroughputModel::new(&s)?;
    let mut rows = Vec::new();
    for l in s.links() {
        rows.push(ThroughputRow {
            kind: "link",
            item: s.link_label(l),
            throughput: model.link_throughput(&alloc, l)?,
        });
    }
    for (k, p) in s.paths().iter().enumerate() {
        rows.push(ThroughputRow {
            kind: "path",
            item: p.flow.clone(),
            throughput: model.path_throughput(&alloc, k),
        });
    }
    rows.push(ThroughputRow {
        kind: "aggregate",
        item: "AAT".into(),
        throughput: model.aggregate_throughput(&alloc),
    });
    ctx.emit(&rows)
}

fn optimize(ctx: &Ctx, args: &ScenarioArgs, scheme: Scheme) -> Result<()> {
    let s = args.build()?;
    let problem = OptimizationProblem::new(&s)?.with_policy_label(args.policy_label());
    let r = allocate(&problem, scheme, &ctx.annealing())?;
    ctx.emit(&[AllocationRow {
        topo: args.reference().label(),
        gamma: args.gamma,
        scheme: scheme.label(),
        policy: args.policy_label(),
        label: r.label.clone(),
        q1: r.allocation.rates.first().copied(),
        q2: r.allocation.rates.get(1).copied(),
        rates: join(&r.allocation.rates),
        aat_num: r.aat,
        objective: r.objective,
        feasible: r.feasibility.all(),
    }])
}

fn simulate(
    ctx: &Ctx,
    args: &ScenarioArgs,
    rates: Option<Vec<f64>>,
    scheme: Scheme,
    sim: &SimArgs,
    trace: Option<PathBuf>,
) -> Result<()> {
    let s = args.build()?;
    let alloc = match rates {
        Some(r) => FlowAllocation::new(r),
        None => {
            let problem = OptimizationProblem::new(&s)?;
            allocate(&problem, scheme, &ctx.annealing())?.allocation
        }
    };
    let config = SimConfig {
        n_slots: sim.slots,
        max_retransmits: sim.max_retransmits()?,
        seed: ctx.seed,
        trace: trace.is_some(),
        ..SimConfig::new(s.clone(), alloc.clone())
    };
    let rep = replicate(&config, sim.replications)?;
    if let (Some(path), Some(events)) = (&trace, &rep.runs[0].trace) {
        let mut buf = Vec::new();
        write_trace_csv(events, &mut buf)?;
        output::write_atomic(path, &String::from_utf8(buf).expect("utf-8 trace"))?;
    }

    let sm = &rep.summary;
    let stat = |metric, item: String, s: Option<sicflow::sim::Stat>| MetricRow {
        metric,
        item,
        mean: s.map(|s| s.mean),
        std: s.map(|s| s.std),
    };
    let first = &rep.runs[0];
    let mut rows = vec![MetricRow {
        metric: "rates",
        item: join(&alloc.rates),
        mean: None,
        std: None,
    }];
    rows.push(stat("aat", "all".into(), Some(sm.aat)));
    for (k, f) in first.flows.iter().enumerate() {
        rows.push(stat("flow_aat", f.flow.clone(), Some(sm.flow_aat[k])));
        rows.push(stat("flow_delay", f.flow.clone(), sm.flow_delay[k]));
    }
    for (k, l) in first.links.iter().enumerate() {
        rows.push(stat(
            "link_throughput",
            l.label.clone(),
            Some(sm.link_throughput[k]),
        ));
        rows.push(stat(
            "link_delivery_ratio",
            l.label.clone(),
            sm.link_delivery_ratio[k],
        ));
        rows.push(stat(
            "link_retransmission_fraction",
            l.label.clone(),
            sm.link_retransmission_fraction[k],
        ));
    }
    for (k, n) in first.nodes.iter().enumerate() {
        rows.push(stat(
            "mean_queue",
            n.name.clone(),
            Some(sm.node_mean_queue[k]),
        ));
    }
    for (k, r) in first.relays.iter().enumerate() {
        rows.push(stat(
            "relay_throughput_ratio",
            r.name.clone(),
            sm.relay_throughput_ratio[k],
        ));
    }
    ctx.emit(&rows)
}

#[allow(clippy::too_many_arguments)]
fn compare(
    ctx: &Ctx,
    topologies: Vec<u8>,
    scenarios: Vec<PathBuf>,
    gammas: Vec<f64>,
    schemes: Vec<Scheme>,
    policies: Vec<PolicyVariant>,
    sim: &SimArgs,
    workers: usize,
) -> Result<bool> {
    let mut refs: Vec<ScenarioRef> = topologies.into_iter().map(ScenarioRef::Builtin).collect();
    refs.extend(scenarios.into_iter().map(ScenarioRef::File));
    let defaults = ExperimentPlan::default();
    let plan = ExperimentPlan {
        scenarios: refs,
        gammas,
        schemes: if schemes.is_empty() {
            defaults.schemes.clone()
        } else {
            schemes
        },
        policies: if policies.is_empty() {
            defaults.policies.clone()
        } else {
            policies
        },
        seed: ctx.seed,
        replications: sim.replications,
        n_slots: sim.slots,
        max_retransmits: sim.max_retransmits()?,
        annealing: ctx.annealing(),
        output_dir: Some(ctx.out.clone().unwrap_or_else(|| PathBuf::from("results"))),
        format: ctx.format,
        workers,
        timestamp: ctx.timestamp,
    };
    let report = run_plan(&plan)?;
    print!(
        "{}",
        output::render(&report.rows(), ctx.format, ctx.timestamp)?
    );
    for c in &report.cells {
        if let Some(e) = &c.error {
            eprintln!("cell {} failed: {e}", c.cell.file_stem());
        }
    }
    if let Some(d) = report.mean_tofra_deviation {
        eprintln!(
            "mean model/simulation deviation over TOFRA cells: {:.2}% (reference {:.2}%)",
            100.0 * d,
            100.0 * report.reference_deviation
        );
    }
    Ok(report.failed() == 0)
}

fn calibrate(ctx: &Ctx) -> Result<()> {
    let cal = calibrate_topology1(DEFAULT_POWER, &ChannelParams::default())?;
    let dist = |name: &str, v: f64| CalibrationRow {
        quantity: name.into(),
        link: "",
        policy: "",
        gamma: None,
        target: None,
        achieved: v,
        residual: None,
        tolerance: None,
    };
    let mut rows = vec![
        dist("r_1R", cal.r_1r),
        dist("r_2R", cal.r_2r),
        dist("r_2d", cal.r_2d),
        dist("r_Rd", cal.r_rd),
    ];
    for p in &cal.points {
        rows.push(CalibrationRow {
            quantity: "success_prob".into(),
            link: p.link,
            policy: p.policy,
            gamma: Some(p.gamma),
            target: Some(p.target),
            achieved: p.achieved,
            residual: Some(p.residual()),
            tolerance: Some(p.tolerance),
        });
    }
    ctx.emit(&rows)
}

fn oracle(
    ctx: &Ctx,
    args: &ScenarioArgs,
    kind: OracleKind,
    resolution: f64,
    samples: u64,
) -> Result<()> {
    let s = args.build()?;
    match kind {
        OracleKind::Grid => {
            let problem = OptimizationProblem::new(&s)?;
            let grid = grid_search_oracle(&problem, resolution)?;
            let sa = solve_tofra(&problem, &ctx.annealing())?;
            ctx.emit(&[
                GridOracleRow {
                    method: "grid",
                    rates: join(&grid.allocation.rates),
                    objective: grid.objective,
                    gap_to_grid: 0.0,
                },
                GridOracleRow {
                    method: "annealing",
                    rates: join(&sa.allocation.rates),
                    objective: sa.objective,
                    gap_to_grid: sa.objective - grid.objective,
                },
            ])
        }
        OracleKind::Mc => {
            let ch = s.channel();
            let mut rows = Vec::new();
            let links: Vec<Link> = s.links().collect();
            for (n, &l) in links.iter().enumerate() {
                let tx = s.node(l.from).transmitter();
                let rx = s.node(l.to).position;
                let seed = ctx.seed.wrapping_add(100 * n as u64);
                let solo = channel::success_prob_solo(&tx, &rx, ch)?;
                let mc = channel::success_prob_mc(
                    &tx,
                    &[],
                    &ReceptionPolicy::ian(),
                    &rx,
                    ch,
                    samples,
                    seed,
                )?;
                rows.push(mc_row(&s, l, "-", "solo", solo, mc));
                for (m, &k) in s.interferer_set(l)?.iter().enumerate() {
                    let int = s.node(k).transmitter();
                    let active = [(k, int)];
                    let name = s.node(k).name.clone();
                    let seed = seed.wrapping_add(2 * m as u64 + 1);
                    let ian = channel::success_prob_ian(&tx, &int, &rx, ch)?;
                    let mc = channel::success_prob_mc(
                        &tx,
                        &active,
                        &ReceptionPolicy::ian(),
                        &rx,
                        ch,
                        samples,
                        seed,
                    )?;
                    rows.push(mc_row(&s, l, &name, "ian", ian, mc));
                    let sic = channel::success_prob_sic(&tx, &int, &rx, ch)?;
                    let policy = ReceptionPolicy::sic(vec![k]);
                    let mc = channel::success_prob_mc(
                        &tx,
                        &active,
                        &policy,
                        &rx,
                        ch,
                        samples,
                        seed + 1,
                    )?;
                    rows.push(mc_row(&s, l, &name, "sic", sic, mc));
                }
            }
            ctx.emit(&rows)
        }
    }
}

fn mc_row(
    s: &Scenario,
    l: Link,
    interferer: &str,
    policy: &'static str,
    closed: f64,
    mc: channel::McEstimate,
) -> McOracleRow {
    let sigma = channel::binomial_sigma(closed, mc.samples);
    McOracleRow {
        link: s.link_label(l),
        interferer: interferer.into(),
        policy,
        closed_form: closed,
        monte_carlo: mc.probability,
        std_error: mc.std_error,
        z_score: if sigma > 0.0 {
            (mc.probability - closed) / sigma
        } else {
            0.0
        },
    }
}

fn run(cli: Cli) -> Result<bool> {
    let ctx = Ctx {
        format: cli.format,
        out: cli.out,
        timestamp: !cli.no_timestamp,
        seed: cli.seed,
    };
    match cli.command {
        Command::Analyze { scenario, rates } => analyze(&ctx, &scenario, rates)?,
        Command::Optimize { scenario, scheme } => optimize(&ctx, &scenario, scheme)?,
        Command::Simulate {
            scenario,
            rates,
            scheme,
            sim,
            trace,
        } => simulate(&ctx, &scenario, rates, scheme, &sim, trace)?,
        Command::Compare {
            topologies,
            scenarios,
            gammas,
            schemes,
            policies,
            sim,
            workers,
        } => {
            return compare(
                &ctx, topologies, scenarios, gammas, schemes, policies, &sim, workers,
            )
        }
        Command::Calibrate => calibrate(&ctx)?,
        Command::Oracle {
            scenario,
            kind,
            resolution,
            samples,
        } => oracle(&ctx, &scenario, kind, resolution, samples)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_FAILURE
            })
        }
    }
}
