//! Average link, path, and aggregate throughput of a random-access network
//! under a given flow allocation.
//!
//! The throughput of link `(i,j)` sums over every on/off pattern of its
//! interferers:
//!
//! ```text
//! T(i,j) = sum_l P(i,j,l) * q(i,j) * prod_n a_n^b(l,n) (1 - a_n)^(1 - b(l,n))
//! ```
//!
//! where bit `n` of `l` says whether interferer `n` is active, `a_n` is that
//! interferer's activity and `P(i,j,l)` is the decode probability given the
//! active set. `q(i,j)` is the probability that `i` transmits while `j` is
//! free to listen. Relays on a path carrying no flow neither transmit nor
//! interfere.
//!
//! Decode probabilities depend only on the scenario, so a
//! [`ThroughputModel`] computes them once per link; evaluating an allocation
//! is then a cheap weighted sum.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::channel::{self, ReceptionMode, ReceptionPolicy, TransmitterState};
use crate::error::{Error, Result};
use crate::network::{Link, NodeId, Path, Role, Scenario};

/// Largest interferer set enumerated (2^20 patterns).
pub const MAX_INTERFERERS: usize = 20;

/// Seed used for Monte-Carlo decode probabilities of active sets that have
/// no closed form.
pub const MIXED_PATTERN_SEED: u64 = 0x0005_EED0_F51C;

/// Samples used for those Monte-Carlo probabilities.
pub const MIXED_PATTERN_SAMPLES: u64 = 1_000_000;

/// Per-flow source rates, plus the auxiliary rate `q'` of multi-hop flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowAllocation {
    pub rates: Vec<f64>,
    /// `Some` only for multi-hop flows once an allocator has set it.
    pub aux: Vec<Option<f64>>,
}

impl FlowAllocation {
    pub fn new(rates: Vec<f64>) -> Self {
        let aux = vec![None; rates.len()];
        Self { rates, aux }
    }

    pub fn zeros(flows: usize) -> Self {
        Self::new(vec![0.0; flows])
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        if self.rates.len() != scenario.flow_count() {
            return Err(Error::AllocationShape {
                expected: scenario.flow_count(),
                got: self.rates.len(),
            });
        }
        for (k, &q) in self.rates.iter().enumerate() {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::invalid(
                    format!("rates[{k}]"),
                    q,
                    "must lie in [0, 1]",
                ));
            }
        }
        for (k, q) in self.aux.iter().enumerate() {
            if let Some(q) = *q {
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::invalid(format!("aux[{k}]"), q, "must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOptions {
    /// Also scale an interferer's activity by the probability that its own
    /// next hop is not transmitting, as is done for the link's transmitter.
    /// Off by default: interferers contribute with their activity alone.
    pub interferer_half_duplex: bool,
    pub mc_samples: u64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            interferer_half_duplex: false,
            mc_samples: MIXED_PATTERN_SAMPLES,
        }
    }
}

/// Activity probability `q''` of a node under an allocation.
pub fn node_activity(scenario: &Scenario, alloc: &FlowAllocation, node: NodeId) -> f64 {
    let n = scenario.node(node);
    match n.role {
        Role::Destination => 0.0,
        Role::Source => scenario.path_of(node).map_or(0.0, |k| alloc.rates[k]),
        Role::Relay => match scenario.path_of(node) {
            Some(k) if alloc.rates[k] > 0.0 => n.tx_prob,
            _ => 0.0,
        },
    }
}

/// Probability that `i` transmits while `j` is not transmitting, `q(i,j)`.
pub fn pair_prob(scenario: &Scenario, alloc: &FlowAllocation, link: Link) -> f64 {
    let qi = node_activity(scenario, alloc, link.from);
    if scenario.node(link.to).role == Role::Destination {
        qi
    } else {
        qi * (1.0 - node_activity(scenario, alloc, link.to))
    }
}

/// How the decode probability of one active set was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PatternSource {
    ClosedForm,
    MonteCarlo,
}

/// Decode probabilities of one link for every interferer on/off pattern.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkThroughputModel {
    pub link: Link,
    /// `I(i,j)`, ordered by node id. Bit `n` of a pattern index selects
    /// `interferers[n]`.
    pub interferers: Vec<NodeId>,
    /// `P(i,j,l)` indexed by pattern `l`.
    pub subset_probs: Vec<f64>,
    pub sources: Vec<PatternSource>,
}

impl LinkThroughputModel {
    pub fn build(scenario: &Scenario, link: Link, options: &ModelOptions) -> Result<Self> {
        let interferers = scenario.interferer_set(link)?;
        if interferers.len() > MAX_INTERFERERS {
            return Err(Error::TooManyInterferers {
                from: scenario.node(link.from).name.clone(),
                to: scenario.node(link.to).name.clone(),
                count: interferers.len(),
                max: MAX_INTERFERERS,
            });
        }
        let policy = scenario.policy(link);
        let patterns = 1usize << interferers.len();
        let mut subset_probs = Vec::with_capacity(patterns);
        let mut sources = Vec::with_capacity(patterns);
        for l in 0..patterns {
            let active: Vec<NodeId> = interferers
                .iter()
                .enumerate()
                .filter(|(n, _)| l & (1 << n) != 0)
                .map(|(_, &id)| id)
                .collect();
            let (p, src) = decode_probability(scenario, link, &active, policy, options)?;
            subset_probs.push(p);
            sources.push(src);
        }
        Ok(Self {
            link,
            interferers,
            subset_probs,
            sources,
        })
    }

    /// Probability of interferer pattern `l` given per-interferer activities.
    pub fn pattern_weight(&self, l: usize, activity: &[f64]) -> f64 {
        activity
            .iter()
            .enumerate()
            .map(|(n, &a)| if l & (1 << n) != 0 { a } else { 1.0 - a })
            .product()
    }

    /// `q(i,j) * sum_l P(i,j,l) * weight(l)`.
    pub fn throughput(&self, pair_prob: f64, activity: &[f64]) -> f64 {
        debug_assert_eq!(activity.len(), self.interferers.len());
        if pair_prob == 0.0 {
            return 0.0;
        }
        let sum: f64 = self
            .subset_probs
            .iter()
            .enumerate()
            .map(|(l, &p)| p * self.pattern_weight(l, activity))
            .sum();
        pair_prob * sum
    }

    pub fn uses_monte_carlo(&self) -> bool {
        self.sources.contains(&PatternSource::MonteCarlo)
    }
}

/// Decode probability of `link` when exactly `active` interferers transmit.
///
/// Closed forms cover every IAN case and SIC with exactly one active
/// cancelable interferer and nothing else active. Any other SIC pattern is
/// estimated by Monte-Carlo and cached.
fn decode_probability(
    scenario: &Scenario,
    link: Link,
    active: &[NodeId],
    policy: &ReceptionPolicy,
    options: &ModelOptions,
) -> Result<(f64, PatternSource)> {
    let ch = scenario.channel();
    let tx = scenario.node(link.from).transmitter();
    let rx = scenario.node(link.to).position;
    let states: Vec<TransmitterState> = active
        .iter()
        .map(|&id| scenario.node(id).transmitter())
        .collect();

    let cancelable = match policy.mode {
        ReceptionMode::Ian => 0,
        ReceptionMode::Sic => active
            .iter()
            .filter(|id| policy.cancel_set.contains(id))
            .count(),
    };
    if cancelable == 0 {
        let p = channel::success_prob_ian_multi(&tx, &states, &rx, ch)?;
        return Ok((p, PatternSource::ClosedForm));
    }
    if cancelable == 1 && active.len() == 1 {
        let p = channel::success_prob_sic(&tx, &states[0], &rx, ch)?;
        return Ok((p, PatternSource::ClosedForm));
    }

    let tagged: Vec<(NodeId, TransmitterState)> =
        active.iter().copied().zip(states.iter().copied()).collect();
    let key = cache_key(&tx, &tagged, policy, &rx, ch, options.mc_samples);
    if let Some(&p) = mc_cache().lock().expect("cache lock").get(&key) {
        return Ok((p, PatternSource::MonteCarlo));
    }
    let est = channel::success_prob_mc(
        &tx,
        &tagged,
        policy,
        &rx,
        ch,
        options.mc_samples,
        MIXED_PATTERN_SEED,
    )?;
    mc_cache()
        .lock()
        .expect("cache lock")
        .insert(key, est.probability);
    Ok((est.probability, PatternSource::MonteCarlo))
}

type CacheKey = Vec<u64>;

fn mc_cache() -> &'static Mutex<HashMap<CacheKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn cache_key(
    tx: &TransmitterState,
    active: &[(NodeId, TransmitterState)],
    policy: &ReceptionPolicy,
    rx: &crate::channel::Point,
    ch: &crate::channel::ChannelParams,
    samples: u64,
) -> CacheKey {
    let state = |s: &TransmitterState| {
        [
            s.power.to_bits(),
            s.sinr_threshold.to_bits(),
            s.position.x.to_bits(),
            s.position.y.to_bits(),
        ]
    };
    let mut key = vec![
        samples,
        ch.path_loss_exponent.to_bits(),
        ch.noise_power.to_bits(),
        rx.x.to_bits(),
        rx.y.to_bits(),
    ];
    key.extend(state(tx));
    for (id, s) in active {
        key.push(id.0 as u64);
        key.extend(state(s));
    }
    key.push(u64::MAX);
    key.extend(policy.cancel_set.iter().map(|id| id.0 as u64));
    key
}

/// Prebuilt per-link decode tables for one scenario.
#[derive(Debug, Clone)]
pub struct ThroughputModel {
    scenario: Scenario,
    options: ModelOptions,
    links: BTreeMap<Link, LinkThroughputModel>,
}

impl ThroughputModel {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        Self::with_options(scenario, ModelOptions::default())
    }

    pub fn with_options(scenario: &Scenario, options: ModelOptions) -> Result<Self> {
        let links = scenario
            .links()
            .map(|l| LinkThroughputModel::build(scenario, l, &options).map(|m| (l, m)))
            .collect::<Result<_>>()?;
        Ok(Self {
            scenario: scenario.clone(),
            options,
            links,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn options(&self) -> &ModelOptions {
        &self.options
    }

    pub fn link_model(&self, link: Link) -> Option<&LinkThroughputModel> {
        self.links.get(&link)
    }

    pub fn link_models(&self) -> impl Iterator<Item = &LinkThroughputModel> {
        self.links.values()
    }

    /// Links whose decode table contains Monte-Carlo estimates.
    pub fn monte_carlo_links(&self) -> Vec<Link> {
        self.links
            .values()
            .filter(|m| m.uses_monte_carlo())
            .map(|m| m.link)
            .collect()
    }

    fn interferer_activity(&self, alloc: &FlowAllocation, id: NodeId) -> f64 {
        let a = node_activity(&self.scenario, alloc, id);
        if !self.options.interferer_half_duplex {
            return a;
        }
        match self.scenario.next_hop(id) {
            Some(next) if self.scenario.node(next).role != Role::Destination => {
                a * (1.0 - node_activity(&self.scenario, alloc, next))
            }
            _ => a,
        }
    }

    pub fn link_throughput(&self, alloc: &FlowAllocation, link: Link) -> Result<f64> {
        let model = self.links.get(&link).ok_or_else(|| Error::UnknownLink {
            from: self.scenario.node(link.from).name.clone(),
            to: self.scenario.node(link.to).name.clone(),
        })?;
        Ok(self.eval_link(alloc, model))
    }

    fn eval_link(&self, alloc: &FlowAllocation, model: &LinkThroughputModel) -> f64 {
        let activity: Vec<f64> = model
            .interferers
            .iter()
            .map(|&id| self.interferer_activity(alloc, id))
            .collect();
        model.throughput(pair_prob(&self.scenario, alloc, model.link), &activity)
    }

    /// Throughputs of every link of path `k`, in path order.
    pub fn path_link_throughputs(&self, alloc: &FlowAllocation, k: usize) -> Vec<f64> {
        self.scenario.paths()[k]
            .links()
            .map(|l| self.eval_link(alloc, &self.links[&l]))
            .collect()
    }

    /// Bottleneck throughput of path `k`.
    pub fn path_throughput(&self, alloc: &FlowAllocation, k: usize) -> f64 {
        self.path_link_throughputs(alloc, k)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn path_throughputs(&self, alloc: &FlowAllocation) -> Vec<f64> {
        (0..self.scenario.flow_count())
            .map(|k| self.path_throughput(alloc, k))
            .collect()
    }

    /// Sum of path bottleneck throughputs.
    pub fn aggregate_throughput(&self, alloc: &FlowAllocation) -> f64 {
        self.path_throughputs(alloc).iter().sum()
    }
}

/// One-shot evaluation of `T(i,j)`; builds the link's decode table.
pub fn link_throughput(scenario: &Scenario, alloc: &FlowAllocation, link: Link) -> Result<f64> {
    alloc.validate(scenario)?;
    let model = LinkThroughputModel::build(scenario, link, &ModelOptions::default())?;
    let activity: Vec<f64> = model
        .interferers
        .iter()
        .map(|&id| node_activity(scenario, alloc, id))
        .collect();
    Ok(model.throughput(pair_prob(scenario, alloc, link), &activity))
}

/// One-shot bottleneck throughput of a path.
pub fn path_throughput(scenario: &Scenario, alloc: &FlowAllocation, path: &Path) -> Result<f64> {
    path.links()
        .map(|l| link_throughput(scenario, alloc, l))
        .try_fold(f64::INFINITY, |acc, t| t.map(|t| acc.min(t)))
}

/// One-shot aggregate throughput.
pub fn aggregate_throughput(scenario: &Scenario, alloc: &FlowAllocation) -> Result<f64> {
    alloc.validate(scenario)?;
    Ok(ThroughputModel::new(scenario)?.aggregate_throughput(alloc))
}
