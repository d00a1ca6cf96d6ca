//! Slot-level simulator of the random-access MAC.
//!
//! Per slot:
//!
//! 1. each source transmits its head packet with probability `q` (a failed
//!    packet stays at the head and is retried under the same rule);
//! 2. each relay with a nonempty queue transmits when its backoff counter
//!    is 0 and otherwise counts down; the counter is redrawn uniformly on
//!    `{0..CW}` after every transmission and when a packet reaches an empty
//!    queue;
//! 3. a fading gain is drawn for every (transmitter, receiver) pair;
//! 4. every receiver that is not transmitting applies its reception policies
//!    to the full set of concurrent signals ([`sic_receive`]);
//! 5. decoded packets are acknowledged at once and move on; failed packets
//!    count a retry and are dropped past the retransmit limit.
//!
//! All randomness comes from one ChaCha stream seeded from the config, so a
//! run is a pure function of its config.

mod reception;
mod replicate;

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Link, NodeId, Role, Scenario, DEFAULT_CONTENTION_WINDOW};
use crate::throughput::FlowAllocation;

pub use reception::{sic_receive, Transmission};
pub use replicate::{replicate, Replication, Stat, Summary};

pub const DEFAULT_SLOTS: u64 = 20_000;
pub const DEFAULT_MAX_RETRANSMITS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    /// Topology, paths and the per-link reception policies to apply.
    pub scenario: Scenario,
    pub allocation: FlowAllocation,
    pub n_slots: u64,
    /// `None` retries forever.
    pub max_retransmits: Option<u32>,
    pub contention_window: u32,
    pub seed: u64,
    /// After a failed cancelation, still try the intended packet with the
    /// uncanceled signal as noise. Off gives the strict two-condition rule.
    pub sic_fallback: bool,
    /// Record a per-slot event log.
    pub trace: bool,
}

impl SimConfig {
    pub fn new(scenario: Scenario, allocation: FlowAllocation) -> Self {
        Self {
            scenario,
            allocation,
            n_slots: DEFAULT_SLOTS,
            max_retransmits: Some(DEFAULT_MAX_RETRANSMITS),
            contention_window: DEFAULT_CONTENTION_WINDOW,
            seed: 1,
            sic_fallback: true,
            trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots == 0 {
            return Err(Error::invalid("n_slots", 0.0, "must be at least 1"));
        }
        self.allocation.validate(&self.scenario)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Tx,
    Rx,
    Drop,
}

/// One row of the per-slot event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub slot: u64,
    pub node: String,
    pub event: TraceKind,
    pub packet_id: u64,
    pub outcome: String,
}

/// Writes a trace as CSV with columns `slot,node,event,packet_id,outcome`.
pub fn write_trace_csv<W: Write>(events: &[TraceEvent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in events {
        w.serialize(e)?;
    }
    w.flush().map_err(|e| Error::io("trace", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkStats {
    pub link: Link,
    pub label: String,
    pub attempts: u64,
    pub successes: u64,
    /// Attempts carrying a packet that had already failed on this link.
    pub retransmissions: u64,
    /// Successes per slot.
    pub throughput: f64,
    pub delivery_ratio: Option<f64>,
    pub retransmission_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowStats {
    pub flow: String,
    /// Packets that left the source at least once.
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Packets still at the source head or in a relay queue at the end.
    pub in_queue: u64,
    /// Deliveries per slot at the destination.
    pub aat: f64,
    /// Mean slots from first transmission to delivery, both inclusive.
    pub mean_delay: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeStats {
    pub node: NodeId,
    pub name: String,
    /// Time-averaged queue length, sampled at the end of each slot. A
    /// source counts its pending head packet only.
    pub mean_queue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelayStats {
    pub node: NodeId,
    pub name: String,
    pub inflow: f64,
    pub outflow: f64,
    /// `inflow / outflow`; above 1 the queue grows.
    pub throughput_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimMetrics {
    pub n_slots: u64,
    pub seed: u64,
    pub aat: f64,
    pub links: Vec<LinkStats>,
    pub flows: Vec<FlowStats>,
    pub nodes: Vec<NodeStats>,
    pub relays: Vec<RelayStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEvent>>,
}

impl SimMetrics {
    pub fn link(&self, link: Link) -> Option<&LinkStats> {
        self.links.iter().find(|l| l.link == link)
    }

    pub fn relay(&self, node: NodeId) -> Option<&RelayStats> {
        self.relays.iter().find(|r| r.node == node)
    }

    pub fn node(&self, node: NodeId) -> Option<&NodeStats> {
        self.nodes.iter().find(|n| n.node == node)
    }
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    id: u64,
    flow: usize,
    first_tx: u64,
    retries: u32,
}

#[derive(Debug, Default, Clone, Copy)]
struct Counter {
    attempts: u64,
    successes: u64,
    retransmissions: u64,
}

#[derive(Debug, Default, Clone, Copy)]
struct FlowCounter {
    injected: u64,
    delivered: u64,
    dropped: u64,
    delay_sum: u64,
}

pub fn run_sim(config: &SimConfig) -> Result<SimMetrics> {
    config.validate()?;
    let s = &config.scenario;
    let ch = s.channel();
    let n = s.nodes().len();

    // Mean received SNR of every transmitter at every node.
    let mut mean_snr = vec![vec![0.0; n]; n];
    for tx in s.nodes().iter().filter(|v| v.role.transmits()) {
        for rx in s.nodes() {
            if rx.id != tx.id {
                mean_snr[tx.id.0][rx.id.0] = tx.transmitter().mean_snr_at(&rx.position, ch)?;
            }
        }
    }

    let links: Vec<Link> = s.links().collect();
    let link_index = |l: Link| links.iter().position(|&x| x == l).expect("path link");
    let mut link_counts = vec![Counter::default(); links.len()];
    let mut flow_counts = vec![FlowCounter::default(); s.flow_count()];
    let mut queue_area = vec![0u64; n];

    let mut head: Vec<Option<Packet>> = vec![None; n];
    let mut queues: Vec<VecDeque<Packet>> = vec![VecDeque::new(); n];
    let mut backoff: Vec<u32> = vec![0; n];
    let mut next_id: u64 = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cw = config.contention_window;
    let mut trace = config.trace.then(Vec::new);

    let mut transmissions: Vec<Transmission> = Vec::with_capacity(n);
    let mut packets: Vec<Packet> = Vec::with_capacity(n);
    let mut success: Vec<bool> = Vec::with_capacity(n);
    let mut snrs: Vec<f64> = Vec::with_capacity(n);

    for slot in 0..config.n_slots {
        transmissions.clear();
        packets.clear();
        for v in s.nodes() {
            let id = v.id.0;
            let Some(next) = s.next_hop(v.id) else {
                continue;
            };
            let pkt = match v.role {
                Role::Source => {
                    let k = s.path_of(v.id).expect("source on a path");
                    let u: f64 = rng.gen();
                    if u >= config.allocation.rates[k] {
                        continue;
                    }
                    *head[id].get_or_insert_with(|| {
                        next_id += 1;
                        flow_counts[k].injected += 1;
                        Packet {
                            id: next_id,
                            flow: k,
                            first_tx: slot,
                            retries: 0,
                        }
                    })
                }
                Role::Relay => {
                    let Some(&p) = queues[id].front() else {
                        continue;
                    };
                    if backoff[id] > 0 {
                        backoff[id] -= 1;
                        continue;
                    }
                    backoff[id] = rng.gen_range(0..=cw);
                    p
                }
                Role::Destination => continue,
            };
            transmissions.push(Transmission {
                link: Link::new(v.id, next),
                packet_id: pkt.id,
                sinr_threshold: v.sinr_threshold,
            });
            packets.push(pkt);
        }

        success.clear();
        success.resize(transmissions.len(), false);
        for rx in s.nodes() {
            if !transmissions.iter().any(|t| t.link.to == rx.id) {
                continue;
            }
            snrs.clear();
            for t in &transmissions {
                let g: f64 = Exp1.sample(&mut rng);
                snrs.push(g * mean_snr[t.link.from.0][rx.id.0]);
            }
            let decoded = sic_receive(s, rx.id, &transmissions, &snrs, config.sic_fallback);
            for (i, ok) in decoded.into_iter().enumerate() {
                if ok {
                    success[i] = true;
                    if let Some(tr) = trace.as_mut() {
                        tr.push(TraceEvent {
                            slot,
                            node: rx.name.clone(),
                            event: TraceKind::Rx,
                            packet_id: transmissions[i].packet_id,
                            outcome: "decoded".into(),
                        });
                    }
                }
            }
        }

        for (i, t) in transmissions.iter().enumerate() {
            let from = t.link.from.0;
            let to = t.link.to;
            let mut pkt = packets[i];
            let c = &mut link_counts[link_index(t.link)];
            c.attempts += 1;
            if pkt.retries > 0 {
                c.retransmissions += 1;
            }
            if let Some(tr) = trace.as_mut() {
                tr.push(TraceEvent {
                    slot,
                    node: s.node(t.link.from).name.clone(),
                    event: TraceKind::Tx,
                    packet_id: pkt.id,
                    outcome: if success[i] { "success" } else { "failure" }.into(),
                });
            }
            let is_source = s.node(t.link.from).role == Role::Source;
            if success[i] {
                c.successes += 1;
                if is_source {
                    head[from] = None;
                } else {
                    queues[from].pop_front();
                }
                if s.node(to).role == Role::Destination {
                    let f = &mut flow_counts[pkt.flow];
                    f.delivered += 1;
                    f.delay_sum += slot - pkt.first_tx + 1;
                } else {
                    pkt.retries = 0;
                    if queues[to.0].is_empty() {
                        backoff[to.0] = rng.gen_range(0..=cw);
                    }
                    queues[to.0].push_back(pkt);
                }
                continue;
            }
            pkt.retries += 1;
            let dropped = config.max_retransmits.is_some_and(|m| pkt.retries > m);
            if dropped {
                flow_counts[pkt.flow].dropped += 1;
                if let Some(tr) = trace.as_mut() {
                    tr.push(TraceEvent {
                        slot,
                        node: s.node(t.link.from).name.clone(),
                        event: TraceKind::Drop,
                        packet_id: pkt.id,
                        outcome: "retry_limit".into(),
                    });
                }
            }
            if is_source {
                head[from] = (!dropped).then_some(pkt);
            } else if dropped {
                queues[from].pop_front();
            } else {
                queues[from][0] = pkt;
            }
        }

        for v in 0..n {
            queue_area[v] += queues[v].len() as u64 + u64::from(head[v].is_some());
        }
    }

    let slots = config.n_slots as f64;
    let link_stats: Vec<LinkStats> = links
        .iter()
        .zip(&link_counts)
        .map(|(&link, c)| LinkStats {
            link,
            label: s.link_label(link),
            attempts: c.attempts,
            successes: c.successes,
            retransmissions: c.retransmissions,
            throughput: c.successes as f64 / slots,
            delivery_ratio: ratio(c.successes, c.attempts),
            retransmission_fraction: ratio(c.retransmissions, c.attempts),
        })
        .collect();

    let flows: Vec<FlowStats> = s
        .paths()
        .iter()
        .enumerate()
        .map(|(k, path)| {
            let f = flow_counts[k];
            let in_queue = path
                .nodes
                .iter()
                .map(|v| {
                    queues[v.0].iter().filter(|p| p.flow == k).count() as u64
                        + u64::from(head[v.0].is_some_and(|p| p.flow == k))
                })
                .sum();
            FlowStats {
                flow: path.flow.clone(),
                injected: f.injected,
                delivered: f.delivered,
                dropped: f.dropped,
                in_queue,
                aat: f.delivered as f64 / slots,
                mean_delay: ratio(f.delay_sum, f.delivered),
            }
        })
        .collect();

    let nodes: Vec<NodeStats> = s
        .nodes()
        .iter()
        .filter(|v| v.role.transmits())
        .map(|v| NodeStats {
            node: v.id,
            name: v.name.clone(),
            mean_queue: queue_area[v.id.0] as f64 / slots,
        })
        .collect();

    let relays: Vec<RelayStats> = s
        .nodes()
        .iter()
        .filter(|v| v.role == Role::Relay)
        .map(|v| {
            let count = |pred: &dyn Fn(Link) -> bool| -> u64 {
                links
                    .iter()
                    .zip(&link_counts)
                    .filter(|(l, _)| pred(**l))
                    .map(|(_, c)| c.successes)
                    .sum()
            };
            let inflow = count(&|l| l.to == v.id);
            let outflow = count(&|l| l.from == v.id);
            RelayStats {
                node: v.id,
                name: v.name.clone(),
                inflow: inflow as f64 / slots,
                outflow: outflow as f64 / slots,
                throughput_ratio: (outflow > 0).then(|| inflow as f64 / outflow as f64),
            }
        })
        .collect();

    Ok(SimMetrics {
        n_slots: config.n_slots,
        seed: config.seed,
        aat: flows.iter().map(|f| f.aat).sum(),
        links: link_stats,
        flows,
        nodes,
        relays,
        trace,
    })
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}
