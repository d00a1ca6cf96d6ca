//! Independent oracles and random instance generators shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sicflow::allocation::AllocationResult;
use sicflow::channel::{
    self, ChannelParams, Point, ReceptionMode, ReceptionPolicy, TransmitterState,
};
use sicflow::network::{Link, Node, NodeId, Path, Role, Scenario};
use sicflow::throughput::{FlowAllocation, MIXED_PATTERN_SAMPLES, MIXED_PATTERN_SEED};

/// Activity of a node, written out from the model rules.
pub fn activity(s: &Scenario, alloc: &FlowAllocation, id: NodeId) -> f64 {
    for (k, path) in s.paths().iter().enumerate() {
        if let Some(pos) = path.nodes.iter().position(|&n| n == id) {
            if pos == 0 {
                return alloc.rates[k];
            }
            if pos + 1 == path.nodes.len() {
                return 0.0;
            }
            return if alloc.rates[k] > 0.0 {
                s.node(id).tx_prob
            } else {
                0.0
            };
        }
    }
    0.0
}

/// Decode probability for an explicit active set.
fn decode_prob(s: &Scenario, link: Link, active: &[NodeId], samples: u64) -> f64 {
    let ch = s.channel();
    let tx = s.node(link.from).transmitter();
    let rx = s.node(link.to).position;
    let states: Vec<TransmitterState> = active.iter().map(|&k| s.node(k).transmitter()).collect();
    let policy = s.policy(link);
    let cancelable: Vec<NodeId> = match policy.mode {
        ReceptionMode::Ian => vec![],
        ReceptionMode::Sic => active
            .iter()
            .copied()
            .filter(|k| policy.cancel_set.contains(k))
            .collect(),
    };
    if cancelable.is_empty() {
        return channel::success_prob_ian_multi(&tx, &states, &rx, ch).unwrap();
    }
    if active.len() == 1 {
        return channel::success_prob_sic(&tx, &states[0], &rx, ch).unwrap();
    }
    let tagged: Vec<(NodeId, TransmitterState)> = active.iter().copied().zip(states).collect();
    channel::success_prob_mc(&tx, &tagged, policy, &rx, ch, samples, MIXED_PATTERN_SEED)
        .unwrap()
        .probability
}

fn enumerate(
    s: &Scenario,
    link: Link,
    interferers: &[NodeId],
    act: &[f64],
    active: &mut Vec<NodeId>,
    weight: f64,
    samples: u64,
) -> f64 {
    match interferers.split_first() {
        None => weight * decode_prob(s, link, active, samples),
        Some((&first, rest)) => {
            let off = enumerate(
                s,
                link,
                rest,
                &act[1..],
                active,
                weight * (1.0 - act[0]),
                samples,
            );
            active.push(first);
            let on = enumerate(s, link, rest, &act[1..], active, weight * act[0], samples);
            active.pop();
            off + on
        }
    }
}

/// Link throughput by walking every on/off combination of the interferers.
pub fn brute_link_throughput(s: &Scenario, alloc: &FlowAllocation, link: Link) -> f64 {
    brute_link_throughput_with(s, alloc, link, MIXED_PATTERN_SAMPLES)
}

/// As [`brute_link_throughput`], with the sample count used for mixed
/// cancelation patterns.
pub fn brute_link_throughput_with(
    s: &Scenario,
    alloc: &FlowAllocation,
    link: Link,
    samples: u64,
) -> f64 {
    let interferers: Vec<NodeId> = s
        .nodes()
        .iter()
        .filter(|v| v.role.transmits() && v.id != link.from && v.id != link.to)
        .map(|v| v.id)
        .filter(|id| !s.exclusions().get(&link).is_some_and(|ex| ex.contains(id)))
        .collect();
    let act: Vec<f64> = interferers.iter().map(|&k| activity(s, alloc, k)).collect();
    let qi = activity(s, alloc, link.from);
    let pair = if s.node(link.to).role == Role::Destination {
        qi
    } else {
        qi * (1.0 - activity(s, alloc, link.to))
    };
    if pair == 0.0 {
        return 0.0;
    }
    pair * enumerate(s, link, &interferers, &act, &mut Vec::new(), 1.0, samples)
}

/// Checks S1 to S4 against brute-force link throughputs.
pub fn check_constraints(s: &Scenario, r: &AllocationResult, tol: f64) -> Result<(), String> {
    let a = &r.allocation;
    for (k, &q) in a.rates.iter().enumerate() {
        if !(-tol..=1.0 + tol).contains(&q) {
            return Err(format!("S1: rate[{k}] = {q}"));
        }
    }
    for (k, path) in s.paths().iter().enumerate() {
        let t: Vec<f64> = path
            .links()
            .map(|l| brute_link_throughput(s, a, l))
            .collect();
        for (n, &tn) in t.iter().enumerate().skip(1) {
            if t[0] > tn + tol {
                return Err(format!(
                    "S2: path {k} first link {} > link {n} {}",
                    t[0], tn
                ));
            }
        }
        if path.hops() > 1 {
            let aux = a.aux[k].ok_or(format!("path {k} has no auxiliary rate"))?;
            if !(-tol..=1.0 + tol).contains(&aux) {
                return Err(format!("S3: aux[{k}] = {aux}"));
            }
            if let Some(&tn) = t.iter().find(|&&tn| aux > tn + tol) {
                return Err(format!("S4: aux[{k}] = {aux} > {tn}"));
            }
        }
    }
    Ok(())
}

pub fn node(
    id: usize,
    name: String,
    position: Point,
    role: Role,
    gamma: f64,
    power: f64,
    relay_q: f64,
) -> Node {
    Node {
        id: NodeId(id),
        name,
        position,
        power,
        sinr_threshold: gamma,
        role,
        tx_prob: match role {
            Role::Source => 1.0,
            Role::Relay => relay_q,
            Role::Destination => 0.0,
        },
    }
}

/// A random network with at most five transmitters, so no link has more
/// than four interferers. Reception policies are drawn at random, mixed
/// SIC patterns included.
pub fn random_network(rng: &mut ChaCha8Rng) -> Scenario {
    let ch = ChannelParams::unit_noise(rng.gen_range(2.5..4.0));
    let gamma = rng.gen_range(0.1..2.0);
    let relay_q = rng.gen_range(0.1..0.6);
    let flows = rng.gen_range(1..=3);
    let mut hops: Vec<usize> = (0..flows).map(|_| rng.gen_range(1..=2)).collect();
    while hops.iter().sum::<usize>() > 5 {
        let i = hops.iter().position(|&h| h > 1).unwrap();
        hops[i] -= 1;
    }
    let pos = |rng: &mut ChaCha8Rng| Point::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let mut nodes = vec![node(
        0,
        "d".into(),
        Point::new(0.0, 0.0),
        Role::Destination,
        gamma,
        1.0,
        relay_q,
    )];
    let mut paths = Vec::new();
    for (k, &h) in hops.iter().enumerate() {
        let mut ids = Vec::new();
        for n in 0..h {
            let id = nodes.len();
            let role = if n == 0 { Role::Source } else { Role::Relay };
            let mut p = pos(rng);
            while p.distance(&Point::new(0.0, 0.0)) < 0.3 {
                p = pos(rng);
            }
            nodes.push(node(
                id,
                format!("f{k}n{n}"),
                p,
                role,
                gamma,
                rng.gen_range(0.5..2.0),
                relay_q,
            ));
            ids.push(NodeId(id));
        }
        ids.push(NodeId(0));
        paths.push(Path {
            flow: format!("f{k}"),
            nodes: ids,
        });
    }
    let transmitters: Vec<NodeId> = nodes
        .iter()
        .filter(|v| v.role.transmits())
        .map(|v| v.id)
        .collect();
    let mut policies = BTreeMap::new();
    for l in paths.iter().flat_map(|p| p.links()) {
        if rng.gen_bool(0.5) {
            let mut cands: Vec<NodeId> = transmitters
                .iter()
                .copied()
                .filter(|&t| t != l.from && t != l.to)
                .collect();
            if cands.is_empty() {
                continue;
            }
            cands.shuffle(rng);
            cands.truncate(rng.gen_range(1..=2));
            policies.insert(l, ReceptionPolicy::sic(cands));
        }
    }
    Scenario::new("random", ch, nodes, paths, policies, BTreeMap::new()).unwrap()
}

/// A random builtin-shaped instance: flows `1 -> R -> d` and `2 -> d` with
/// random geometry, threshold and policy.
pub fn random_two_flow(rng: &mut ChaCha8Rng) -> Scenario {
    use sicflow::topologies::{variant_policies, PolicyVariant};
    let gamma = rng.gen_range(0.2..2.5);
    let ch = ChannelParams::unit_noise(3.0);
    let p = |rng: &mut ChaCha8Rng| Point::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
    let d = Point::new(0.0, 0.0);
    let r = Point::new(rng.gen_range(0.4..1.2), 0.0);
    let mut n1 = p(rng);
    let mut n2 = p(rng);
    while n1.distance(&r) < 0.2 || n1.distance(&d) < 0.2 {
        n1 = p(rng);
    }
    while n2.distance(&r) < 0.2 || n2.distance(&d) < 0.2 {
        n2 = p(rng);
    }
    let q = 2.0 / 7.0;
    let nodes = vec![
        node(0, "1".into(), n1, Role::Source, gamma, 1.0, q),
        node(1, "2".into(), n2, Role::Source, gamma, 1.0, q),
        node(2, "R".into(), r, Role::Relay, gamma, 1.0, q),
        node(3, "d".into(), d, Role::Destination, gamma, 1.0, q),
    ];
    let paths = vec![
        Path {
            flow: "f1".into(),
            nodes: vec![NodeId(0), NodeId(2), NodeId(3)],
        },
        Path {
            flow: "f2".into(),
            nodes: vec![NodeId(1), NodeId(3)],
        },
    ];
    let variant = *PolicyVariant::ALL.choose(rng).unwrap();
    Scenario::new(
        "two-flow",
        ch,
        nodes,
        paths,
        variant_policies(1, variant),
        BTreeMap::new(),
    )
    .unwrap()
}

pub fn random_rates(rng: &mut ChaCha8Rng, flows: usize) -> FlowAllocation {
    FlowAllocation::new(
        (0..flows)
            .map(|_| match rng.gen_range(0..5) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.gen_range(0.0..1.0),
            })
            .collect(),
    )
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
