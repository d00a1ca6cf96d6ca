//! Static topology: nodes, flows routed over disjoint source paths, per-link
//! reception policies, and derived interferer sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelParams, Point, ReceptionPolicy, TransmitterState};
use crate::error::{Error, Result};

/// Index of a node in its scenario, in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A directed hop `from -> to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
}

impl Link {
    pub const fn new(from: NodeId, to: NodeId) -> Self {
        Self { from, to }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Relay,
    Destination,
}

impl Role {
    pub fn transmits(self) -> bool {
        !matches!(self, Role::Destination)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub position: Point,
    pub power: f64,
    pub sinr_threshold: f64,
    pub role: Role,
    /// Fixed attempt probability for relays. For sources this is only the
    /// default rate; allocations override it.
    pub tx_prob: f64,
}

impl Node {
    pub fn transmitter(&self) -> TransmitterState {
        TransmitterState {
            power: self.power,
            sinr_threshold: self.sinr_threshold,
            position: self.position,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Path {
    pub flow: String,
    /// Source first, destination last.
    pub nodes: Vec<NodeId>,
}

impl Path {
    pub fn source(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn destination(&self) -> NodeId {
        *self.nodes.last().expect("validated path has nodes")
    }

    /// Number of hops, `|r_k|`.
    pub fn hops(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        self.nodes.windows(2).map(|w| Link::new(w[0], w[1]))
    }

    pub fn first_link(&self) -> Link {
        Link::new(self.nodes[0], self.nodes[1])
    }
}

/// Relay attempt probability matching the mean attempt rate of a uniform
/// backoff on `{0, .., cw}`: one attempt every `cw/2 + 1` slots.
pub fn relay_tx_prob_for_window(cw: u32) -> f64 {
    1.0 / (f64::from(cw) / 2.0 + 1.0)
}

pub const DEFAULT_CONTENTION_WINDOW: u32 = 5;
pub const DEFAULT_POWER: f64 = 0.1;

/// An immutable, validated network description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    name: String,
    channel: ChannelParams,
    nodes: Vec<Node>,
    paths: Vec<Path>,
    policies: BTreeMap<Link, ReceptionPolicy>,
    exclusions: BTreeMap<Link, BTreeSet<NodeId>>,
    #[serde(skip)]
    path_of: Vec<Option<usize>>,
}

impl Scenario {
    /// Validates and assembles a scenario. Nodes must already carry ids equal
    /// to their index.
    pub fn new(
        name: impl Into<String>,
        channel: ChannelParams,
        nodes: Vec<Node>,
        paths: Vec<Path>,
        mut policies: BTreeMap<Link, ReceptionPolicy>,
        exclusions: BTreeMap<Link, BTreeSet<NodeId>>,
    ) -> Result<Self> {
        channel
            .validate()
            .map_err(|e| Error::validation("channel", e.to_string()))?;

        let mut names = BTreeSet::new();
        for (idx, node) in nodes.iter().enumerate() {
            let field = |f: &str| format!("nodes[{idx}].{f}");
            if node.id != NodeId(idx) {
                return Err(Error::validation(
                    field("id"),
                    "node ids must match their index",
                ));
            }
            if node.name.is_empty() {
                return Err(Error::validation(field("name"), "must not be empty"));
            }
            if !names.insert(node.name.as_str()) {
                return Err(Error::validation(
                    field("name"),
                    format!("duplicate node name `{}`", node.name),
                ));
            }
            if !(node.position.x.is_finite() && node.position.y.is_finite()) {
                return Err(Error::validation(field("x"), "position must be finite"));
            }
            if !(node.power > 0.0 && node.power.is_finite()) {
                return Err(Error::validation(field("power"), "must be positive"));
            }
            if !(node.sinr_threshold >= 0.0 && node.sinr_threshold.is_finite()) {
                return Err(Error::validation(field("sinr_threshold"), "must be >= 0"));
            }
            if !(0.0..=1.0).contains(&node.tx_prob) {
                return Err(Error::validation(field("tx_prob"), "must lie in [0, 1]"));
            }
        }

        if paths.is_empty() {
            return Err(Error::validation("paths", "at least one path is required"));
        }
        let mut path_of = vec![None; nodes.len()];
        for (k, path) in paths.iter().enumerate() {
            let field = format!("paths[{k}].nodes");
            if path.nodes.len() < 2 {
                return Err(Error::validation(field, "a path needs at least two nodes"));
            }
            let mut seen = BTreeSet::new();
            for (pos, &id) in path.nodes.iter().enumerate() {
                let node = nodes
                    .get(id.0)
                    .ok_or_else(|| Error::validation(&field, format!("unknown node {id}")))?;
                if !seen.insert(id) {
                    return Err(Error::validation(
                        &field,
                        format!("node `{}` appears twice", node.name),
                    ));
                }
                let expected = if pos == 0 {
                    Role::Source
                } else if pos + 1 == path.nodes.len() {
                    Role::Destination
                } else {
                    Role::Relay
                };
                if node.role != expected {
                    return Err(Error::validation(
                        &field,
                        format!(
                            "node `{}` at position {pos} must be a {expected:?}, found {:?}",
                            node.name, node.role
                        ),
                    ));
                }
                if node.role != Role::Destination {
                    if let Some(other) = path_of[id.0] {
                        return Err(Error::validation(
                            &field,
                            format!(
                                "node `{}` is shared with paths[{other}]; paths must be disjoint",
                                node.name
                            ),
                        ));
                    }
                    path_of[id.0] = Some(k);
                }
            }
        }

        let edges: BTreeSet<Link> = paths.iter().flat_map(|p| p.links()).collect();
        for (link, policy) in &policies {
            let field = format!(
                "policies[{}->{}]",
                name_of(&nodes, link.from),
                name_of(&nodes, link.to)
            );
            if !edges.contains(link) {
                return Err(Error::validation(field, "link is not an edge of any path"));
            }
            policy
                .check(link.from)
                .map_err(|m| Error::validation(format!("{field}.cancel"), m))?;
            for &c in &policy.cancel_set {
                let node = nodes.get(c.0).ok_or_else(|| {
                    Error::validation(format!("{field}.cancel"), format!("unknown node {c}"))
                })?;
                if !node.role.transmits() || c == link.to {
                    return Err(Error::validation(
                        format!("{field}.cancel"),
                        format!("node `{}` never transmits to this receiver", node.name),
                    ));
                }
            }
        }
        // Cancelation runs strongest first by mean received power; the listed
        // order only breaks ties.
        for (link, policy) in policies.iter_mut() {
            let rx = nodes[link.to.0].position;
            let mean_power = |id: &NodeId| {
                let v = &nodes[id.0];
                v.power * v.position.distance(&rx).powf(-channel.path_loss_exponent)
            };
            policy
                .cancel_set
                .sort_by(|a, b| mean_power(b).total_cmp(&mean_power(a)));
        }
        for (link, ignored) in &exclusions {
            let field = format!(
                "exclusions[{}->{}]",
                name_of(&nodes, link.from),
                name_of(&nodes, link.to)
            );
            if !edges.contains(link) {
                return Err(Error::validation(field, "link is not an edge of any path"));
            }
            if let Some(bad) = ignored.iter().find(|id| id.0 >= nodes.len()) {
                return Err(Error::validation(field, format!("unknown node {bad}")));
            }
        }

        Ok(Self {
            name: name.into(),
            channel,
            nodes,
            paths,
            policies,
            exclusions,
            path_of,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn node_by_name(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn flow_count(&self) -> usize {
        self.paths.len()
    }

    /// Index of the path a source or relay belongs to (`r(i)`).
    pub fn path_of(&self, id: NodeId) -> Option<usize> {
        self.path_of.get(id.0).copied().flatten()
    }

    /// Next hop of a transmitting node along its path.
    pub fn next_hop(&self, id: NodeId) -> Option<NodeId> {
        let path = &self.paths[self.path_of(id)?];
        let pos = path.nodes.iter().position(|&n| n == id)?;
        path.nodes.get(pos + 1).copied()
    }

    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        self.paths.iter().flat_map(|p| p.links())
    }

    pub fn has_link(&self, link: Link) -> bool {
        self.links().any(|l| l == link)
    }

    pub fn policy(&self, link: Link) -> &ReceptionPolicy {
        static IAN: std::sync::OnceLock<ReceptionPolicy> = std::sync::OnceLock::new();
        self.policies
            .get(&link)
            .unwrap_or_else(|| IAN.get_or_init(ReceptionPolicy::ian))
    }

    pub fn policies(&self) -> &BTreeMap<Link, ReceptionPolicy> {
        &self.policies
    }

    pub fn exclusions(&self) -> &BTreeMap<Link, BTreeSet<NodeId>> {
        &self.exclusions
    }

    pub fn link_label(&self, link: Link) -> String {
        format!(
            "({},{})",
            self.node(link.from).name,
            self.node(link.to).name
        )
    }

    fn check_link(&self, link: Link) -> Result<()> {
        if self.has_link(link) {
            Ok(())
        } else {
            Err(Error::UnknownLink {
                from: self
                    .nodes
                    .get(link.from.0)
                    .map_or_else(|| link.from.to_string(), |n| n.name.clone()),
                to: self
                    .nodes
                    .get(link.to.0)
                    .map_or_else(|| link.to.to_string(), |n| n.name.clone()),
            })
        }
    }

    /// Nodes whose transmissions can overlap with `link`: every source and
    /// relay other than the link's endpoints, minus configured exclusions,
    /// ordered by id.
    pub fn interferer_set(&self, link: Link) -> Result<Vec<NodeId>> {
        self.check_link(link)?;
        let excluded = self.exclusions.get(&link);
        Ok(self
            .nodes
            .iter()
            .filter(|n| n.role.transmits() && n.id != link.from && n.id != link.to)
            .filter(|n| excluded.is_none_or(|ex| !ex.contains(&n.id)))
            .map(|n| n.id)
            .collect())
    }

    /// Returns a copy with the given per-link policies replacing all existing
    /// ones.
    pub fn with_policies(&self, policies: BTreeMap<Link, ReceptionPolicy>) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.channel,
            self.nodes.clone(),
            self.paths.clone(),
            policies,
            self.exclusions.clone(),
        )
    }

    /// Returns a copy with every node's SINR threshold set to `gamma`.
    pub fn with_threshold(&self, gamma: f64) -> Result<Self> {
        let mut nodes = self.nodes.clone();
        for n in &mut nodes {
            n.sinr_threshold = gamma;
        }
        Self::new(
            self.name.clone(),
            self.channel,
            nodes,
            self.paths.clone(),
            self.policies.clone(),
            self.exclusions.clone(),
        )
    }

    /// Returns a copy with every relay's attempt probability set to `q`.
    pub fn with_relay_tx_prob(&self, q: f64) -> Result<Self> {
        let mut nodes = self.nodes.clone();
        for n in nodes.iter_mut().filter(|n| n.role == Role::Relay) {
            n.tx_prob = q;
        }
        Self::new(
            self.name.clone(),
            self.channel,
            nodes,
            self.paths.clone(),
            self.policies.clone(),
            self.exclusions.clone(),
        )
    }

    pub fn with_exclusions(&self, exclusions: BTreeMap<Link, BTreeSet<NodeId>>) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.channel,
            self.nodes.clone(),
            self.paths.clone(),
            self.policies.clone(),
            exclusions,
        )
    }

    /// Interference-free success probability of a link, `p_{i/i}^j`.
    pub fn solo_success(&self, link: Link) -> Result<f64> {
        let tx = self.node(link.from).transmitter();
        channel::success_prob_solo(&tx, &self.node(link.to).position, &self.channel)
    }
}

fn name_of(nodes: &[Node], id: NodeId) -> String {
    nodes
        .get(id.0)
        .map_or_else(|| id.to_string(), |n| n.name.clone())
}

/// Product of the interference-free success probabilities along a path.
pub fn end_to_end_success_prob(scenario: &Scenario, path: &Path) -> Result<f64> {
    path.links()
        .map(|l| scenario.solo_success(l))
        .try_fold(1.0, |acc, p| p.map(|p| acc * p))
}

/// Smallest interference-free link success probability along a path.
pub fn bottleneck_success_prob(scenario: &Scenario, path: &Path) -> Result<f64> {
    path.links()
        .map(|l| scenario.solo_success(l))
        .try_fold(f64::INFINITY, |acc, p| p.map(|p| acc.min(p)))
}
