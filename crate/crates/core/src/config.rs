//! TOML scenario files.
//!
//! ```toml
//! name = "example"
//!
//! [channel]
//! path_loss_exponent = 3.0   # default 3.0
//! noise_power = 7e-11        # watts, default 7e-11
//!
//! [defaults]
//! power = 0.1                # watts
//! sinr_threshold = 0.5
//! relay_tx_prob = 0.2857142857142857
//!
//! [[nodes]]
//! name = "1"
//! x = -400.0
//! y = 0.0
//! role = "source"            # source | relay | destination
//! # power, sinr_threshold (or rate in bits/s/Hz), tx_prob override defaults
//!
//! [[paths]]
//! flow = "f1"
//! nodes = ["1", "R", "d"]
//!
//! [[policies]]               # per incoming link; unlisted links use IAN
//! receiver = "R"
//! transmitter = "1"
//! mode = "sic"               # ian | sic
//! cancel = ["2"]             # decoded strongest first
//!
//! [[exclusions]]             # interferers ignored when modeling a link
//! receiver = "d"
//! transmitter = "2"
//! ignore = ["1"]
//! ```
//!
//! Syntax and type errors report the line and column; semantic errors name
//! the offending field.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::channel::{threshold_for_rate, ChannelParams, Point, ReceptionMode, ReceptionPolicy};
use crate::error::{Error, Result};
use crate::network::{
    relay_tx_prob_for_window, Link, Node, NodeId, Path, Role, Scenario, DEFAULT_CONTENTION_WINDOW,
    DEFAULT_POWER,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default = "default_name")]
    name: String,
    #[serde(default)]
    channel: ChannelSection,
    #[serde(default)]
    defaults: DefaultsSection,
    nodes: Vec<NodeEntry>,
    paths: Vec<PathEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    policies: Vec<PolicyEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    exclusions: Vec<ExclusionEntry>,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    #[serde(default = "default_exponent")]
    path_loss_exponent: f64,
    #[serde(default = "default_noise")]
    noise_power: f64,
}

fn default_exponent() -> f64 {
    ChannelParams::default().path_loss_exponent
}

fn default_noise() -> f64 {
    ChannelParams::default().noise_power
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            path_loss_exponent: default_exponent(),
            noise_power: default_noise(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DefaultsSection {
    #[serde(default = "default_power")]
    power: f64,
    #[serde(default)]
    sinr_threshold: f64,
    #[serde(default = "default_relay_q")]
    relay_tx_prob: f64,
}

fn default_power() -> f64 {
    DEFAULT_POWER
}

fn default_relay_q() -> f64 {
    relay_tx_prob_for_window(DEFAULT_CONTENTION_WINDOW)
}

impl Default for DefaultsSection {
    fn default() -> Self {
        Self {
            power: default_power(),
            sinr_threshold: 0.0,
            relay_tx_prob: default_relay_q(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    name: String,
    x: f64,
    y: f64,
    role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sinr_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tx_prob: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flow: Option<String>,
    nodes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyEntry {
    receiver: String,
    transmitter: String,
    mode: ReceptionMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    cancel: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExclusionEntry {
    receiver: String,
    transmitter: String,
    ignore: Vec<String>,
}

/// Parses and validates a scenario file.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|span| line_col(text, span.start))
            .unwrap_or((0, 0));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    build(file)
}

pub fn load_scenario_file(path: &std::path::Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_scenario(&text)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn build(file: ScenarioFile) -> Result<Scenario> {
    let channel = ChannelParams {
        path_loss_exponent: file.channel.path_loss_exponent,
        noise_power: file.channel.noise_power,
    };
    let index: BTreeMap<&str, NodeId> = file
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.name.as_str(), NodeId(i)))
        .collect();
    let lookup = |name: &str, field: String| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::validation(field, format!("unknown node `{name}`")))
    };

    let mut nodes = Vec::with_capacity(file.nodes.len());
    for (i, n) in file.nodes.iter().enumerate() {
        let sinr_threshold = match (n.sinr_threshold, n.rate) {
            (Some(_), Some(_)) => {
                return Err(Error::validation(
                    format!("nodes[{i}]"),
                    "give either sinr_threshold or rate, not both",
                ))
            }
            (Some(g), None) => g,
            (None, Some(r)) => threshold_for_rate(r),
            (None, None) => file.defaults.sinr_threshold,
        };
        let tx_prob = n.tx_prob.unwrap_or(match n.role {
            Role::Source => 1.0,
            Role::Relay => file.defaults.relay_tx_prob,
            Role::Destination => 0.0,
        });
        nodes.push(Node {
            id: NodeId(i),
            name: n.name.clone(),
            position: Point::new(n.x, n.y),
            power: n.power.unwrap_or(file.defaults.power),
            sinr_threshold,
            role: n.role,
            tx_prob,
        });
    }

    let mut paths = Vec::with_capacity(file.paths.len());
    for (k, p) in file.paths.iter().enumerate() {
        let ids = p
            .nodes
            .iter()
            .enumerate()
            .map(|(j, name)| lookup(name, format!("paths[{k}].nodes[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        paths.push(Path {
            flow: p.flow.clone().unwrap_or_else(|| format!("f{}", k + 1)),
            nodes: ids,
        });
    }

    let mut policies = BTreeMap::new();
    for (k, p) in file.policies.iter().enumerate() {
        let link = Link::new(
            lookup(&p.transmitter, format!("policies[{k}].transmitter"))?,
            lookup(&p.receiver, format!("policies[{k}].receiver"))?,
        );
        let cancel_set = p
            .cancel
            .iter()
            .enumerate()
            .map(|(j, name)| lookup(name, format!("policies[{k}].cancel[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        let policy = ReceptionPolicy {
            mode: p.mode,
            cancel_set,
        };
        policy
            .check(link.from)
            .map_err(|m| Error::validation(format!("policies[{k}].cancel"), m))?;
        if policies.insert(link, policy).is_some() {
            return Err(Error::validation(
                format!("policies[{k}]"),
                "duplicate policy for this link",
            ));
        }
    }

    let mut exclusions: BTreeMap<Link, BTreeSet<NodeId>> = BTreeMap::new();
    for (k, e) in file.exclusions.iter().enumerate() {
        let link = Link::new(
            lookup(&e.transmitter, format!("exclusions[{k}].transmitter"))?,
            lookup(&e.receiver, format!("exclusions[{k}].receiver"))?,
        );
        for (j, name) in e.ignore.iter().enumerate() {
            let id = lookup(name, format!("exclusions[{k}].ignore[{j}]"))?;
            exclusions.entry(link).or_default().insert(id);
        }
    }

    Scenario::new(file.name, channel, nodes, paths, policies, exclusions)
}

/// Serializes a scenario back into the file format.
pub fn to_toml(scenario: &Scenario) -> String {
    let name = |id: NodeId| scenario.node(id).name.clone();
    let file = ScenarioFile {
        name: scenario.name().to_string(),
        channel: ChannelSection {
            path_loss_exponent: scenario.channel().path_loss_exponent,
            noise_power: scenario.channel().noise_power,
        },
        defaults: DefaultsSection::default(),
        nodes: scenario
            .nodes()
            .iter()
            .map(|n| NodeEntry {
                name: n.name.clone(),
                x: n.position.x,
                y: n.position.y,
                role: n.role,
                power: Some(n.power),
                sinr_threshold: Some(n.sinr_threshold),
                rate: None,
                tx_prob: Some(n.tx_prob),
            })
            .collect(),
        paths: scenario
            .paths()
            .iter()
            .map(|p| PathEntry {
                flow: Some(p.flow.clone()),
                nodes: p.nodes.iter().map(|&id| name(id)).collect(),
            })
            .collect(),
        policies: scenario
            .policies()
            .iter()
            .map(|(link, p)| PolicyEntry {
                receiver: name(link.to),
                transmitter: name(link.from),
                mode: p.mode,
                cancel: p.cancel_set.iter().map(|&id| name(id)).collect(),
            })
            .collect(),
        exclusions: scenario
            .exclusions()
            .iter()
            .map(|(link, ids)| ExclusionEntry {
                receiver: name(link.to),
                transmitter: name(link.from),
                ignore: ids.iter().map(|&id| name(id)).collect(),
            })
            .collect(),
    };
    toml::to_string(&file).expect("scenario file is serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topologies::{builtin_scenario, PolicyVariant};

    const BASIC: &str = r#"
name = "two-hop"

[defaults]
sinr_threshold = 0.5

[[nodes]]
name = "s"
x = 0.0
y = 0.0
role = "source"

[[nodes]]
name = "r"
x = 100.0
y = 0.0
role = "relay"

[[nodes]]
name = "i"
x = 150.0
y = 80.0
role = "source"

[[nodes]]
name = "d"
x = 200.0
y = 0.0
role = "destination"

[[paths]]
nodes = ["s", "r", "d"]

[[paths]]
nodes = ["i", "d"]

[[policies]]
receiver = "r"
transmitter = "s"
mode = "sic"
cancel = ["i"]
"#;

    #[test]
    fn parses_basic_file() {
        let s = load_scenario(BASIC).unwrap();
        assert_eq!(s.nodes().len(), 4);
        assert_eq!(s.paths()[0].flow, "f1");
        assert_eq!(s.node(NodeId(1)).tx_prob, relay_tx_prob_for_window(5));
        assert_eq!(s.node(NodeId(0)).sinr_threshold, 0.5);
        let policy = s.policy(Link::new(NodeId(0), NodeId(1)));
        assert_eq!(policy.cancel_set, vec![NodeId(2)]);
        assert!(s.policy(Link::new(NodeId(2), NodeId(3))).is_ian());
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = "name = \"x\"\n[[nodes]]\nname = \"a\"\nx = oops\n";
        match load_scenario(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn type_error_reports_line() {
        let text = BASIC.replace("x = 100.0", "x = \"far\"");
        match load_scenario(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 15),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn repeated_node_in_path() {
        let text = BASIC.replace(
            r#"nodes = ["s", "r", "d"]"#,
            r#"nodes = ["s", "r", "r", "d"]"#,
        );
        let err = load_scenario(&text).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }), "{err}");
    }

    #[test]
    fn cancel_set_with_intended_transmitter() {
        let text = BASIC.replace(r#"cancel = ["i"]"#, r#"cancel = ["s"]"#);
        let err = load_scenario(&text).unwrap_err();
        match err {
            Error::Validation { field, message } => {
                assert_eq!(field, "policies[0].cancel");
                assert!(message.contains("intended"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_node_names_field() {
        let text = BASIC.replace(r#"nodes = ["i", "d"]"#, r#"nodes = ["j", "d"]"#);
        match load_scenario(&text).unwrap_err() {
            Error::Validation { field, .. } => assert_eq!(field, "paths[1].nodes[0]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn builtin_scenarios_round_trip() {
        for v in PolicyVariant::ALL {
            let s = builtin_scenario(3, 2.0, v).unwrap();
            let back = load_scenario(&to_toml(&s)).unwrap();
            assert_eq!(back, s);
        }
    }
}
