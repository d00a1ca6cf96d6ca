//! The three builtin four-node topologies.
//!
//! Every topology carries two flows toward `d`: `f1` over `1 -> R -> d` and
//! `f2` over `2 -> d`. Node 2 interferes at R; R (and, weakly, 1) interferes
//! at d. Topology 1 comes from [`calibrate::calibrate_topology1`]. Topologies
//! 2 and 3 were fitted offline to the per-topology TOFRA operating points
//! (flow rates and aggregate throughput at both thresholds) and are stored as
//! constants:
//!
//! | topology | r(1,R) | r(2,R) | r(2,d) | r(R,d) |
//! |----------|--------|--------|--------|--------|
//! | 2        | 356.1  | 146.7  | 442.2  | 357.0  |
//! | 3        | 332.6  | 139.3  | 239.0  | 316.0  |
//!
//! In topology 3, d is closer to 2 than to R, so SIC at d cancels 2 on link
//! (R,d) instead of canceling R on link (2,d).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::calibrate::{self, layout, Calibration};
use crate::channel::{ChannelParams, ReceptionPolicy};
use crate::error::{Error, Result};
use crate::network::{
    relay_tx_prob_for_window, Link, Node, NodeId, Path, Role, Scenario, DEFAULT_CONTENTION_WINDOW,
    DEFAULT_POWER,
};

pub const NODE_1: NodeId = NodeId(0);
pub const NODE_2: NodeId = NodeId(1);
pub const NODE_R: NodeId = NodeId(2);
pub const NODE_D: NodeId = NodeId(3);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Distances {
    pub r_1r: f64,
    pub r_2r: f64,
    pub r_2d: f64,
    pub r_rd: f64,
}

const TOPOLOGY_2: Distances = Distances {
    r_1r: 356.1,
    r_2r: 146.7,
    r_2d: 442.2,
    r_rd: 357.0,
};

const TOPOLOGY_3: Distances = Distances {
    r_1r: 332.6,
    r_2r: 139.3,
    r_2d: 239.0,
    r_rd: 316.0,
};

/// Calibration of topology 1 under the default channel, computed once.
pub fn topology1_calibration() -> &'static Calibration {
    static CAL: OnceLock<Calibration> = OnceLock::new();
    CAL.get_or_init(|| {
        calibrate::calibrate_topology1(DEFAULT_POWER, &ChannelParams::default())
            .expect("builtin calibration targets are reachable")
    })
}

pub fn distances(index: u8) -> Result<Distances> {
    match index {
        1 => {
            let c = topology1_calibration();
            Ok(Distances {
                r_1r: c.r_1r,
                r_2r: c.r_2r,
                r_2d: c.r_2d,
                r_rd: c.r_rd,
            })
        }
        2 => Ok(TOPOLOGY_2),
        3 => Ok(TOPOLOGY_3),
        other => Err(Error::UnknownTopology(other)),
    }
}

/// Which receivers apply successive interference cancelation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyVariant {
    /// Interference treated as noise everywhere.
    Ian,
    /// R cancels 2 on link (1,R).
    SicR,
    /// SIC at R and at d.
    SicRd,
}

impl PolicyVariant {
    pub const ALL: [PolicyVariant; 3] = [
        PolicyVariant::Ian,
        PolicyVariant::SicR,
        PolicyVariant::SicRd,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PolicyVariant::Ian => "IAN",
            PolicyVariant::SicR => "SIC(R)",
            PolicyVariant::SicRd => "SIC(R,d)",
        }
    }
}

impl fmt::Display for PolicyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolicyVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s
            .to_ascii_lowercase()
            .replace(['(', ')', ',', '_', '-'], "")
            .as_str()
        {
            "ian" => Ok(PolicyVariant::Ian),
            "sicr" => Ok(PolicyVariant::SicR),
            "sicrd" => Ok(PolicyVariant::SicRd),
            _ => Err(format!(
                "unknown policy `{s}` (expected ian, sic-r or sic-rd)"
            )),
        }
    }
}

/// Per-link policies realizing `variant` on builtin topology `index`.
pub fn variant_policies(index: u8, variant: PolicyVariant) -> BTreeMap<Link, ReceptionPolicy> {
    let mut policies = BTreeMap::new();
    if variant == PolicyVariant::Ian {
        return policies;
    }
    policies.insert(
        Link::new(NODE_1, NODE_R),
        ReceptionPolicy::sic(vec![NODE_2]),
    );
    if variant == PolicyVariant::SicRd {
        if index == 3 {
            policies.insert(
                Link::new(NODE_R, NODE_D),
                ReceptionPolicy::sic(vec![NODE_2]),
            );
        } else {
            policies.insert(
                Link::new(NODE_2, NODE_D),
                ReceptionPolicy::sic(vec![NODE_R]),
            );
        }
    }
    policies
}

/// Builtin topology with every receiver treating interference as noise.
pub fn builtin_topology(index: u8, gamma: f64) -> Result<Scenario> {
    builtin_scenario(index, gamma, PolicyVariant::Ian)
}

pub fn builtin_scenario(index: u8, gamma: f64, variant: PolicyVariant) -> Result<Scenario> {
    let dist = distances(index)?;
    let pos = layout(dist.r_1r, dist.r_2r, dist.r_2d, dist.r_rd)?;
    let relay_q = relay_tx_prob_for_window(DEFAULT_CONTENTION_WINDOW);
    let node = |id: NodeId, name: &str, position, role| Node {
        id,
        name: name.to_string(),
        position,
        power: DEFAULT_POWER,
        sinr_threshold: gamma,
        role,
        tx_prob: match role {
            Role::Source => 1.0,
            Role::Relay => relay_q,
            Role::Destination => 0.0,
        },
    };
    let nodes = vec![
        node(NODE_1, "1", pos.n1, Role::Source),
        node(NODE_2, "2", pos.n2, Role::Source),
        node(NODE_R, "R", pos.r, Role::Relay),
        node(NODE_D, "d", pos.d, Role::Destination),
    ];
    let paths = vec![
        Path {
            flow: "f1".into(),
            nodes: vec![NODE_1, NODE_R, NODE_D],
        },
        Path {
            flow: "f2".into(),
            nodes: vec![NODE_2, NODE_D],
        },
    ];
    Scenario::new(
        format!("topology{index}"),
        ChannelParams::default(),
        nodes,
        paths,
        variant_policies(index, variant),
        BTreeMap::new(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{bottleneck_success_prob, end_to_end_success_prob};

    #[test]
    fn builtin_paths() {
        let s = builtin_topology(1, 0.5).unwrap();
        let names: Vec<Vec<&str>> = s
            .paths()
            .iter()
            .map(|p| p.nodes.iter().map(|&n| s.node(n).name.as_str()).collect())
            .collect();
        assert_eq!(names, vec![vec!["1", "R", "d"], vec!["2", "d"]]);
    }

    #[test]
    fn builtin_paths_share_only_destination() {
        for idx in 1..=3 {
            let s = builtin_topology(idx, 0.5).unwrap();
            let a: std::collections::BTreeSet<_> = s.paths()[0].nodes.iter().collect();
            let b: std::collections::BTreeSet<_> = s.paths()[1].nodes.iter().collect();
            let shared: Vec<_> = a.intersection(&b).collect();
            assert_eq!(shared, vec![&&NODE_D]);
        }
    }

    #[test]
    fn interferer_sets_of_builtin_links() {
        let s = builtin_topology(1, 0.5).unwrap();
        assert_eq!(
            s.interferer_set(Link::new(NODE_1, NODE_R)).unwrap(),
            vec![NODE_2]
        );
        // Node 1 is included at d as well; its contribution is small.
        assert_eq!(
            s.interferer_set(Link::new(NODE_2, NODE_D)).unwrap(),
            vec![NODE_1, NODE_R]
        );
    }

    #[test]
    fn qualitative_geometry() {
        for idx in 1..=2 {
            let d = distances(idx).unwrap();
            assert!(d.r_2r < d.r_1r, "2 is closer to R than 1 is");
            assert!(d.r_rd < d.r_2d, "R is closer to d than 2 is");
        }
        let d3 = distances(3).unwrap();
        assert!(d3.r_2d < d3.r_rd, "topology 3: d closer to 2 than to R");
    }

    #[test]
    fn best_path_orderings() {
        for idx in 1..=3u8 {
            let s = builtin_topology(idx, 0.5).unwrap();
            let e2e: Vec<f64> = s
                .paths()
                .iter()
                .map(|p| end_to_end_success_prob(&s, p).unwrap())
                .collect();
            let wb: Vec<f64> = s
                .paths()
                .iter()
                .map(|p| bottleneck_success_prob(&s, p).unwrap())
                .collect();
            assert!(
                e2e[1] > e2e[0],
                "topology {idx}: 2-d has the best end-to-end"
            );
            if idx < 3 {
                assert!(
                    wb[0] > wb[1],
                    "topology {idx}: 1-R-d has the widest bottleneck"
                );
            } else {
                assert!(wb[1] > wb[0]);
            }
        }
    }

    #[test]
    fn variant_parse() {
        assert_eq!(
            "SIC(R,d)".parse::<PolicyVariant>().unwrap(),
            PolicyVariant::SicRd
        );
        assert_eq!(
            "sic-r".parse::<PolicyVariant>().unwrap(),
            PolicyVariant::SicR
        );
        assert_eq!("IAN".parse::<PolicyVariant>().unwrap(), PolicyVariant::Ian);
        assert!("sic-x".parse::<PolicyVariant>().is_err());
    }

    #[test]
    fn unknown_index() {
        assert!(matches!(
            builtin_topology(4, 0.5),
            Err(Error::UnknownTopology(4))
        ));
    }
}
