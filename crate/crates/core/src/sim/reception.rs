use crate::channel::{decode_tracking_cancelations, Signal};
use crate::network::{Link, NodeId, Scenario};

/// One packet on the air in the current slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub link: Link,
    pub packet_id: u64,
    pub sinr_threshold: f64,
}

/// Decides which transmissions `receiver` decodes this slot.
///
/// `snrs[n]` is the instantaneous received SNR of `transmissions[n]` at the
/// receiver (fading gain included). Each transmission addressed to the
/// receiver is decoded under the policy of its link. A signal canceled while
/// decoding another one counts as received when it was addressed to this
/// receiver too. Returns one flag per transmission; transmissions addressed
/// elsewhere are never flagged, nor is anything when the receiver itself
/// is among the transmitters.
pub fn sic_receive(
    scenario: &Scenario,
    receiver: NodeId,
    transmissions: &[Transmission],
    snrs: &[f64],
    fallback: bool,
) -> Vec<bool> {
    debug_assert_eq!(transmissions.len(), snrs.len());
    let mut decoded = vec![false; transmissions.len()];
    if transmissions.iter().any(|t| t.link.from == receiver) {
        return decoded;
    }
    let signals: Vec<Signal> = transmissions
        .iter()
        .zip(snrs)
        .map(|(t, &snr)| Signal {
            snr,
            threshold: t.sinr_threshold,
        })
        .collect();

    let mut others = Vec::with_capacity(signals.len());
    let mut other_idx = Vec::with_capacity(signals.len());
    let mut removed = Vec::with_capacity(signals.len());
    for (i, t) in transmissions.iter().enumerate() {
        if t.link.to != receiver {
            continue;
        }
        others.clear();
        other_idx.clear();
        for (n, s) in signals.iter().enumerate() {
            if n != i {
                others.push(*s);
                other_idx.push(n);
            }
        }
        let policy = scenario.policy(t.link);
        let order: Vec<usize> = policy
            .cancel_set
            .iter()
            .filter_map(|id| {
                other_idx
                    .iter()
                    .position(|&n| transmissions[n].link.from == *id)
            })
            .collect();
        removed.clear();
        removed.resize(others.len(), false);
        if decode_tracking_cancelations(signals[i], &others, &order, fallback, &mut removed) {
            decoded[i] = true;
        }
        for (pos, &gone) in removed.iter().enumerate() {
            let n = other_idx[pos];
            if gone && transmissions[n].link.to == receiver {
                decoded[n] = true;
            }
        }
    }
    decoded
}
