//! Link success probabilities under Rayleigh block fading.
//!
//! Every closed form here is written in terms of the outage exponent
//! `gamma * r^a * N0 / p`. With `N0 = 1` the expressions reduce to the
//! unit-noise forms; with the physical noise power they agree with the
//! SNR definition `p * |h|^2 * r^-a / N0` used by the Monte-Carlo path and
//! the slot simulator.
//!
//! The analytic path covers three cases: no interferer, any number of
//! interferers treated as noise (product form), and exactly one canceled
//! interferer. Anything else (several cancelable interferers, or a canceled
//! interferer mixed with noise-like ones) goes through [`success_prob_mc`].

use rand::SeedableRng;
use rand_distr::{Distribution, Exp1};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub path_loss_exponent: f64,
    /// Noise power in watts.
    pub noise_power: f64,
}

impl ChannelParams {
    pub fn new(path_loss_exponent: f64, noise_power: f64) -> Result<Self> {
        let ch = Self {
            path_loss_exponent,
            noise_power,
        };
        ch.validate()?;
        Ok(ch)
    }

    /// Unit noise variance, the normalization used by the textbook formulas.
    pub fn unit_noise(path_loss_exponent: f64) -> Self {
        Self {
            path_loss_exponent,
            noise_power: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.path_loss_exponent > 0.0 && self.path_loss_exponent.is_finite()) {
            return Err(Error::invalid(
                "path_loss_exponent",
                self.path_loss_exponent,
                "must be positive and finite",
            ));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::invalid(
                "noise_power",
                self.noise_power,
                "must be positive and finite",
            ));
        }
        Ok(())
    }
}

impl Default for ChannelParams {
    /// Path-loss exponent 3 and 7e-11 W noise.
    fn default() -> Self {
        Self {
            path_loss_exponent: 3.0,
            noise_power: 7e-11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmitterState {
    /// Transmit power in watts.
    pub power: f64,
    /// Decoding threshold `gamma = 2^R - 1`.
    pub sinr_threshold: f64,
    pub position: Point,
}

impl TransmitterState {
    pub fn new(power: f64, sinr_threshold: f64, position: Point) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::invalid(
                "power",
                power,
                "must be positive and finite",
            ));
        }
        if !(sinr_threshold >= 0.0 && sinr_threshold.is_finite()) {
            return Err(Error::invalid(
                "sinr_threshold",
                sinr_threshold,
                "must be non-negative and finite",
            ));
        }
        Ok(Self {
            power,
            sinr_threshold,
            position,
        })
    }

    /// Builds a transmitter from its rate in bits/s/Hz.
    pub fn from_rate(power: f64, rate: f64, position: Point) -> Result<Self> {
        Self::new(power, threshold_for_rate(rate), position)
    }

    pub fn rate(&self) -> f64 {
        rate_for_threshold(self.sinr_threshold)
    }

    /// Mean received SNR at `rx`, i.e. `p * r^-a / N0`.
    pub fn mean_snr_at(&self, rx: &Point, ch: &ChannelParams) -> Result<f64> {
        let r = checked_distance(&self.position, rx)?;
        Ok(self.power * r.powf(-ch.path_loss_exponent) / ch.noise_power)
    }
}

pub fn threshold_for_rate(rate: f64) -> f64 {
    rate.exp2() - 1.0
}

pub fn rate_for_threshold(gamma: f64) -> f64 {
    gamma.ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceptionMode {
    Ian,
    Sic,
}

/// How a receiver handles concurrent transmissions on one incoming link.
///
/// `cancel_set` is the ordered list of transmitters the receiver tries to
/// decode and subtract before decoding the intended signal. It is empty iff
/// the mode is [`ReceptionMode::Ian`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReceptionPolicy {
    pub mode: ReceptionMode,
    pub cancel_set: Vec<NodeId>,
}

impl ReceptionPolicy {
    pub fn ian() -> Self {
        Self {
            mode: ReceptionMode::Ian,
            cancel_set: Vec::new(),
        }
    }

    pub fn sic(cancel_set: Vec<NodeId>) -> Self {
        Self {
            mode: ReceptionMode::Sic,
            cancel_set,
        }
    }

    pub fn is_ian(&self) -> bool {
        self.mode == ReceptionMode::Ian
    }

    /// Checks the structural invariants against the intended transmitter of
    /// the link this policy is attached to.
    pub fn check(&self, intended: NodeId) -> std::result::Result<(), &'static str> {
        match self.mode {
            ReceptionMode::Ian if !self.cancel_set.is_empty() => {
                Err("IAN policy must have an empty cancel set")
            }
            ReceptionMode::Sic if self.cancel_set.is_empty() => {
                Err("SIC policy needs at least one cancelable transmitter")
            }
            _ if self.cancel_set.contains(&intended) => {
                Err("cancel set contains the intended transmitter")
            }
            _ => {
                let mut seen = self.cancel_set.clone();
                seen.sort_unstable();
                seen.dedup();
                if seen.len() != self.cancel_set.len() {
                    Err("cancel set lists a transmitter twice")
                } else {
                    Ok(())
                }
            }
        }
    }
}

impl Default for ReceptionPolicy {
    fn default() -> Self {
        Self::ian()
    }
}

fn checked_distance(a: &Point, b: &Point) -> Result<f64> {
    let r = a.distance(b);
    if r > 0.0 && r.is_finite() {
        Ok(r)
    } else {
        Err(Error::ZeroDistance)
    }
}

fn check_threshold(name: &str, gamma: f64) -> Result<()> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            gamma,
            "must be non-negative and finite",
        ))
    }
}

fn check_power(name: &str, power: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero {
        power >= 0.0
    } else {
        power > 0.0
    };
    if ok && power.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            power,
            if allow_zero {
                "must be non-negative and finite"
            } else {
                "must be positive and finite"
            },
        ))
    }
}

/// `gamma * r^a * N0 / p`
fn outage_exponent(gamma: f64, r: f64, power: f64, ch: &ChannelParams) -> f64 {
    gamma * r.powf(ch.path_loss_exponent) * ch.noise_power / power
}

fn clamp_probability(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// Success probability of an interference-free link: `exp(-gamma r^a N0 / p)`.
pub fn success_prob_solo(tx: &TransmitterState, rx: &Point, ch: &ChannelParams) -> Result<f64> {
    success_prob_ian_multi(tx, &[], rx, ch)
}

/// Success probability with one interferer treated as noise.
pub fn success_prob_ian(
    tx: &TransmitterState,
    interferer: &TransmitterState,
    rx: &Point,
    ch: &ChannelParams,
) -> Result<f64> {
    success_prob_ian_multi(tx, std::slice::from_ref(interferer), rx, ch)
}

/// Product-form success probability with every interferer treated as noise:
/// `exp(-gamma r^a N0/p) * prod_k [1 + gamma (p_k/p) (r/r_k)^a]^-1`.
///
/// Evaluated in log space. Interferers may have zero power (they then drop
/// out of the product exactly).
pub fn success_prob_ian_multi(
    tx: &TransmitterState,
    interferers: &[TransmitterState],
    rx: &Point,
    ch: &ChannelParams,
) -> Result<f64> {
    ch.validate()?;
    check_power("power", tx.power, false)?;
    check_threshold("sinr_threshold", tx.sinr_threshold)?;
    let a = ch.path_loss_exponent;
    let gamma = tx.sinr_threshold;
    let r = checked_distance(&tx.position, rx)?;

    let mut log_p = -outage_exponent(gamma, r, tx.power, ch);
    for k in interferers {
        check_power("interferer power", k.power, true)?;
        let r_k = checked_distance(&k.position, rx)?;
        log_p -= (gamma * (k.power / tx.power) * (r / r_k).powf(a)).ln_1p();
    }
    Ok(clamp_probability(log_p.exp()))
}

/// Joint probability that the receiver first decodes `canceled` against the
/// intended signal plus noise and then decodes `tx` interference-free:
///
/// `exp(-g1 r1^a N0/p1) * exp(-g2 (1+g1) r2^a N0/p2) * [1 + g2 (p1/p2)(r2/r1)^a]^-1`.
pub fn success_prob_sic(
    tx: &TransmitterState,
    canceled: &TransmitterState,
    rx: &Point,
    ch: &ChannelParams,
) -> Result<f64> {
    ch.validate()?;
    check_power("power", tx.power, false)?;
    check_power("canceled power", canceled.power, false)?;
    check_threshold("sinr_threshold", tx.sinr_threshold)?;
    check_threshold("canceled sinr_threshold", canceled.sinr_threshold)?;
    let a = ch.path_loss_exponent;
    let (g1, g2) = (tx.sinr_threshold, canceled.sinr_threshold);
    let r1 = checked_distance(&tx.position, rx)?;
    let r2 = checked_distance(&canceled.position, rx)?;

    let log_p = -outage_exponent(g1, r1, tx.power, ch)
        - outage_exponent(g2 * (1.0 + g1), r2, canceled.power, ch)
        - (g2 * (tx.power / canceled.power) * (r2 / r1).powf(a)).ln_1p();
    Ok(clamp_probability(log_p.exp()))
}

/// Instantaneous received power of one signal, normalized by the noise
/// power, together with the threshold its own packet must clear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signal {
    pub snr: f64,
    pub threshold: f64,
}

/// Decides whether the intended signal is decoded.
///
/// `others` are all concurrent signals at the receiver except the intended
/// one. `cancel_order` indexes into `others`: each listed signal is decoded
/// against everything not yet removed (intended signal included) and, on
/// success, subtracted. The intended signal is then tested against the
/// residual. With `fallback == false` a failed cancelation fails the whole
/// decode; with `fallback == true` the failed signal simply stays as noise.
pub fn decode_with_cancelation(
    intended: Signal,
    others: &[Signal],
    cancel_order: &[usize],
    fallback: bool,
) -> bool {
    let mut buf = [false; 64];
    let mut heap;
    let removed: &mut [bool] = if others.len() <= buf.len() {
        &mut buf[..others.len()]
    } else {
        heap = vec![false; others.len()];
        &mut heap
    };
    decode_tracking_cancelations(intended, others, cancel_order, fallback, removed)
}

/// Same as [`decode_with_cancelation`], additionally reporting in `removed`
/// which of `others` were decoded and subtracted. `removed` must have the
/// length of `others`; it is overwritten.
pub fn decode_tracking_cancelations(
    intended: Signal,
    others: &[Signal],
    cancel_order: &[usize],
    fallback: bool,
    removed: &mut [bool],
) -> bool {
    assert_eq!(removed.len(), others.len());
    removed.fill(false);
    if cancel_order.is_empty() {
        let total: f64 = others.iter().map(|s| s.snr).sum();
        return intended.snr >= intended.threshold * (1.0 + total);
    }
    for &k in cancel_order {
        let mut interference = intended.snr;
        for (n, s) in others.iter().enumerate() {
            if n != k && !removed[n] {
                interference += s.snr;
            }
        }
        let s = others[k];
        if s.snr >= s.threshold * (1.0 + interference) {
            removed[k] = true;
        } else if !fallback {
            return false;
        }
    }

    let mut residual = 0.0;
    for (s, &gone) in others.iter().zip(removed.iter()) {
        if !gone {
            residual += s.snr;
        }
    }
    intended.snr >= intended.threshold * (1.0 + residual)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub probability: f64,
    /// Binomial standard error of the empirical frequency.
    pub std_error: f64,
    pub samples: u64,
}

/// Binomial standard deviation of a frequency estimate over `n` trials.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Monte-Carlo estimate of the success probability of `tx -> rx` with the
/// given active interferers and reception policy.
///
/// Channel power gains are i.i.d. unit-mean exponentials per transmitter per
/// sample. Cancel-set members are decoded in descending order of mean
/// received power. Cancelation is strict: if an active member of the cancel set
/// cannot be decoded the sample counts as a failure, which is the event the
/// closed-form SIC probability describes. Members of the cancel set that are
/// not in `active_interferers` are skipped.
pub fn success_prob_mc(
    tx: &TransmitterState,
    active_interferers: &[(NodeId, TransmitterState)],
    policy: &ReceptionPolicy,
    rx: &Point,
    ch: &ChannelParams,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", 0.0, "must be at least 1"));
    }
    ch.validate()?;
    check_power("power", tx.power, false)?;
    check_threshold("sinr_threshold", tx.sinr_threshold)?;
    let tx_mean = tx.mean_snr_at(rx, ch)?;
    let mut thresholds = Vec::with_capacity(active_interferers.len());
    let mut means = Vec::with_capacity(active_interferers.len());
    for (_, k) in active_interferers {
        check_power("interferer power", k.power, true)?;
        check_threshold("interferer sinr_threshold", k.sinr_threshold)?;
        let r_k = checked_distance(&k.position, rx)?;
        means.push(k.power * r_k.powf(-ch.path_loss_exponent) / ch.noise_power);
        thresholds.push(k.sinr_threshold);
    }
    let mut cancel_order: Vec<usize> = Vec::new();
    for id in &policy.cancel_set {
        if let Some(n) = active_interferers.iter().position(|(k, _)| k == id) {
            if !cancel_order.contains(&n) {
                cancel_order.push(n);
            }
        }
    }
    // Strongest mean received power first; stable, so ties keep list order.
    cancel_order.sort_by(|&a, &b| means[b].total_cmp(&means[a]));

    let mut snr = vec![0.0; means.len()];
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut hits: u64 = 0;
    'sample: for _ in 0..n_samples {
        let h: f64 = Exp1.sample(&mut rng);
        let intended = h * tx_mean;
        // Everything still on the air, intended signal included.
        let mut on_air = intended;
        for (s, m) in snr.iter_mut().zip(&means) {
            let h: f64 = Exp1.sample(&mut rng);
            *s = h * m;
            on_air += *s;
        }
        for &k in &cancel_order {
            if snr[k] < thresholds[k] * (1.0 + on_air - snr[k]) {
                continue 'sample;
            }
            on_air -= snr[k];
        }
        if intended >= tx.sinr_threshold * (1.0 + on_air - intended) {
            hits += 1;
        }
    }
    let probability = hits as f64 / n_samples as f64;
    Ok(McEstimate {
        probability,
        std_error: binomial_sigma(probability, n_samples),
        samples: n_samples,
    })
}
