//! Recovers link distances from target success-probability operating
//! points.
//!
//! For a receiver with one intended transmitter and one interferer (equal
//! thresholds `g`), write `A = g r_tx^a N0 / p_tx` and
//! `x = (p_int / p_tx) (r_tx / r_int)^a`. Then
//!
//! ```text
//! IAN = exp(-A) / (1 + g x)
//! SIC = exp(-A) exp(-(1 + g) A / x) / (1 + g / x)
//! ```
//!
//! The IAN equation gives `A(x) = -ln(IAN (1 + g x))`, which leaves a single
//! equation in `x`. Its left side is strictly increasing in `x`, so plain
//! bisection on `(0, x_max]` finds the unique root.

use serde::Serialize;

use crate::channel::{self, ChannelParams, Point, TransmitterState};
use crate::error::{Error, Result};

/// Distances (meters) recovered for one receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairDistances {
    pub intended: f64,
    pub interferer: f64,
}

const BISECTION_STEPS: usize = 200;

/// Solves for the intended-link and interferer distances that make the IAN
/// and SIC success probabilities hit the two targets at threshold `gamma`.
pub fn calibrate_pair(
    ian_target: f64,
    sic_target: f64,
    gamma: f64,
    tx_power: f64,
    interferer_power: f64,
    ch: &ChannelParams,
) -> Result<PairDistances> {
    ch.validate()?;
    for (name, v) in [("ian_target", ian_target), ("sic_target", sic_target)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::invalid(name, v, "must lie in (0, 1)"));
        }
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma", gamma, "must be positive"));
    }
    let x_max = (1.0 / ian_target - 1.0) / gamma;
    let exponent = |x: f64| -(ian_target * (1.0 + gamma * x)).ln();
    let sic_at = |x: f64| {
        let a = exponent(x).max(0.0);
        (-a).exp() * (-(1.0 + gamma) * a / x).exp() / (1.0 + gamma / x)
    };
    if sic_at(x_max) <= sic_target {
        return Err(Error::Calibration(format!(
            "SIC target {sic_target} unreachable for IAN target {ian_target} at gamma {gamma}"
        )));
    }

    let (mut lo, mut hi) = (0.0f64, x_max);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= 0.0 || sic_at(mid) < sic_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let a = exponent(x);
    let exp = ch.path_loss_exponent;
    let intended = (a * tx_power / (gamma * ch.noise_power)).powf(1.0 / exp);
    let interferer = intended * (x * tx_power / interferer_power).powf(-1.0 / exp);
    Ok(PairDistances {
        intended,
        interferer,
    })
}

/// One target operating point and what the calibrated geometry gives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub link: &'static str,
    pub policy: &'static str,
    pub gamma: f64,
    pub target: f64,
    pub achieved: f64,
    /// Tolerance the point is expected to meet.
    pub tolerance: f64,
}

impl OperatingPoint {
    pub fn residual(&self) -> f64 {
        self.achieved - self.target
    }

    pub fn within_tolerance(&self) -> bool {
        self.residual().abs() <= self.tolerance
    }
}

/// Recovered four-node geometry: `1 -> R -> d` and `2 -> d`, with `2`
/// interfering at `R` and `R` interfering at `d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub r_1r: f64,
    pub r_2r: f64,
    pub r_2d: f64,
    pub r_rd: f64,
    pub points: Vec<OperatingPoint>,
}

/// Target operating points for the four-node topology, all nodes at
/// 0.1 W: link (1,R) against interferer 2 and link (2,d) against interferer
/// R.
pub const LINK_1R_IAN_05: f64 = 0.093;
pub const LINK_1R_SIC_05: f64 = 0.951;
pub const LINK_1R_IAN_20: f64 = 0.023;
pub const LINK_1R_SIC_20: f64 = 0.815;
pub const LINK_2D_IAN_05: f64 = 0.604;
pub const LINK_2D_SIC_05: f64 = 0.667;

/// Calibrates the first builtin topology and evaluates every operating point
/// on the resulting geometry.
pub fn calibrate_topology1(power: f64, ch: &ChannelParams) -> Result<Calibration> {
    let relay = calibrate_pair(LINK_1R_IAN_05, LINK_1R_SIC_05, 0.5, power, power, ch)?;
    let dest = calibrate_pair(LINK_2D_IAN_05, LINK_2D_SIC_05, 0.5, power, power, ch)?;
    let mut cal = Calibration {
        r_1r: relay.intended,
        r_2r: relay.interferer,
        r_2d: dest.intended,
        r_rd: dest.interferer,
        points: Vec::new(),
    };
    let pos = layout(cal.r_1r, cal.r_2r, cal.r_2d, cal.r_rd)?;

    let eval = |gamma: f64, tx: Point, other: Point, rx: Point| -> Result<(f64, f64)> {
        let t = TransmitterState::new(power, gamma, tx)?;
        let o = TransmitterState::new(power, gamma, other)?;
        Ok((
            channel::success_prob_ian(&t, &o, &rx, ch)?,
            channel::success_prob_sic(&t, &o, &rx, ch)?,
        ))
    };
    let (ian05, sic05) = eval(0.5, pos.n1, pos.n2, pos.r)?;
    let (ian20, sic20) = eval(2.0, pos.n1, pos.n2, pos.r)?;
    let (ian2d, sic2d) = eval(0.5, pos.n2, pos.r, pos.d)?;
    let point = |link, policy, gamma, target, achieved, tolerance| OperatingPoint {
        link,
        policy,
        gamma,
        target,
        achieved,
        tolerance,
    };
    cal.points = vec![
        point("(1,R)", "IAN", 0.5, LINK_1R_IAN_05, ian05, 0.005),
        point("(1,R)", "SIC", 0.5, LINK_1R_SIC_05, sic05, 0.005),
        point("(1,R)", "IAN", 2.0, LINK_1R_IAN_20, ian20, 0.03),
        point("(1,R)", "SIC", 2.0, LINK_1R_SIC_20, sic20, 0.03),
        point("(2,d)", "IAN", 0.5, LINK_2D_IAN_05, ian2d, 0.01),
        point("(2,d)", "SIC", 0.5, LINK_2D_SIC_05, sic2d, 0.01),
    ];
    Ok(cal)
}

/// Node positions of the four-node topology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layout {
    pub n1: Point,
    pub n2: Point,
    pub r: Point,
    pub d: Point,
}

/// Places R at the origin and d on the positive x axis. Node 2 sits above
/// the axis at the given distances from R and d; node 1 sits on the far side
/// of R from d, which puts it as far from d as the distances allow.
pub fn layout(r_1r: f64, r_2r: f64, r_2d: f64, r_rd: f64) -> Result<Layout> {
    if !((r_rd - r_2d).abs() <= r_2r && r_2r <= r_rd + r_2d) {
        return Err(Error::Calibration(format!(
            "distances r_2R={r_2r:.3}, r_2d={r_2d:.3}, r_Rd={r_rd:.3} violate the triangle inequality"
        )));
    }
    let x2 = (r_2r * r_2r - r_2d * r_2d + r_rd * r_rd) / (2.0 * r_rd);
    let y2 = (r_2r * r_2r - x2 * x2).max(0.0).sqrt();
    Ok(Layout {
        n1: Point::new(-r_1r, 0.0),
        n2: Point::new(x2, y2),
        r: Point::new(0.0, 0.0),
        d: Point::new(r_rd, 0.0),
    })
}
