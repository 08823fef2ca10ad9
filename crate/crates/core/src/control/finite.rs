//! Finite-block controller: adaptive per-message confidential encoding rate,
//! confidential-bit flow control, and scheduling over the partial-message
//! and countdown queues.
//!
//! Every message carries a fixed total of N_s R_s bits; the confidential
//! share r of a message is chosen at its creation against the outage virtual
//! queue V_s. The scheduler's leakage term enters with a positive sign here:
//! the countdowns measure remaining margin, so steering unavoidable leakage
//! toward nodes with large margin postpones outages.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelBlock;
use crate::control::{log_utility, search_best, ScheduleDecision};
use crate::error::{Error, Result};
use crate::queues::{
    message_boundary, update_state2_block, BoundaryEvent, MessageCompletion, NetState2,
};
use crate::topology::{ActiveSet, NodeRole, Topology};

/// Cap on the R_s / R_s^{k,priv} queue-normalization factor as the message
/// rate approaches zero.
pub const NORMALIZATION_CAP: f64 = 1e6;

/// Secrecy-outage probability as a function of the encoding rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OutageModel {
    /// (r / R_s)^2, clamped to [0, 1].
    Quadratic,
    /// Piecewise-constant empirical estimate over rate bins.
    Table(OutageTable),
}

/// Binned outage frequencies over [0, R_s].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageTable {
    /// Upper edge of each bin; the last edge is the nominal rate.
    pub edges: Vec<f64>,
    pub probs: Vec<f64>,
}

impl OutageModel {
    pub fn probability(&self, rate: f64, nominal_rate: f64) -> f64 {
        match self {
            OutageModel::Quadratic => {
                let x = rate / nominal_rate;
                (x * x).clamp(0.0, 1.0)
            }
            OutageModel::Table(t) => {
                let i = t.edges.partition_point(|&e| e < rate);
                t.probs[i.min(t.probs.len() - 1)].clamp(0.0, 1.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alg2Params {
    pub h: f64,
    pub kappa: f64,
    pub a_max: f64,
    /// Maximum tolerated fraction of confidential bits in outage, per source.
    pub gammas: Vec<f64>,
    /// Nominal end-to-end rate R_s of every encoded message, per source.
    pub nominal_rates: Vec<f64>,
    /// Total encoded message size N_s R_s in bits, per source.
    pub message_bits: Vec<f64>,
    /// Points of the encoding-rate search grid over [0, R_s].
    pub rate_grid_points: usize,
    pub outage_model: OutageModel,
}

impl Alg2Params {
    pub fn validate(&self, topo: &Topology) -> Result<()> {
        let k = topo.commodities().len();
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::BadControlParam(format!("H must be > 0, got {}", self.h)));
        }
        if !(self.a_max.is_finite() && self.a_max > 0.0) {
            return Err(Error::BadControlParam(format!(
                "A_max must be > 0, got {}",
                self.a_max
            )));
        }
        if self.gammas.len() != k || self.nominal_rates.len() != k || self.message_bits.len() != k
        {
            return Err(Error::BadControlParam(format!(
                "per-source parameter lists must cover all {k} commodities"
            )));
        }
        for g in &self.gammas {
            if !(g.is_finite() && (0.0..=1.0).contains(g)) {
                return Err(Error::BadControlParam(format!(
                    "gamma must lie in [0,1], got {g}"
                )));
            }
        }
        for (r, b) in self.nominal_rates.iter().zip(&self.message_bits) {
            if !(r.is_finite() && *r > 0.0 && b.is_finite() && *b > 0.0) {
                return Err(Error::BadControlParam(format!(
                    "nominal rate and message size must be positive, got R={r}, bits={b}"
                )));
            }
        }
        if self.rate_grid_points < 2 {
            return Err(Error::BadControlParam(
                "rate grid needs at least 2 points".into(),
            ));
        }
        Ok(())
    }
}

/// Confidential encoding rate of the next message: grid argmax over
/// r in [0, R_s] of r Q_s^p - V_s (r p_out(r) - r gamma), ties toward the
/// smaller rate.
pub fn select_encoding_rate(
    q_conf: f64,
    v_outage: f64,
    gamma: f64,
    nominal_rate: f64,
    model: &OutageModel,
    grid_points: usize,
) -> f64 {
    let n = grid_points.max(2);
    let mut best_r = 0.0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..n {
        let r = nominal_rate * i as f64 / (n - 1) as f64;
        let v = r * q_conf - v_outage * (r * model.probability(r, nominal_rate) - r * gamma);
        if v > best_v {
            best_v = v;
            best_r = r;
        }
    }
    best_r
}

/// Admission of confidential bits: argmax over [0, A_max] of
/// H U(a) - Q_s^p a, i.e. H / Q_s^p for the logarithmic utility.
pub fn flow_control_2(q_conf: f64, params: &Alg2Params) -> f64 {
    if q_conf <= params.h / params.a_max {
        params.a_max
    } else {
        params.h / q_conf
    }
}

/// Max-weight schedule with the partial-message queue driving source links.
/// The confidential queue is normalized by R_s / R_s^{k,priv} to be
/// commensurable with the bit-valued queues.
pub fn schedule_2(
    state: &NetState2,
    block: &ChannelBlock,
    sets: &[ActiveSet],
    topo: &Topology,
    params: &Alg2Params,
) -> ScheduleDecision {
    search_best(
        topo,
        sets,
        block,
        |s, l| {
            let link = topo.links()[l];
            let c = topo.commodities()[s];
            let head = if link.from == c.source {
                let rate = state.msg_rate[s];
                let factor = if rate > 0.0 {
                    (params.nominal_rates[s] / rate).min(NORMALIZATION_CAP)
                } else {
                    NORMALIZATION_CAP
                };
                factor * state.q_conf[s] + state.partial[s]
            } else {
                state.q_relay[s][link.from]
            };
            let tail = if link.to == c.dest {
                0.0
            } else if topo.nodes()[link.to].role == NodeRole::Relay {
                state.q_relay[s][link.to]
            } else {
                0.0
            };
            (head - tail) * block.rates[l]
        },
        |s, leaks| {
            topo.relays()
                .iter()
                .map(|&j| state.countdown[s][j] * leaks[j])
                .sum::<f64>()
        },
    )
}

/// What one block of Algorithm 2 did.
#[derive(Debug, Clone, PartialEq)]
pub struct Step2Outcome {
    pub admitted: Vec<f64>,
    pub utility: Vec<f64>,
    pub decision: ScheduleDecision,
    /// New messages created at the start of this block.
    pub boundaries: Vec<BoundaryEvent>,
    /// Messages whose partial queue drained to zero in this block.
    pub completions: Vec<MessageCompletion>,
}

/// One full block: flow control, message boundaries, scheduling, update.
/// A source whose partial queue is empty starts its next message before
/// scheduling; its admission enters the confidential queue through the
/// boundary, everyone else's is added after service.
pub fn step_2(
    state: &mut NetState2,
    block: &ChannelBlock,
    sets: &[ActiveSet],
    topo: &Topology,
    params: &Alg2Params,
) -> Result<Step2Outcome> {
    let k = topo.commodities().len();
    let admitted: Vec<f64> = (0..k).map(|s| flow_control_2(state.q_conf[s], params)).collect();
    let mut boundaries = Vec::new();
    let mut at_boundary = vec![false; k];
    for s in 0..k {
        if state.partial[s] == 0.0 {
            at_boundary[s] = true;
            let rate = select_encoding_rate(
                state.q_conf[s],
                state.v_outage[s],
                params.gammas[s],
                params.nominal_rates[s],
                &params.outage_model,
                params.rate_grid_points,
            );
            boundaries.push(message_boundary(
                state,
                topo,
                s,
                rate,
                admitted[s],
                params.gammas[s],
                params.nominal_rates[s],
                params.message_bits[s],
            )?);
        }
    }
    let decision = schedule_2(state, block, sets, topo, params);
    let completions =
        update_state2_block(state, topo, decision.commodity, &decision.mu, &decision.leaks)?;
    for s in 0..k {
        if !at_boundary[s] {
            state.q_conf[s] += admitted[s];
        }
    }
    let utility = admitted
        .iter()
        .map(|a| log_utility(params.kappa, *a))
        .collect();
    Ok(Step2Outcome {
        admitted,
        utility,
        decision,
        boundaries,
        completions,
    })
}
