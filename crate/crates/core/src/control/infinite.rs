//! Infinite-block controller: per-block flow control and joint
//! commodity/active-set scheduling with secrecy virtual queues.
//!
//! Sources admit pre-encoded traffic at fixed confidential fractions
//! alpha_s. The virtual queues Z_j^s accumulate leakage in excess of the
//! randomization budget (1-alpha_s) A_s; their stability enforces the
//! per-relay secrecy constraint, so the scheduler charges leakage against
//! them.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelBlock;
use crate::control::{log_utility, search_best, ScheduleDecision};
use crate::error::{Error, Result};
use crate::queues::{update_state1, NetState1};
use crate::topology::{ActiveSet, NodeRole, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alg1Params {
    /// Utility weight of the drift-plus-penalty tradeoff.
    pub h: f64,
    /// Offset of the logarithmic utility kappa + log(x).
    pub kappa: f64,
    /// Admission cap per block, bits.
    pub a_max: f64,
    /// Confidential fraction of each source's traffic, one per commodity.
    pub alphas: Vec<f64>,
}

impl Alg1Params {
    pub fn validate(&self, topo: &Topology) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::BadControlParam(format!("H must be > 0, got {}", self.h)));
        }
        if !(self.a_max.is_finite() && self.a_max > 0.0) {
            return Err(Error::BadControlParam(format!(
                "A_max must be > 0, got {}",
                self.a_max
            )));
        }
        if self.alphas.len() != topo.commodities().len() {
            return Err(Error::BadControlParam(format!(
                "{} alpha values for {} commodities",
                self.alphas.len(),
                topo.commodities().len()
            )));
        }
        for a in &self.alphas {
            if !(a.is_finite() && *a > 0.0 && *a < 1.0) {
                return Err(Error::BadControlParam(format!(
                    "alpha must lie in (0,1), got {a}"
                )));
            }
        }
        Ok(())
    }
}

/// Admission decision for one source: the argmax over [0, A_max] of
/// H U(alpha A) - Q A + (sum_j Z_j)(1-alpha) A. For the logarithmic utility
/// the stationary point is H / (Q - (1-alpha) sum Z); when that denominator
/// is nonpositive (or the cap binds) the objective increases through A_max.
pub fn flow_control_1(q_src: f64, z_sum: f64, alpha: f64, params: &Alg1Params) -> f64 {
    let denom = q_src - (1.0 - alpha) * z_sum;
    if denom <= params.h / params.a_max {
        params.a_max
    } else {
        params.h / denom
    }
}

/// Max-weight schedule: differential-backlog gain minus Z-weighted leakage.
/// Source links weigh the source queue, destinations count as empty.
pub fn schedule_1(
    state: &NetState1,
    block: &ChannelBlock,
    sets: &[ActiveSet],
    topo: &Topology,
) -> ScheduleDecision {
    search_best(
        topo,
        sets,
        block,
        |s, l| {
            let link = topo.links()[l];
            (queue_at(state, topo, s, link.from) - queue_at(state, topo, s, link.to))
                * block.rates[l]
        },
        |s, leaks| {
            -topo
                .relays()
                .iter()
                .map(|&j| state.z[s][j] * leaks[j])
                .sum::<f64>()
        },
    )
}

fn queue_at(state: &NetState1, topo: &Topology, commodity: usize, node: usize) -> f64 {
    let c = topo.commodities()[commodity];
    if node == c.source {
        state.q_src[commodity]
    } else if topo.nodes()[node].role == NodeRole::Relay {
        state.q_relay[commodity][node]
    } else {
        0.0
    }
}

/// What one block of Algorithm 1 did, for tracing and metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Step1Outcome {
    pub admitted: Vec<f64>,
    pub utility: Vec<f64>,
    pub decision: ScheduleDecision,
}

/// One full block: flow control, scheduling, state update.
pub fn step_1(
    state: &mut NetState1,
    block: &ChannelBlock,
    sets: &[ActiveSet],
    topo: &Topology,
    params: &Alg1Params,
) -> Result<Step1Outcome> {
    let admitted: Vec<f64> = (0..topo.commodities().len())
        .map(|s| flow_control_1(state.q_src[s], state.z_sum(s), params.alphas[s], params))
        .collect();
    let decision = schedule_1(state, block, sets, topo);
    update_state1(
        state,
        topo,
        &admitted,
        &params.alphas,
        decision.commodity,
        &decision.mu,
        &decision.leaks,
    )?;
    let utility = admitted
        .iter()
        .zip(&params.alphas)
        .map(|(a, alpha)| log_utility(params.kappa, alpha * a))
        .collect();
    Ok(Step1Outcome {
        admitted,
        utility,
        decision,
    })
}
