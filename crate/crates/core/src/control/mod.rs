//! Per-block dynamic control: flow control and max-weight scheduling.
//!
//! Both controllers share the same decision space: pick one commodity, one
//! concurrently active link set, and a subset of that set's links to
//! activate for the commodity. The schedulers search this space exactly, so
//! the returned decision is the true argmax of the respective objective
//! (ties resolved toward the smallest commodity, set id and activation).

pub mod finite;
pub mod infinite;

use crate::channel::ChannelBlock;
use crate::topology::{idle_listeners, ActiveSet, NodeRole, Topology};

/// Floor for the logarithmic utility argument; a zero admission would
/// otherwise be unbounded below.
pub const UTILITY_FLOOR: f64 = 1e-6;

pub fn log_utility(kappa: f64, x: f64) -> f64 {
    kappa + x.max(UTILITY_FLOOR).ln()
}

/// The scheduler outcome of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleDecision {
    /// Scheduled commodity, or `None` when idling is the best option.
    pub commodity: Option<usize>,
    pub set_id: Option<usize>,
    /// Per-link activation flags.
    pub activation: Vec<bool>,
    /// Realized flow of the scheduled commodity per link.
    pub mu: Vec<f64>,
    /// Information accumulated per node about the scheduled commodity.
    pub leaks: Vec<f64>,
    pub objective: f64,
}

impl ScheduleDecision {
    pub fn idle(n_links: usize, n_nodes: usize) -> Self {
        ScheduleDecision {
            commodity: None,
            set_id: None,
            activation: vec![false; n_links],
            mu: vec![0.0; n_links],
            leaks: vec![0.0; n_nodes],
            objective: 0.0,
        }
    }

    /// Total bits of the scheduled commodity leaving its source this block.
    pub fn source_service(&self, topo: &Topology) -> f64 {
        match self.commodity {
            None => 0.0,
            Some(s) => topo
                .out_links(topo.commodities()[s].source)
                .iter()
                .map(|&l| self.mu[l])
                .sum(),
        }
    }
}

/// Information gained per node when `activated` links carry `commodity`.
///
/// A relay that receives a commodity link obtains the relayed bits; an idle
/// relay adjacent to an active transmitter overhears at the corresponding
/// link rate. Per node the total is capped at the amount of commodity data
/// put on the air in the block, and sources and destinations are never
/// charged.
pub fn leakage_vector(topo: &Topology, rates: &[f64], activated: &[usize]) -> Vec<f64> {
    let n = topo.nodes().len();
    let mut f = vec![0.0; n];
    let mut busy = vec![false; n];
    let mut transmitted = 0.0;
    for &li in activated {
        let l = topo.links()[li];
        busy[l.from] = true;
        busy[l.to] = true;
        transmitted += rates[li];
        if topo.nodes()[l.to].role == NodeRole::Relay {
            f[l.to] = rates[li];
        }
    }
    for &li in activated {
        let tx = topo.links()[li].from;
        for k in idle_listeners(topo, tx, &busy) {
            f[k] += rates[topo.link_index_between(tx, k).expect("listener implies link")];
        }
    }
    for v in &mut f {
        *v = v.min(transmitted);
    }
    f
}

/// Exact argmax over (commodity, active set, activation subset).
///
/// `link_weight(s, l)` is the queue-differential gain of activating link `l`
/// for commodity `s`; `leak_term(s, f)` folds the per-node leakage into the
/// objective (negative for Algorithm 1, positive for Algorithm 2). Idle is
/// chosen whenever no decision attains a strictly positive objective.
pub(crate) fn search_best<W, Z>(
    topo: &Topology,
    sets: &[ActiveSet],
    block: &ChannelBlock,
    link_weight: W,
    leak_term: Z,
) -> ScheduleDecision
where
    W: Fn(usize, usize) -> f64,
    Z: Fn(usize, &[f64]) -> f64,
{
    let n_links = topo.links().len();
    let n_nodes = topo.nodes().len();
    let mut best = ScheduleDecision::idle(n_links, n_nodes);
    let mut active = Vec::with_capacity(n_links);
    for s in 0..topo.commodities().len() {
        for set in sets {
            let eligible: Vec<usize> = set
                .links
                .iter()
                .copied()
                .filter(|&l| topo.link_eligible(l, s))
                .collect();
            if eligible.is_empty() {
                continue;
            }
            debug_assert!(eligible.len() < 32);
            for mask in 1u32..(1u32 << eligible.len()) {
                active.clear();
                for (bit, &l) in eligible.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        active.push(l);
                    }
                }
                let gain: f64 = active.iter().map(|&l| link_weight(s, l)).sum();
                let leaks = leakage_vector(topo, &block.rates, &active);
                let objective = gain + leak_term(s, &leaks);
                if objective > best.objective {
                    let mut activation = vec![false; n_links];
                    let mut mu = vec![0.0; n_links];
                    for &l in &active {
                        activation[l] = true;
                        mu[l] = block.rates[l];
                    }
                    best = ScheduleDecision {
                        commodity: Some(s),
                        set_id: Some(set.id),
                        activation,
                        mu,
                        leaks,
                        objective,
                    };
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{enumerate_active_sets, InterferenceModel, TopologySpec};

    fn diamond() -> Topology {
        Topology::build(&TopologySpec {
            nodes: vec![
                ("s".into(), NodeRole::Source),
                ("r1".into(), NodeRole::Relay),
                ("r2".into(), NodeRole::Relay),
                ("d".into(), NodeRole::Destination),
            ],
            links: vec![
                ("s".into(), "r1".into()),
                ("s".into(), "r2".into()),
                ("r1".into(), "d".into()),
                ("r2".into(), "d".into()),
            ],
            pairings: vec![("s".into(), "d".into())],
        })
        .unwrap()
    }

    fn two_source() -> Topology {
        Topology::build(&TopologySpec {
            nodes: vec![
                ("s1".into(), NodeRole::Source),
                ("s2".into(), NodeRole::Source),
                ("1".into(), NodeRole::Relay),
                ("2".into(), NodeRole::Relay),
                ("3".into(), NodeRole::Relay),
                ("d1".into(), NodeRole::Destination),
                ("d2".into(), NodeRole::Destination),
            ],
            links: vec![
                ("s1".into(), "1".into()),
                ("s1".into(), "2".into()),
                ("s2".into(), "2".into()),
                ("s2".into(), "3".into()),
                ("1".into(), "d1".into()),
                ("2".into(), "d1".into()),
                ("2".into(), "d2".into()),
                ("3".into(), "d2".into()),
            ],
            pairings: vec![("s1".into(), "d1".into()), ("s2".into(), "d2".into())],
        })
        .unwrap()
    }

    #[test]
    fn receiver_counts_transmitter_does_not() {
        let topo = diamond();
        let rates = vec![1.5, 1.0, 1.0, 2.0];
        // e = {(s,r1),(r2,d)} fully activated for the single commodity.
        let f = leakage_vector(&topo, &rates, &[0, 3]);
        let r1 = topo.node_index("r1").unwrap();
        let r2 = topo.node_index("r2").unwrap();
        assert_eq!(f[r1], 1.5);
        assert_eq!(f[r2], 0.0);
    }

    #[test]
    fn idle_overhearer_counts() {
        let topo = two_source();
        let rates = vec![1.0, 0.7, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        // Only (s1,1) active: node 1 receives at R_{s1,1}, idle node 2
        // overhears s1 at R_{s1,2}.
        let f = leakage_vector(&topo, &rates, &[0]);
        assert_eq!(f[topo.node_index("1").unwrap()], 1.0);
        assert_eq!(f[topo.node_index("2").unwrap()], 0.7);
        assert_eq!(f[topo.node_index("3").unwrap()], 0.0);
    }

    #[test]
    fn no_activation_no_leak() {
        let topo = diamond();
        let f = leakage_vector(&topo, &[1.0; 4], &[]);
        assert!(f.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn overheard_information_capped_at_transmitted() {
        let topo = two_source();
        let mut rates = vec![0.0; 8];
        rates[0] = 0.2; // (s1,1) carries 0.2 bits
        rates[1] = 5.0; // idle node 2 could overhear up to 5
        let f = leakage_vector(&topo, &rates, &[0]);
        assert_eq!(f[topo.node_index("2").unwrap()], 0.2);
    }
}
