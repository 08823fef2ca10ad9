//! Queue state for both controllers and the per-block update rules.
//!
//! All queues are real-valued bit counts. Within a block the order is:
//! observe channel, control decisions, apply service, apply arrivals,
//! matching the [q - service]^+ + arrival form of the recursions.

use crate::error::{Error, Result};
use crate::topology::Topology;

/// State of the infinite-block controller: source queues Q_s, per-relay
/// per-commodity queues Q_i^s and the secrecy virtual queues Z_j^s.
#[derive(Debug, Clone, PartialEq)]
pub struct NetState1 {
    pub q_src: Vec<f64>,
    /// Indexed [commodity][node]; nonzero only at relay nodes.
    pub q_relay: Vec<Vec<f64>>,
    /// Accumulated leakage in excess of the randomization budget.
    pub z: Vec<Vec<f64>>,
}

impl NetState1 {
    pub fn new(topo: &Topology) -> Self {
        let k = topo.commodities().len();
        let n = topo.nodes().len();
        NetState1 {
            q_src: vec![0.0; k],
            q_relay: vec![vec![0.0; n]; k],
            z: vec![vec![0.0; n]; k],
        }
    }

    pub fn z_sum(&self, commodity: usize) -> f64 {
        self.z[commodity].iter().sum()
    }
}

/// State of the finite-block controller. The countdown queues Z_i^s hold the
/// bits a relay still needs before it could decode the in-flight message;
/// hitting zero under positive leakage is a secrecy outage.
#[derive(Debug, Clone, PartialEq)]
pub struct NetState2 {
    /// Confidential-information queue Q_s^p.
    pub q_conf: Vec<f64>,
    /// Partial-message queue P_s.
    pub partial: Vec<f64>,
    /// Messages created so far, k_s.
    pub msg_count: Vec<u64>,
    /// Confidential rate of the in-flight message.
    pub msg_rate: Vec<f64>,
    /// Indexed [commodity][node]; nonzero only at relay nodes.
    pub countdown: Vec<Vec<f64>>,
    /// Outage virtual queue V_s, in rate units.
    pub v_outage: Vec<f64>,
    pub q_relay: Vec<Vec<f64>>,
    /// Whether the in-flight message has already suffered an outage.
    pub outage: Vec<bool>,
}

impl NetState2 {
    pub fn new(topo: &Topology) -> Self {
        let k = topo.commodities().len();
        let n = topo.nodes().len();
        NetState2 {
            q_conf: vec![0.0; k],
            partial: vec![0.0; k],
            msg_count: vec![0; k],
            msg_rate: vec![0.0; k],
            countdown: vec![vec![0.0; n]; k],
            v_outage: vec![0.0; k],
            q_relay: vec![vec![0.0; n]; k],
            outage: vec![false; k],
        }
    }
}

/// A message whose partial queue drained to zero in this block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageCompletion {
    pub source: usize,
    pub index: u64,
    pub rate: f64,
    pub outage: bool,
}

/// Outcome of creating a new message at a boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEvent {
    pub source: usize,
    pub new_index: u64,
    pub new_rate: f64,
    /// Confidential bits short of the encoding size, filled with padding.
    pub padding: f64,
    /// (index, rate, outage) of the message settled into V_s, if any.
    pub settled: Option<(u64, f64, bool)>,
}

fn check_nonneg(name: &str, values: &[f64]) -> Result<()> {
    for v in values {
        if !(v.is_finite() && *v >= 0.0) {
            return Err(Error::NegativeInput(format!("{name} = {v}")));
        }
    }
    Ok(())
}

fn served(topo: &Topology, links: &[usize], mu: &[f64]) -> f64 {
    let _ = topo;
    links.iter().map(|&l| mu[l]).sum()
}

fn update_relay_queues(
    q_relay: &mut [Vec<f64>],
    topo: &Topology,
    scheduled: Option<usize>,
    mu: &[f64],
) {
    let Some(s) = scheduled else { return };
    for &i in topo.relays() {
        let out = served(topo, topo.out_links(i), mu);
        let inn = served(topo, topo.in_links(i), mu);
        q_relay[s][i] = (q_relay[s][i] - out).max(0.0) + inn;
    }
}

/// One block of Algorithm 1 dynamics. `mu` and `leaks` describe the realized
/// flows of the scheduled commodity (all zeros when idle).
pub fn update_state1(
    state: &mut NetState1,
    topo: &Topology,
    admitted: &[f64],
    alphas: &[f64],
    scheduled: Option<usize>,
    mu: &[f64],
    leaks: &[f64],
) -> Result<()> {
    check_nonneg("admitted", admitted)?;
    check_nonneg("mu", mu)?;
    check_nonneg("leaks", leaks)?;
    for s in 0..topo.commodities().len() {
        let src = topo.commodities()[s].source;
        let out = if scheduled == Some(s) {
            served(topo, topo.out_links(src), mu)
        } else {
            0.0
        };
        state.q_src[s] = (state.q_src[s] - out).max(0.0) + admitted[s];
        let budget = (1.0 - alphas[s]) * admitted[s];
        for &j in topo.relays() {
            let f = if scheduled == Some(s) { leaks[j] } else { 0.0 };
            state.z[s][j] = (state.z[s][j] + f - budget).max(0.0);
        }
    }
    update_relay_queues(&mut state.q_relay, topo, scheduled, mu);
    Ok(())
}

/// One block of Algorithm 2 dynamics between boundaries: drains the partial
/// message, runs the countdowns, updates relay queues and flags outages.
/// Returns the messages that finished transmitting in this block.
pub fn update_state2_block(
    state: &mut NetState2,
    topo: &Topology,
    scheduled: Option<usize>,
    mu: &[f64],
    leaks: &[f64],
) -> Result<Vec<MessageCompletion>> {
    check_nonneg("mu", mu)?;
    check_nonneg("leaks", leaks)?;
    for s in 0..topo.commodities().len() {
        if state.partial[s] <= 0.0 {
            let name = topo.nodes()[topo.commodities()[s].source].name.clone();
            return Err(Error::NoMessageInFlight(name));
        }
    }
    let mut completions = Vec::new();
    for s in 0..topo.commodities().len() {
        let src = topo.commodities()[s].source;
        let out = if scheduled == Some(s) {
            served(topo, topo.out_links(src), mu)
        } else {
            0.0
        };
        let before = state.partial[s];
        state.partial[s] = (before - out).max(0.0);
        for &j in topo.relays() {
            let f = if scheduled == Some(s) { leaks[j] } else { 0.0 };
            let z = (state.countdown[s][j] - f).max(0.0);
            state.countdown[s][j] = z;
            if f > 0.0 && z == 0.0 {
                state.outage[s] = true;
            }
        }
        if before > 0.0 && state.partial[s] == 0.0 {
            completions.push(MessageCompletion {
                source: s,
                index: state.msg_count[s],
                rate: state.msg_rate[s],
                outage: state.outage[s],
            });
        }
    }
    update_relay_queues(&mut state.q_relay, topo, scheduled, mu);
    Ok(completions)
}

/// Creates message k_s+1 once the partial queue has emptied: settles the
/// outage virtual queue for the completed message, charges the confidential
/// queue, reloads the partial queue and resets the countdowns.
#[allow(clippy::too_many_arguments)]
pub fn message_boundary(
    state: &mut NetState2,
    topo: &Topology,
    s: usize,
    rate: f64,
    admitted: f64,
    gamma: f64,
    nominal_rate: f64,
    message_bits: f64,
) -> Result<BoundaryEvent> {
    if state.partial[s] != 0.0 {
        let name = topo.nodes()[topo.commodities()[s].source].name.clone();
        return Err(Error::MessageStillInFlight(name));
    }
    check_nonneg("admitted", &[admitted])?;
    check_nonneg("rate", &[rate])?;

    let settled = if state.msg_count[s] > 0 {
        let r_prev = state.msg_rate[s];
        let v = state.v_outage[s];
        state.v_outage[s] = if state.outage[s] {
            (v + r_prev - gamma * r_prev).max(0.0)
        } else {
            (v - gamma * r_prev).max(0.0)
        };
        Some((state.msg_count[s], r_prev, state.outage[s]))
    } else {
        None
    };

    let n_blocks = message_bits / nominal_rate;
    let departure = n_blocks * rate;
    let padding = (departure - state.q_conf[s]).max(0.0);
    state.q_conf[s] = (state.q_conf[s] - departure).max(0.0) + admitted;
    state.msg_count[s] += 1;
    state.msg_rate[s] = rate;
    state.partial[s] = message_bits;
    let margin = (nominal_rate - rate) * n_blocks;
    for &j in topo.relays() {
        state.countdown[s][j] = margin;
    }
    state.outage[s] = false;

    Ok(BoundaryEvent {
        source: s,
        new_index: state.msg_count[s],
        new_rate: rate,
        padding,
        settled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{NodeRole, TopologySpec};

    fn chain() -> Topology {
        Topology::build(&TopologySpec {
            nodes: vec![
                ("s".into(), NodeRole::Source),
                ("r".into(), NodeRole::Relay),
                ("d".into(), NodeRole::Destination),
            ],
            links: vec![("s".into(), "r".into()), ("r".into(), "d".into())],
            pairings: vec![("s".into(), "d".into())],
        })
        .unwrap()
    }

    #[test]
    fn source_queue_projects_then_adds() {
        let topo = chain();
        let mut st = NetState1::new(&topo);
        st.q_src[0] = 5.0;
        // service 10 on (s,r), arrival 2
        update_state1(
            &mut st,
            &topo,
            &[2.0],
            &[0.5],
            Some(0),
            &[10.0, 0.0],
            &[0.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(st.q_src[0], 2.0);
    }

    #[test]
    fn virtual_queue_floor() {
        let topo = chain();
        let mut st = NetState1::new(&topo);
        // Z=0, f=0, A=4, alpha=0.5: [0 + 0 - 2]^+ = 0.
        update_state1(
            &mut st,
            &topo,
            &[4.0],
            &[0.5],
            None,
            &[0.0, 0.0],
            &[0.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(st.z[0][1], 0.0);
    }

    #[test]
    fn relay_queue_in_and_out() {
        let topo = chain();
        let mut st = NetState1::new(&topo);
        st.q_relay[0][1] = 3.0;
        // out 1 over (r,d), in 2 over (s,r)
        update_state1(
            &mut st,
            &topo,
            &[0.0],
            &[0.5],
            Some(0),
            &[2.0, 1.0],
            &[0.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(st.q_relay[0][1], 4.0);
    }

    #[test]
    fn negative_input_rejected() {
        let topo = chain();
        let mut st = NetState1::new(&topo);
        let err = update_state1(
            &mut st,
            &topo,
            &[-1.0],
            &[0.5],
            None,
            &[0.0, 0.0],
            &[0.0, 0.0, 0.0],
        );
        assert!(matches!(err, Err(Error::NegativeInput(_))));
    }

    fn fresh_state2(topo: &Topology) -> NetState2 {
        let mut st = NetState2::new(topo);
        message_boundary(&mut st, topo, 0, 1.0, 0.0, 0.1, 2.0, 20.0).unwrap();
        st
    }

    #[test]
    fn partial_queue_drains() {
        let topo = chain();
        let mut st = fresh_state2(&topo);
        st.partial[0] = 10.0;
        update_state2_block(&mut st, &topo, Some(0), &[4.0, 0.0], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(st.partial[0], 6.0);
    }

    #[test]
    fn countdown_floor_triggers_outage() {
        let topo = chain();
        let mut st = fresh_state2(&topo);
        st.countdown[0][1] = 3.0;
        update_state2_block(&mut st, &topo, Some(0), &[0.5, 0.0], &[0.0, 5.0, 0.0]).unwrap();
        assert_eq!(st.countdown[0][1], 0.0);
        assert!(st.outage[0]);
    }

    #[test]
    fn no_leak_means_no_outage_even_at_zero_margin() {
        let topo = chain();
        let mut st = NetState2::new(&topo);
        // rate = nominal rate: margin starts at zero.
        message_boundary(&mut st, &topo, 0, 2.0, 0.0, 0.1, 2.0, 20.0).unwrap();
        assert_eq!(st.countdown[0][1], 0.0);
        for _ in 0..5 {
            update_state2_block(&mut st, &topo, Some(0), &[1.0, 0.0], &[0.0, 0.0, 0.0]).unwrap();
        }
        assert!(!st.outage[0]);
        // The first leak, however small, is an outage at zero margin.
        update_state2_block(&mut st, &topo, Some(0), &[1.0, 0.0], &[0.0, 1e-9, 0.0]).unwrap();
        assert!(st.outage[0]);
    }

    #[test]
    fn update_without_message_rejected() {
        let topo = chain();
        let mut st = NetState2::new(&topo);
        let err = update_state2_block(&mut st, &topo, None, &[0.0, 0.0], &[0.0, 0.0, 0.0]);
        assert!(matches!(err, Err(Error::NoMessageInFlight(_))));
    }

    #[test]
    fn boundary_settles_outage_queue() {
        let topo = chain();
        // No outage: V = [1 - 0.1*2]^+ = 0.8.
        let mut st = NetState2::new(&topo);
        message_boundary(&mut st, &topo, 0, 2.0, 0.0, 0.1, 2.0, 20.0).unwrap();
        st.v_outage[0] = 1.0;
        st.partial[0] = 0.0;
        st.outage[0] = false;
        let ev = message_boundary(&mut st, &topo, 0, 1.0, 0.0, 0.1, 2.0, 20.0).unwrap();
        assert!((st.v_outage[0] - 0.8).abs() < 1e-12);
        assert_eq!(ev.settled, Some((1, 2.0, false)));

        // Outage: V = [0 + 1 - 0.01]^+ = 0.99.
        let mut st = NetState2::new(&topo);
        message_boundary(&mut st, &topo, 0, 1.0, 0.0, 0.01, 2.0, 20.0).unwrap();
        st.partial[0] = 0.0;
        st.outage[0] = true;
        message_boundary(&mut st, &topo, 0, 0.5, 0.0, 0.01, 2.0, 20.0).unwrap();
        assert!((st.v_outage[0] - 0.99).abs() < 1e-12);
        assert!(!st.outage[0], "flag cleared at boundary");
    }

    #[test]
    fn first_boundary_leaves_v_untouched() {
        let topo = chain();
        let mut st = NetState2::new(&topo);
        let ev = message_boundary(&mut st, &topo, 0, 1.5, 3.0, 0.1, 2.0, 20.0).unwrap();
        assert_eq!(ev.settled, None);
        assert_eq!(st.v_outage[0], 0.0);
        assert_eq!(st.msg_count[0], 1);
        assert_eq!(st.partial[0], 20.0);
        // margin (2 - 1.5) * 10 blocks
        assert_eq!(st.countdown[0][1], 5.0);
    }

    #[test]
    fn full_rate_message_has_zero_margin() {
        let topo = chain();
        let mut st = NetState2::new(&topo);
        message_boundary(&mut st, &topo, 0, 2.0, 0.0, 0.1, 2.0, 20.0).unwrap();
        assert_eq!(st.countdown[0][1], 0.0);
    }

    #[test]
    fn boundary_with_message_in_flight_rejected() {
        let topo = chain();
        let mut st = fresh_state2(&topo);
        let err = message_boundary(&mut st, &topo, 0, 1.0, 0.0, 0.1, 2.0, 20.0);
        assert!(matches!(err, Err(Error::MessageStillInFlight(_))));
    }

    #[test]
    fn padding_recorded_when_confidential_bits_short() {
        let topo = chain();
        let mut st = NetState2::new(&topo);
        st.q_conf[0] = 3.0;
        // departure = 10 blocks * rate 1 = 10 bits > 3 available.
        let ev = message_boundary(&mut st, &topo, 0, 1.0, 0.5, 0.1, 2.0, 20.0).unwrap();
        assert_eq!(ev.padding, 7.0);
        assert_eq!(st.q_conf[0], 0.5);
    }

    #[test]
    fn bits_removed_from_partial_equal_message_size() {
        let topo = chain();
        let mut st = fresh_state2(&topo);
        let mut removed = 0.0;
        let mut rng = 0x2545F491_4F6CDD1Du64;
        while st.partial[0] > 0.0 {
            rng = crate::seeding::splitmix64(rng);
            let service = (rng % 700) as f64 / 100.0;
            let before = st.partial[0];
            update_state2_block(&mut st, &topo, Some(0), &[service, 0.0], &[0.0, 0.0, 0.0])
                .unwrap();
            removed += before - st.partial[0];
        }
        assert!((removed - 20.0).abs() < 1e-12);
    }

    /// Replays random inputs against an independently written fold of the
    /// closed-form recursions.
    #[test]
    fn update_state1_matches_recursion_replay() {
        let topo = chain();
        let mut st = NetState1::new(&topo);
        let alphas = [0.4];
        let mut rng = 99u64;
        let mut draws = move || {
            rng = crate::seeding::splitmix64(rng);
            (rng % 1000) as f64 / 100.0
        };
        // Independent scalar recursions for the chain: q_s, q_r, z_r.
        let (mut q_s, mut q_r, mut z_r) = (0.0f64, 0.0f64, 0.0f64);
        for step in 0..1000 {
            let a = draws();
            let mu_sr = draws();
            let mu_rd = draws();
            let f_r = draws();
            let scheduled = if step % 3 == 0 { None } else { Some(0) };
            update_state1(
                &mut st,
                &topo,
                &[a],
                &alphas,
                scheduled,
                &[mu_sr, mu_rd],
                &[0.0, f_r, 0.0],
            )
            .unwrap();
            let (eff_sr, eff_rd, eff_f) = if scheduled.is_some() {
                (mu_sr, mu_rd, f_r)
            } else {
                (0.0, 0.0, 0.0)
            };
            q_s = (q_s - eff_sr).max(0.0) + a;
            q_r = (q_r - eff_rd).max(0.0) + eff_sr;
            z_r = (z_r + eff_f - (1.0 - alphas[0]) * a).max(0.0);
            assert_eq!(st.q_src[0], q_s);
            assert_eq!(st.q_relay[0][1], q_r);
            assert_eq!(st.z[0][1], z_r);
        }
    }

    proptest::proptest! {
        #[test]
        fn updates_preserve_nonnegativity(
            inputs in proptest::collection::vec((0.0f64..50.0, 0.0f64..50.0, 0.0f64..50.0, 0.0f64..50.0), 1..60),
            alpha in 0.05f64..0.95,
        ) {
            let topo = chain();
            let mut s1 = NetState1::new(&topo);
            let mut s2 = fresh_state2(&topo);
            for (a, mu_sr, mu_rd, f_r) in inputs {
                update_state1(&mut s1, &topo, &[a], &[alpha], Some(0), &[mu_sr, mu_rd], &[0.0, f_r, 0.0]).unwrap();
                if s2.partial[0] == 0.0 {
                    message_boundary(&mut s2, &topo, 0, 1.0, a, 0.1, 2.0, 20.0).unwrap();
                }
                update_state2_block(&mut s2, &topo, Some(0), &[mu_sr, mu_rd], &[0.0, f_r, 0.0]).unwrap();
                proptest::prop_assert!(s1.q_src[0] >= 0.0 && s1.q_relay[0][1] >= 0.0 && s1.z[0][1] >= 0.0);
                proptest::prop_assert!(s2.partial[0] >= 0.0 && s2.countdown[0][1] >= 0.0 && s2.v_outage[0] >= 0.0 && s2.q_conf[0] >= 0.0);
            }
        }
    }
}
