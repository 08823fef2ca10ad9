//! Multihop network graph and enumeration of concurrently active link sets.
//!
//! Links are directed; under the node-exclusive (half duplex) interference
//! model a set of links can be active in the same block only if no two of
//! them share an endpoint, i.e. the set is a matching of the link graph.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Source,
    Relay,
    Destination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceModel {
    /// Half duplex: a node cannot transmit and receive simultaneously, so
    /// concurrently active links form a matching.
    NodeExclusive,
    /// Wired mode: every link can be active in every block. Only valid with
    /// deterministic constant link rates.
    AllLinksConcurrent,
}

/// Raw, unvalidated description of a network (as read from a config file).
#[derive(Debug, Clone, Default)]
pub struct TopologySpec {
    pub nodes: Vec<(String, NodeRole)>,
    pub links: Vec<(String, String)>,
    /// One commodity per source: (source id, destination id).
    pub pairings: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub role: NodeRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub from: usize,
    pub to: usize,
}

/// A source-destination flow, identified by its ingress node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Commodity {
    pub source: usize,
    pub dest: usize,
}

/// Validated immutable network graph. Safe to share read-only across runs.
#[derive(Debug, Clone)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    commodities: Vec<Commodity>,
    relays: Vec<usize>,
    out_links: Vec<Vec<usize>>,
    in_links: Vec<Vec<usize>>,
}

/// A set of links that may transmit in the same block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    pub id: usize,
    /// Member link indices, ascending.
    pub links: Vec<usize>,
}

impl Topology {
    /// Validates a raw description and builds the indexed graph.
    pub fn build(spec: &TopologySpec) -> Result<Self> {
        let mut nodes = Vec::with_capacity(spec.nodes.len());
        for (name, role) in &spec.nodes {
            if nodes.iter().any(|n: &Node| &n.name == name) {
                return Err(Error::DuplicateNode(name.clone()));
            }
            nodes.push(Node {
                name: name.clone(),
                role: *role,
            });
        }
        let index_of = |name: &str| nodes.iter().position(|n| n.name == name);

        let mut links = Vec::with_capacity(spec.links.len());
        for (from, to) in &spec.links {
            let fi = index_of(from)
                .ok_or_else(|| Error::UnknownNode(from.clone(), to.clone(), from.clone()))?;
            let ti = index_of(to)
                .ok_or_else(|| Error::UnknownNode(from.clone(), to.clone(), to.clone()))?;
            if links.iter().any(|l: &Link| l.from == fi && l.to == ti) {
                return Err(Error::DuplicateLink(from.clone(), to.clone()));
            }
            let roles = (nodes[fi].role, nodes[ti].role);
            if matches!(
                roles,
                (NodeRole::Source, NodeRole::Destination) | (NodeRole::Destination, NodeRole::Source)
            ) {
                return Err(Error::SourceDestinationLink(from.clone(), to.clone()));
            }
            links.push(Link { from: fi, to: ti });
        }

        if spec.pairings.is_empty() {
            return Err(Error::NoCommodities);
        }
        let mut commodities = Vec::with_capacity(spec.pairings.len());
        for (src, dst) in &spec.pairings {
            let si = index_of(src).ok_or(Error::BadSourceRole(src.clone()))?;
            let di = index_of(dst).ok_or(Error::BadDestinationRole(dst.clone()))?;
            if nodes[si].role != NodeRole::Source {
                return Err(Error::BadSourceRole(src.clone()));
            }
            if nodes[di].role != NodeRole::Destination {
                return Err(Error::BadDestinationRole(dst.clone()));
            }
            if commodities.iter().any(|c: &Commodity| c.source == si) {
                return Err(Error::DuplicateCommodity(src.clone()));
            }
            commodities.push(Commodity {
                source: si,
                dest: di,
            });
        }

        let mut out_links = vec![Vec::new(); nodes.len()];
        let mut in_links = vec![Vec::new(); nodes.len()];
        for (li, l) in links.iter().enumerate() {
            out_links[l.from].push(li);
            in_links[l.to].push(li);
        }
        for c in &commodities {
            if out_links[c.source].is_empty() {
                return Err(Error::SourceWithoutEgress(nodes[c.source].name.clone()));
            }
            if in_links[c.dest].is_empty() {
                return Err(Error::DestinationWithoutIngress(nodes[c.dest].name.clone()));
            }
        }
        let relays = (0..nodes.len())
            .filter(|&i| nodes[i].role == NodeRole::Relay)
            .collect();

        Ok(Topology {
            nodes,
            links,
            commodities,
            relays,
            out_links,
            in_links,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn commodities(&self) -> &[Commodity] {
        &self.commodities
    }

    /// Node indices with the relay role, ascending.
    pub fn relays(&self) -> &[usize] {
        &self.relays
    }

    pub fn out_links(&self, node: usize) -> &[usize] {
        &self.out_links[node]
    }

    pub fn in_links(&self, node: usize) -> &[usize] {
        &self.in_links[node]
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn link_index(&self, from: &str, to: &str) -> Option<usize> {
        let fi = self.node_index(from)?;
        let ti = self.node_index(to)?;
        self.links.iter().position(|l| l.from == fi && l.to == ti)
    }

    pub fn link_index_between(&self, from: usize, to: usize) -> Option<usize> {
        self.out_links[from]
            .iter()
            .copied()
            .find(|&l| self.links[l].to == to)
    }

    pub fn link_name(&self, link: usize) -> String {
        let l = self.links[link];
        format!("{}->{}", self.nodes[l.from].name, self.nodes[l.to].name)
    }

    /// Whether a link may carry the given commodity at all: the transmitter
    /// must hold commodity bits (the commodity's own source or a relay) and
    /// the receiver must queue or sink them (a relay or the commodity's own
    /// destination). Links touching foreign sources or destinations can
    /// never carry this commodity.
    pub fn link_eligible(&self, link: usize, commodity: usize) -> bool {
        let l = self.links[link];
        let c = self.commodities[commodity];
        let tx_ok = l.from == c.source || self.nodes[l.from].role == NodeRole::Relay;
        let rx_ok = l.to == c.dest || self.nodes[l.to].role == NodeRole::Relay;
        tx_ok && rx_ok
    }
}

/// Enumerates the feasible sets of concurrently active links.
///
/// Under the node-exclusive model these are exactly the maximal matchings of
/// the link graph; non-maximal matchings are redundant because the scheduler
/// can silence individual links within a chosen set. The result is sorted by
/// member links, so set ids are stable for a given topology.
pub fn enumerate_active_sets(topo: &Topology, model: InterferenceModel) -> Vec<ActiveSet> {
    let mut sets = match model {
        InterferenceModel::AllLinksConcurrent => vec![(0..topo.links.len()).collect::<Vec<_>>()],
        InterferenceModel::NodeExclusive => {
            let mut out = Vec::new();
            let mut busy = vec![false; topo.nodes.len()];
            let mut chosen = Vec::new();
            enumerate_maximal(topo, 0, &mut busy, &mut chosen, &mut out);
            out
        }
    };
    sets.sort();
    sets.into_iter()
        .enumerate()
        .map(|(id, links)| ActiveSet { id, links })
        .collect()
}

fn enumerate_maximal(
    topo: &Topology,
    next: usize,
    busy: &mut [bool],
    chosen: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    let links = &topo.links;
    let mut i = next;
    while i < links.len() && (busy[links[i].from] || busy[links[i].to]) {
        i += 1;
    }
    if i == links.len() {
        // Nothing at index >= next fits; the set is maximal only if links
        // skipped earlier are blocked too.
        if links.iter().all(|l| busy[l.from] || busy[l.to]) {
            out.push(chosen.clone());
        }
        return;
    }
    let (f, t) = (links[i].from, links[i].to);
    busy[f] = true;
    busy[t] = true;
    chosen.push(i);
    enumerate_maximal(topo, i + 1, busy, chosen, out);
    chosen.pop();
    busy[f] = false;
    busy[t] = false;
    enumerate_maximal(topo, i + 1, busy, chosen, out);
}

/// Nodes that accumulate commodity information when `tx` transmits while the
/// given links are active: every idle relay `k` with a link `(tx, k)`.
/// Sources know the message and destinations are legitimate receivers, so
/// neither is ever charged with leakage.
pub fn overhearing_neighbors(topo: &Topology, tx: usize, set: &ActiveSet) -> Vec<usize> {
    let mut busy = vec![false; topo.nodes.len()];
    for &li in &set.links {
        busy[topo.links[li].from] = true;
        busy[topo.links[li].to] = true;
    }
    idle_listeners(topo, tx, &busy)
}

/// Same rule against an explicit busy map (endpoints of activated links).
pub(crate) fn idle_listeners(topo: &Topology, tx: usize, busy: &[bool]) -> Vec<usize> {
    let mut out: Vec<usize> = topo.out_links[tx]
        .iter()
        .map(|&li| topo.links[li].to)
        .filter(|&k| !busy[k] && topo.nodes[k].role == NodeRole::Relay)
        .collect();
    out.sort_unstable();
    out
}
