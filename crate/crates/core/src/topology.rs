//! Random geometric topologies and the stand-in routing protocol.
//!
//! Nodes are placed uniformly at random on a rectangle; two alive nodes are
//! linked iff they are within communication range (links are bidirectional).
//! Routing is a deterministic shortest path over that graph — the incentive
//! layer only needs *a* predefined route, so a graph search stands in for a
//! full routing protocol. Tie-breaking is fully specified so identical
//! inputs always yield identical routes.

use std::collections::{BTreeMap, BTreeSet};
use std::error::Error;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geom::{distance, Position, Route, RouteError};
use crate::NodeId;

/// Node placement plus the connectivity parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: BTreeMap<NodeId, Position>,
    comm_range: f64,
    area: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyError {
    UnknownNode(NodeId),
    /// CSV line that failed to parse, 1-based.
    Malformed {
        line: usize,
        reason: String,
    },
    OutOfBounds(NodeId),
    /// Endpoints coincide in space, so no route can be normalized.
    DegenerateRoute(RouteError),
}

impl fmt::Display for TopologyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyError::UnknownNode(id) => write!(f, "unknown node id {id}"),
            TopologyError::Malformed { line, reason } => {
                write!(f, "topology csv line {line}: {reason}")
            }
            TopologyError::OutOfBounds(id) => write!(f, "node {id} lies outside the area"),
            TopologyError::DegenerateRoute(e) => write!(f, "degenerate route: {e}"),
        }
    }
}

impl Error for TopologyError {}

/// Which metric the stand-in router optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoutePolicy {
    /// Minimize Σ d_hop⁴; ties by fewer hops, then lexicographic sequence.
    MinEnergy,
    /// Minimize hop count; ties by smaller Σ d_hop⁴, then lexicographic.
    MinHop,
}

impl fmt::Display for RoutePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoutePolicy::MinEnergy => write!(f, "min_energy"),
            RoutePolicy::MinHop => write!(f, "min_hop"),
        }
    }
}

/// Places `n_nodes` nodes (ids `0..n_nodes`) independently and uniformly on
/// the area. The same seed always produces the same topology.
pub fn generate_topology(
    n_nodes: u32,
    area: (f64, f64),
    comm_range: f64,
    rng_seed: u64,
) -> Topology {
    assert!(n_nodes >= 2, "a network needs at least two nodes");
    assert!(area.0 > 0.0 && area.1 > 0.0, "area must be positive");
    assert!(comm_range > 0.0, "communication range must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let nodes = (0..n_nodes)
        .map(|id| {
            let x = rng.gen_range(0.0..area.0);
            let y = rng.gen_range(0.0..area.1);
            (NodeId(id), Position::new(x, y))
        })
        .collect();
    Topology {
        nodes,
        comm_range,
        area,
    }
}

impl Topology {
    pub fn from_nodes(
        nodes: BTreeMap<NodeId, Position>,
        comm_range: f64,
        area: (f64, f64),
    ) -> Result<Self, TopologyError> {
        for (&id, pos) in &nodes {
            if !pos.is_finite() || pos.x < 0.0 || pos.y < 0.0 || pos.x > area.0 || pos.y > area.1 {
                return Err(TopologyError::OutOfBounds(id));
            }
        }
        Ok(Topology {
            nodes,
            comm_range,
            area,
        })
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, Position> {
        &self.nodes
    }

    pub fn position(&self, id: NodeId) -> Option<Position> {
        self.nodes.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn comm_range(&self) -> f64 {
        self.comm_range
    }

    pub fn area(&self) -> (f64, f64) {
        self.area
    }

    /// Whether two nodes are within communication range of each other.
    pub fn in_range(&self, a: NodeId, b: NodeId) -> bool {
        match (self.position(a), self.position(b)) {
            (Some(pa), Some(pb)) => distance(pa, pb) <= self.comm_range,
            _ => false,
        }
    }

    /// Positions as `node_id,x,y` CSV, coordinates to 6 decimal places.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node_id,x,y\n");
        for (id, pos) in &self.nodes {
            out.push_str(&format!("{},{:.6},{:.6}\n", id, pos.x, pos.y));
        }
        out
    }

    /// Parses the [`Topology::to_csv`] format back into a topology.
    pub fn from_csv(text: &str, comm_range: f64, area: (f64, f64)) -> Result<Self, TopologyError> {
        let mut nodes = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || (line_no == 1 && trimmed == "node_id,x,y") {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').collect();
            if fields.len() != 3 {
                return Err(TopologyError::Malformed {
                    line: line_no,
                    reason: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let id: u32 = fields[0].parse().map_err(|e| TopologyError::Malformed {
                line: line_no,
                reason: format!("bad node id: {e}"),
            })?;
            let x: f64 = fields[1].parse().map_err(|e| TopologyError::Malformed {
                line: line_no,
                reason: format!("bad x: {e}"),
            })?;
            let y: f64 = fields[2].parse().map_err(|e| TopologyError::Malformed {
                line: line_no,
                reason: format!("bad y: {e}"),
            })?;
            nodes.insert(NodeId(id), Position::new(x, y));
        }
        Topology::from_nodes(nodes, comm_range, area)
    }
}

/// Search key ordered per policy; `seq` is the full node sequence so the
/// lexicographic tie-break is exact.
#[derive(Debug, Clone)]
struct PathKey {
    energy: f64,
    hops: u32,
    seq: Vec<NodeId>,
}

impl PathKey {
    fn better_than(&self, other: &PathKey, policy: RoutePolicy) -> bool {
        let ord = match policy {
            RoutePolicy::MinEnergy => self
                .energy
                .total_cmp(&other.energy)
                .then(self.hops.cmp(&other.hops))
                .then(self.seq.cmp(&other.seq)),
            RoutePolicy::MinHop => self
                .hops
                .cmp(&other.hops)
                .then(self.energy.total_cmp(&other.energy))
                .then(self.seq.cmp(&other.seq)),
        };
        ord == std::cmp::Ordering::Less
    }
}

/// Shortest path from `sender` to `destination` over the alive-node graph,
/// returned as a [`Route`]; `Ok(None)` when the graph disconnects them.
///
/// Only nodes in `alive` participate, modelling dead radios dropping out of
/// the connectivity graph.
pub fn find_route(
    topology: &Topology,
    sender: NodeId,
    destination: NodeId,
    policy: RoutePolicy,
    alive: &BTreeSet<NodeId>,
) -> Result<Option<Route>, TopologyError> {
    for id in [sender, destination] {
        if !topology.nodes.contains_key(&id) {
            return Err(TopologyError::UnknownNode(id));
        }
    }
    debug_assert!(alive.contains(&sender) && alive.contains(&destination));

    // Plain Dijkstra with linear extraction; node counts are desk-scale.
    let mut best: BTreeMap<NodeId, PathKey> = BTreeMap::new();
    let mut settled: BTreeSet<NodeId> = BTreeSet::new();
    best.insert(
        sender,
        PathKey {
            energy: 0.0,
            hops: 0,
            seq: vec![sender],
        },
    );

    loop {
        let current = best.iter().filter(|(id, _)| !settled.contains(id)).fold(
            None::<(NodeId, &PathKey)>,
            |acc, (&id, key)| match acc {
                Some((_, acc_key)) if !key.better_than(acc_key, policy) => acc,
                _ => Some((id, key)),
            },
        );
        let Some((u, _)) = current else {
            return Ok(None); // frontier exhausted without reaching destination
        };
        if u == destination {
            break;
        }
        settled.insert(u);
        let u_key = best[&u].clone();
        let u_pos = topology.nodes[&u];
        for (&v, &v_pos) in &topology.nodes {
            if v == u || settled.contains(&v) || !alive.contains(&v) {
                continue;
            }
            let d = distance(u_pos, v_pos);
            if d > topology.comm_range {
                continue;
            }
            let mut seq = u_key.seq.clone();
            seq.push(v);
            let candidate = PathKey {
                energy: u_key.energy + d.powi(4),
                hops: u_key.hops + 1,
                seq,
            };
            let improves = match best.get(&v) {
                None => true,
                Some(existing) => candidate.better_than(existing, policy),
            };
            if improves {
                best.insert(v, candidate);
            }
        }
    }

    let seq = best[&destination].seq.clone();
    let relays: Vec<NodeId> = seq[1..seq.len() - 1].to_vec();
    let positions: BTreeMap<NodeId, Position> =
        seq.iter().map(|&id| (id, topology.nodes[&id])).collect();
    Route::new(sender, destination, relays, positions)
        .map(Some)
        .map_err(TopologyError::DegenerateRoute)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collinear_topology() -> Topology {
        let nodes = (0..4)
            .map(|i| (NodeId(i), Position::new(100.0 * i as f64, 0.0)))
            .collect();
        Topology::from_nodes(nodes, 250.0, (500.0, 500.0)).unwrap()
    }

    fn all_alive(t: &Topology) -> BTreeSet<NodeId> {
        t.nodes().keys().copied().collect()
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_topology(2, (500.0, 500.0), 250.0, 7);
        let b = generate_topology(2, (500.0, 500.0), 250.0, 7);
        assert_eq!(a, b);
        let c = generate_topology(2, (500.0, 500.0), 250.0, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn generation_respects_bounds() {
        let t = generate_topology(20, (500.0, 500.0), 250.0, 3);
        assert_eq!(t.len(), 20);
        for pos in t.nodes().values() {
            assert!(pos.x >= 0.0 && pos.x <= 500.0);
            assert!(pos.y >= 0.0 && pos.y <= 500.0);
        }
    }

    #[test]
    fn min_energy_prefers_short_hops() {
        let t = collinear_topology();
        let route = find_route(
            &t,
            NodeId(0),
            NodeId(3),
            RoutePolicy::MinEnergy,
            &all_alive(&t),
        )
        .unwrap()
        .unwrap();
        assert_eq!(
            route.node_sequence(),
            vec![NodeId(0), NodeId(1), NodeId(2), NodeId(3)]
        );
    }

    #[test]
    fn min_hop_prefers_few_hops() {
        let t = collinear_topology();
        let route = find_route(
            &t,
            NodeId(0),
            NodeId(3),
            RoutePolicy::MinHop,
            &all_alive(&t),
        )
        .unwrap()
        .unwrap();
        // Both 0-1-3 and 0-2-3 are two hops with identical Σd⁴ (100⁴+200⁴),
        // so the lexicographic rule selects 0-1-3.
        assert_eq!(route.node_sequence(), vec![NodeId(0), NodeId(1), NodeId(3)]);
        assert_eq!(route.relays().len(), 1);
    }

    #[test]
    fn disconnected_pair_has_no_route() {
        let nodes = [
            (NodeId(0), Position::new(0.0, 0.0)),
            (NodeId(1), Position::new(300.0, 0.0)),
        ]
        .into_iter()
        .collect();
        let t = Topology::from_nodes(nodes, 250.0, (500.0, 500.0)).unwrap();
        let r = find_route(
            &t,
            NodeId(0),
            NodeId(1),
            RoutePolicy::MinEnergy,
            &all_alive(&t),
        )
        .unwrap();
        assert!(r.is_none());
    }

    #[test]
    fn unknown_node_is_an_error() {
        let t = collinear_topology();
        let err = find_route(
            &t,
            NodeId(0),
            NodeId(42),
            RoutePolicy::MinEnergy,
            &all_alive(&t),
        );
        assert!(matches!(err, Err(TopologyError::UnknownNode(NodeId(42)))));
    }

    #[test]
    fn dead_nodes_are_bypassed() {
        let t = collinear_topology();
        let mut alive = all_alive(&t);
        alive.remove(&NodeId(1));
        let route = find_route(&t, NodeId(0), NodeId(3), RoutePolicy::MinEnergy, &alive)
            .unwrap()
            .unwrap();
        assert!(!route.node_sequence().contains(&NodeId(1)));
        assert_eq!(route.node_sequence(), vec![NodeId(0), NodeId(2), NodeId(3)]);

        // Kill the remaining relay: 0-3 is out of range, so no route.
        alive.remove(&NodeId(2));
        let none = find_route(&t, NodeId(0), NodeId(3), RoutePolicy::MinEnergy, &alive).unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn csv_round_trip() {
        let t = generate_topology(10, (500.0, 500.0), 250.0, 42);
        let csv = t.to_csv();
        let back = Topology::from_csv(&csv, 250.0, (500.0, 500.0)).unwrap();
        assert_eq!(back.len(), 10);
        for (id, pos) in t.nodes() {
            let loaded = back.position(*id).unwrap();
            assert!((loaded.x - pos.x).abs() < 5e-7);
            assert!((loaded.y - pos.y).abs() < 5e-7);
        }
        // Re-emitting the parsed topology reproduces the bytes.
        assert_eq!(back.to_csv(), csv);
    }

    #[test]
    fn csv_rejects_garbage() {
        let err = Topology::from_csv("node_id,x,y\n0,1.0\n", 250.0, (500.0, 500.0));
        assert!(matches!(err, Err(TopologyError::Malformed { line: 2, .. })));
    }

    /// Exhaustive simple-path enumeration for the routing oracle.
    fn all_paths(
        t: &Topology,
        from: NodeId,
        to: NodeId,
        visited: &mut Vec<NodeId>,
        out: &mut Vec<Vec<NodeId>>,
    ) {
        if from == to {
            out.push(visited.clone());
            return;
        }
        let from_pos = t.position(from).unwrap();
        for (&v, &v_pos) in t.nodes() {
            if visited.contains(&v) || distance(from_pos, v_pos) > t.comm_range() {
                continue;
            }
            visited.push(v);
            all_paths(t, v, to, visited, out);
            visited.pop();
        }
    }

    #[test]
    fn min_energy_matches_brute_force() {
        for seed in 0..30 {
            let t = generate_topology(7, (500.0, 500.0), 220.0, seed);
            let alive = all_alive(&t);
            let mut paths = Vec::new();
            let mut visited = vec![NodeId(0)];
            all_paths(&t, NodeId(0), NodeId(6), &mut visited, &mut paths);
            let found =
                find_route(&t, NodeId(0), NodeId(6), RoutePolicy::MinEnergy, &alive).unwrap();
            match found {
                None => assert!(paths.is_empty()),
                Some(route) => {
                    let cost = |p: &[NodeId]| -> f64 {
                        p.windows(2)
                            .map(|w| {
                                distance(t.position(w[0]).unwrap(), t.position(w[1]).unwrap())
                                    .powi(4)
                            })
                            .sum()
                    };
                    let route_cost = cost(&route.node_sequence());
                    for p in &paths {
                        assert!(
                            route_cost <= cost(p) + 1e-6,
                            "seed {seed}: brute force found a cheaper path"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn routes_are_simple_and_within_range() {
        for seed in 0..50 {
            let t = generate_topology(12, (500.0, 500.0), 200.0, seed);
            let alive = all_alive(&t);
            for policy in [RoutePolicy::MinEnergy, RoutePolicy::MinHop] {
                if let Some(route) = find_route(&t, NodeId(0), NodeId(11), policy, &alive).unwrap()
                {
                    let seq = route.node_sequence();
                    let distinct: BTreeSet<_> = seq.iter().collect();
                    assert_eq!(distinct.len(), seq.len(), "repeated node on route");
                    for w in seq.windows(2) {
                        assert!(t.in_range(w[0], w[1]), "hop exceeds range");
                    }
                }
            }
        }
    }
}
