//! Positions, routes, and the normalized two-ray power model.
//!
//! All power figures in this module are dimensionless: the direct
//! sender-to-destination transmission costs exactly 1, and every hop costs
//! `(d_hop / d_direct)^4`. A route's *saving* is 1 minus the summed hop
//! costs, so the direct route saves nothing and a route whose hops are short
//! relative to the span saves almost everything.

use std::collections::BTreeMap;
use std::error::Error;
use std::fmt;

use crate::NodeId;

/// A node location on the flat simulation plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Euclidean distance between two positions, in meters.
pub fn distance(a: Position, b: Position) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeomError {
    /// `tx_cost` was called with a non-positive reference distance.
    InvalidReference { d_ref: f64 },
}

impl fmt::Display for GeomError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeomError::InvalidReference { d_ref } => {
                write!(f, "reference distance must be positive, got {d_ref}")
            }
        }
    }
}

impl Error for GeomError {}

/// Normalized transmission cost of covering `d` meters when the direct
/// reference transmission covers `d_ref` meters, i.e. `(d / d_ref)^4`
/// under the two-ray ground reflection model.
pub fn tx_cost(d: f64, d_ref: f64) -> Result<f64, GeomError> {
    if d_ref <= 0.0 {
        return Err(GeomError::InvalidReference { d_ref });
    }
    debug_assert!(d >= 0.0, "distances are non-negative");
    Ok((d / d_ref).powi(4))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RouteError {
    SenderIsDestination,
    EndpointUsedAsRelay(NodeId),
    DuplicateRelay(NodeId),
    MissingPosition(NodeId),
    NonFinitePosition(NodeId),
    /// Sender and destination share a position, so no reference
    /// transmission exists to normalize against.
    ZeroSpan,
}

impl fmt::Display for RouteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RouteError::SenderIsDestination => write!(f, "sender and destination coincide"),
            RouteError::EndpointUsedAsRelay(id) => {
                write!(f, "node {id} is both an endpoint and a relay")
            }
            RouteError::DuplicateRelay(id) => write!(f, "relay {id} listed twice"),
            RouteError::MissingPosition(id) => write!(f, "no position for node {id}"),
            RouteError::NonFinitePosition(id) => write!(f, "non-finite position for node {id}"),
            RouteError::ZeroSpan => write!(f, "sender-to-destination distance is zero"),
        }
    }
}

impl Error for RouteError {}

/// An ordered sender → relays → destination path with the positions of
/// every node on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    sender: NodeId,
    destination: NodeId,
    relays: Vec<NodeId>,
    positions: BTreeMap<NodeId, Position>,
}

impl Route {
    pub fn new(
        sender: NodeId,
        destination: NodeId,
        relays: Vec<NodeId>,
        positions: BTreeMap<NodeId, Position>,
    ) -> Result<Self, RouteError> {
        if sender == destination {
            return Err(RouteError::SenderIsDestination);
        }
        for (i, &r) in relays.iter().enumerate() {
            if r == sender || r == destination {
                return Err(RouteError::EndpointUsedAsRelay(r));
            }
            if relays[..i].contains(&r) {
                return Err(RouteError::DuplicateRelay(r));
            }
        }
        for &id in relays.iter().chain([&sender, &destination]) {
            match positions.get(&id) {
                None => return Err(RouteError::MissingPosition(id)),
                Some(p) if !p.is_finite() => return Err(RouteError::NonFinitePosition(id)),
                Some(_) => {}
            }
        }
        let route = Route {
            sender,
            destination,
            relays,
            positions,
        };
        if route.direct_distance() <= 0.0 {
            return Err(RouteError::ZeroSpan);
        }
        Ok(route)
    }

    /// Convenience constructor for a relay-free sender → destination route.
    pub fn direct(
        sender: NodeId,
        destination: NodeId,
        positions: BTreeMap<NodeId, Position>,
    ) -> Result<Self, RouteError> {
        Route::new(sender, destination, Vec::new(), positions)
    }

    pub fn sender(&self) -> NodeId {
        self.sender
    }

    pub fn destination(&self) -> NodeId {
        self.destination
    }

    pub fn relays(&self) -> &[NodeId] {
        &self.relays
    }

    pub fn positions(&self) -> &BTreeMap<NodeId, Position> {
        &self.positions
    }

    pub fn position(&self, id: NodeId) -> Position {
        self.positions[&id]
    }

    /// Full node sequence sender, relays…, destination.
    pub fn node_sequence(&self) -> Vec<NodeId> {
        let mut seq = Vec::with_capacity(self.relays.len() + 2);
        seq.push(self.sender);
        seq.extend_from_slice(&self.relays);
        seq.push(self.destination);
        seq
    }

    /// Consecutive `(from, to)` hops along the route.
    pub fn hops(&self) -> Vec<(NodeId, NodeId)> {
        let seq = self.node_sequence();
        seq.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn hop_distance(&self, from: NodeId, to: NodeId) -> f64 {
        distance(self.position(from), self.position(to))
    }

    /// Sender-to-destination distance, the normalization reference.
    pub fn direct_distance(&self) -> f64 {
        self.hop_distance(self.sender, self.destination)
    }
}

/// Normalized power saved by relaying along `route` instead of transmitting
/// directly: `1 − Σ_hops (d_hop / d_direct)^4`.
///
/// Zero for the direct route, negative for power-wasting relay sets.
pub fn path_saving(route: &Route) -> f64 {
    let d_ref = route.direct_distance();
    let spent: f64 = route
        .hops()
        .iter()
        .map(|&(a, b)| {
            // d_ref > 0 is a Route invariant
            tx_cost(route.hop_distance(a, b), d_ref).expect("route has positive span")
        })
        .sum();
    1.0 - spent
}

/// Relay acceptance rule: the relayed path must strictly save more than
/// `epsilon_min` normalized power.
pub fn relay_acceptable(route: &Route, epsilon_min: f64) -> bool {
    debug_assert!(epsilon_min >= 0.0);
    path_saving(route) > epsilon_min
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pos_map(entries: &[(u32, f64, f64)]) -> BTreeMap<NodeId, Position> {
        entries
            .iter()
            .map(|&(id, x, y)| (NodeId(id), Position::new(x, y)))
            .collect()
    }

    fn route(sender: u32, dest: u32, relays: &[u32], entries: &[(u32, f64, f64)]) -> Route {
        Route::new(
            NodeId(sender),
            NodeId(dest),
            relays.iter().map(|&r| NodeId(r)).collect(),
            pos_map(entries),
        )
        .unwrap()
    }

    #[test]
    fn distance_basics() {
        assert_eq!(
            distance(Position::new(0.0, 0.0), Position::new(0.0, 0.0)),
            0.0
        );
        assert_eq!(
            distance(Position::new(0.0, 0.0), Position::new(3.0, 4.0)),
            5.0
        );
        let d = distance(Position::new(0.0, 0.0), Position::new(100.0, 50.0));
        assert!((d - 12500f64.sqrt()).abs() < 1e-12);
        assert!((d - 111.80339887498948).abs() < 1e-9);
    }

    #[test]
    fn distance_symmetric() {
        let a = Position::new(13.5, -2.25);
        let b = Position::new(-7.0, 99.0);
        assert_eq!(distance(a, b), distance(b, a));
    }

    #[test]
    fn tx_cost_examples() {
        assert_eq!(tx_cost(200.0, 200.0).unwrap(), 1.0);
        assert_eq!(tx_cost(100.0, 200.0).unwrap(), 0.0625);
        assert_eq!(tx_cost(150.0, 200.0).unwrap(), 0.31640625);
    }

    #[test]
    fn tx_cost_rejects_bad_reference() {
        assert!(matches!(
            tx_cost(10.0, 0.0),
            Err(GeomError::InvalidReference { .. })
        ));
        assert!(tx_cost(10.0, -1.0).is_err());
    }

    #[test]
    fn tx_cost_monotone_in_distance() {
        let mut prev = 0.0;
        for i in 1..200 {
            let c = tx_cost(i as f64, 137.0).unwrap();
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn saving_direct_route_is_zero() {
        let r = route(0, 1, &[], &[(0, 0.0, 0.0), (1, 200.0, 0.0)]);
        assert_eq!(path_saving(&r), 0.0);
    }

    #[test]
    fn saving_midpoint_relay() {
        let r = route(
            0,
            2,
            &[1],
            &[(0, 0.0, 0.0), (1, 100.0, 0.0), (2, 200.0, 0.0)],
        );
        assert_eq!(path_saving(&r), 0.875);
    }

    #[test]
    fn saving_offset_relay() {
        let r = route(
            0,
            2,
            &[1],
            &[(0, 0.0, 0.0), (1, 100.0, 50.0), (2, 200.0, 0.0)],
        );
        assert!((path_saving(&r) - 0.8046875).abs() < 1e-12);
    }

    #[test]
    fn acceptance_is_strict() {
        let mid = route(
            0,
            2,
            &[1],
            &[(0, 0.0, 0.0), (1, 100.0, 0.0), (2, 200.0, 0.0)],
        );
        assert!(relay_acceptable(&mid, 0.0));
        assert!(!relay_acceptable(&mid, 0.875));

        let direct = route(0, 1, &[], &[(0, 0.0, 0.0), (1, 200.0, 0.0)]);
        assert!(!relay_acceptable(&direct, 0.0));
    }

    #[test]
    fn detour_saving_is_negative() {
        // Relay far off the line: hops are longer than the span.
        let r = route(
            0,
            2,
            &[1],
            &[(0, 0.0, 0.0), (1, 100.0, 300.0), (2, 200.0, 0.0)],
        );
        assert!(path_saving(&r) < 0.0);
        assert!(!relay_acceptable(&r, 0.0));
    }

    #[test]
    fn coincident_adjacent_nodes_cost_nothing() {
        // Relay sitting on top of the sender: its hop costs 0.
        let r = route(0, 2, &[1], &[(0, 0.0, 0.0), (1, 0.0, 0.0), (2, 200.0, 0.0)]);
        assert_eq!(path_saving(&r), 0.0);
    }

    #[test]
    fn route_validation() {
        let err = Route::new(NodeId(0), NodeId(0), vec![], pos_map(&[(0, 0.0, 0.0)]));
        assert_eq!(err.unwrap_err(), RouteError::SenderIsDestination);

        let err = Route::new(
            NodeId(0),
            NodeId(1),
            vec![NodeId(1)],
            pos_map(&[(0, 0.0, 0.0), (1, 1.0, 0.0)]),
        );
        assert_eq!(err.unwrap_err(), RouteError::EndpointUsedAsRelay(NodeId(1)));

        let err = Route::new(
            NodeId(0),
            NodeId(1),
            vec![NodeId(2), NodeId(2)],
            pos_map(&[(0, 0.0, 0.0), (1, 1.0, 0.0), (2, 0.5, 0.0)]),
        );
        assert_eq!(err.unwrap_err(), RouteError::DuplicateRelay(NodeId(2)));

        let err = Route::new(
            NodeId(0),
            NodeId(1),
            vec![NodeId(2)],
            pos_map(&[(0, 0.0, 0.0), (1, 1.0, 0.0)]),
        );
        assert_eq!(err.unwrap_err(), RouteError::MissingPosition(NodeId(2)));

        let err = Route::new(
            NodeId(0),
            NodeId(1),
            vec![],
            pos_map(&[(0, 0.0, 0.0), (1, 0.0, 0.0)]),
        );
        assert_eq!(err.unwrap_err(), RouteError::ZeroSpan);
    }

    #[test]
    fn hops_cover_the_sequence() {
        let r = route(
            5,
            9,
            &[2, 7],
            &[
                (5, 0.0, 0.0),
                (2, 10.0, 0.0),
                (7, 20.0, 0.0),
                (9, 30.0, 0.0),
            ],
        );
        assert_eq!(
            r.hops(),
            vec![
                (NodeId(5), NodeId(2)),
                (NodeId(2), NodeId(7)),
                (NodeId(7), NodeId(9)),
            ]
        );
    }
}
