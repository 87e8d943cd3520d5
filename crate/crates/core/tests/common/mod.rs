//! Shared helpers for the integration and acceptance suites.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use faster_core::geom::{Position, Route};
use faster_core::NodeId;

/// A route with `n_relays` relays placed loosely along the sender →
/// destination segment (with lateral noise), so savings are usually but not
/// always positive.
pub fn guided_route(rng: &mut ChaCha8Rng, n_relays: usize) -> Route {
    let sender_pos = Position::new(rng.gen_range(0.0..200.0), rng.gen_range(0.0..1000.0));
    let dest_pos = Position::new(rng.gen_range(800.0..1000.0), rng.gen_range(0.0..1000.0));
    let mut positions: BTreeMap<NodeId, Position> = BTreeMap::new();
    positions.insert(NodeId(0), sender_pos);
    positions.insert(NodeId(1), dest_pos);
    let relays: Vec<NodeId> = (0..n_relays)
        .map(|i| {
            let id = NodeId(2 + i as u32);
            let t = (i as f64 + 1.0) / (n_relays as f64 + 1.0);
            let x = sender_pos.x + t * (dest_pos.x - sender_pos.x) + rng.gen_range(-80.0..80.0);
            let y = sender_pos.y + t * (dest_pos.y - sender_pos.y) + rng.gen_range(-80.0..80.0);
            positions.insert(id, Position::new(x, y));
            id
        })
        .collect();
    Route::new(NodeId(0), NodeId(1), relays, positions).expect("generated route is valid")
}

/// A route with `n_relays` relays scattered uniformly over the area, so most
/// relay sets waste power rather than save it.
pub fn scattered_route(rng: &mut ChaCha8Rng, n_relays: usize) -> Route {
    let mut positions: BTreeMap<NodeId, Position> = BTreeMap::new();
    positions.insert(
        NodeId(0),
        Position::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0)),
    );
    let mut dest = Position::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0));
    while faster_core::geom::distance(positions[&NodeId(0)], dest) < 1.0 {
        dest = Position::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0));
    }
    positions.insert(NodeId(1), dest);
    let relays: Vec<NodeId> = (0..n_relays)
        .map(|i| {
            let id = NodeId(2 + i as u32);
            positions.insert(
                id,
                Position::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0)),
            );
            id
        })
        .collect();
    Route::new(NodeId(0), NodeId(1), relays, positions).expect("generated route is valid")
}

/// Alternates between the two generators.
pub fn mixed_route(rng: &mut ChaCha8Rng, n_relays: usize) -> Route {
    if rng.gen_bool(0.5) {
        guided_route(rng, n_relays)
    } else {
        scattered_route(rng, n_relays)
    }
}
