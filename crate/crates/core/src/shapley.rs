//! Coalition values over a route's relays and exact Shapley payoffs.
//!
//! A coalition is a subset of the relays on a route. Its worth is the
//! transmission power it saves, in the normalized units of [`crate::geom`].
//! Two readings of the worth function are provided (see
//! [`CoalitionValueVariant`]), and payoffs are computed two independent
//! ways: the weighted-marginal sum over subsets and a permutation average,
//! which must agree.
//!
//! Subsets are represented as bitmasks over relay indices in route order:
//! bit `i` set means the `i`-th relay of the route is in the coalition.
//! The exact computation enumerates all `2^n` subsets, so route sizes are
//! capped ([`DEFAULT_MAX_EXACT_RELAYS`]); the factorial growth of the
//! permutation oracle gets a tighter cap ([`MAX_ORACLE_RELAYS`]).

use std::collections::{BTreeMap, BTreeSet};
use std::error::Error;
use std::fmt;

use itertools::Itertools;

use crate::geom::{path_saving, tx_cost, Route};
use crate::NodeId;

/// Default ceiling on relay count for the exact subset-sum computation.
/// 2^12 coalition evaluations is desk-scale; anything larger is refused
/// rather than approximated.
pub const DEFAULT_MAX_EXACT_RELAYS: usize = 12;

/// Ceiling for the n! permutation oracle.
pub const MAX_ORACLE_RELAYS: usize = 8;

/// Which reading of the coalition worth function to use.
///
/// * `Saved` — the worth of S is the total power the subpath
///   sender → S → destination actually saves: `path_saving(subpath(S))`.
///   This is the default and the economically meaningful reading.
/// * `Literal` — the worth of S sums, over its members, one minus the
///   normalized cost of each member's outgoing hop *in the full route*.
///   It ignores the hop into the first relay and double-counts nothing;
///   the game is additive across members. Kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoalitionValueVariant {
    Saved,
    Literal,
}

impl fmt::Display for CoalitionValueVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoalitionValueVariant::Saved => write!(f, "saved"),
            CoalitionValueVariant::Literal => write!(f, "literal"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapleyError {
    /// Route has more relays than the exact computation permits.
    CoalitionTooLarge { relays: usize, max: usize },
    /// Route has more relays than the permutation oracle permits.
    OracleTooLarge { relays: usize, max: usize },
    /// A coalition member is not a relay of the route.
    NotARelay(NodeId),
}

impl fmt::Display for ShapleyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapleyError::CoalitionTooLarge { relays, max } => write!(
                f,
                "route has {relays} relays; exact Shapley computation is capped at {max}"
            ),
            ShapleyError::OracleTooLarge { relays, max } => write!(
                f,
                "route has {relays} relays; permutation oracle is capped at {max}"
            ),
            ShapleyError::NotARelay(id) => {
                write!(f, "node {id} is not a relay of the route")
            }
        }
    }
}

impl Error for ShapleyError {}

/// A subset of a route's relays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coalition {
    members: BTreeSet<NodeId>,
}

impl Coalition {
    /// Builds a coalition, checking every member is a relay of `route`.
    pub fn new(
        route: &Route,
        members: impl IntoIterator<Item = NodeId>,
    ) -> Result<Self, ShapleyError> {
        let members: BTreeSet<NodeId> = members.into_iter().collect();
        for &id in &members {
            if !route.relays().contains(&id) {
                return Err(ShapleyError::NotARelay(id));
            }
        }
        Ok(Coalition { members })
    }

    pub fn empty() -> Self {
        Coalition {
            members: BTreeSet::new(),
        }
    }

    pub fn members(&self) -> &BTreeSet<NodeId> {
        &self.members
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.members.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// The route sender → (coalition members in route order) → destination.
pub fn subpath(route: &Route, coalition: &Coalition) -> Route {
    let relays: Vec<NodeId> = route
        .relays()
        .iter()
        .copied()
        .filter(|id| coalition.contains(*id))
        .collect();
    Route::new(
        route.sender(),
        route.destination(),
        relays,
        route.positions().clone(),
    )
    .expect("a subset of a valid route is valid")
}

/// Worth of one coalition under the chosen variant. `v(∅) = 0` for both.
pub fn coalition_value(
    route: &Route,
    coalition: &Coalition,
    variant: CoalitionValueVariant,
) -> f64 {
    match variant {
        CoalitionValueVariant::Saved => {
            if coalition.is_empty() {
                0.0
            } else {
                path_saving(&subpath(route, coalition))
            }
        }
        CoalitionValueVariant::Literal => {
            let terms = literal_terms(route);
            route
                .relays()
                .iter()
                .zip(&terms)
                .filter(|(id, _)| coalition.contains(**id))
                .map(|(_, t)| t)
                .sum()
        }
    }
}

/// Per-relay literal term: one minus the normalized cost of the relay's
/// outgoing hop in the full route.
fn literal_terms(route: &Route) -> Vec<f64> {
    let d_ref = route.direct_distance();
    let seq = route.node_sequence();
    (1..seq.len() - 1)
        .map(|i| {
            let d = route.hop_distance(seq[i], seq[i + 1]);
            1.0 - tx_cost(d, d_ref).expect("route has positive span")
        })
        .collect()
}

/// Worths of all `2^n` coalitions, indexed by bitmask over relay order.
pub fn coalition_values(route: &Route, variant: CoalitionValueVariant) -> Vec<f64> {
    let relays = route.relays();
    let n = relays.len();
    let d_ref = route.direct_distance();
    match variant {
        CoalitionValueVariant::Saved => {
            let sender_pos = route.position(route.sender());
            let dest_pos = route.position(route.destination());
            let relay_pos: Vec<_> = relays.iter().map(|&r| route.position(r)).collect();
            (0u32..1 << n)
                .map(|mask| {
                    let mut prev = sender_pos;
                    let mut spent = 0.0;
                    for (i, &p) in relay_pos.iter().enumerate() {
                        if mask & (1 << i) != 0 {
                            spent += tx_cost(crate::geom::distance(prev, p), d_ref)
                                .expect("route has positive span");
                            prev = p;
                        }
                    }
                    spent += tx_cost(crate::geom::distance(prev, dest_pos), d_ref)
                        .expect("route has positive span");
                    if mask == 0 {
                        0.0 // empty coalition is worthless by definition
                    } else {
                        1.0 - spent
                    }
                })
                .collect()
        }
        CoalitionValueVariant::Literal => {
            let terms = literal_terms(route);
            (0u32..1 << n)
                .map(|mask| {
                    (0..n)
                        .filter(|i| mask & (1 << i) != 0)
                        .map(|i| terms[i])
                        .sum()
                })
                .collect()
        }
    }
}

/// Per-relay Shapley shares and the grand-coalition worth they divide.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffVector {
    pub shares: BTreeMap<NodeId, f64>,
    pub grand_value: f64,
}

impl PayoffVector {
    pub fn share(&self, id: NodeId) -> Option<f64> {
        self.shares.get(&id).copied()
    }

    pub fn min_share(&self) -> f64 {
        self.shares.values().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Exact Shapley values of an arbitrary n-player game given its worth
/// table (`values[mask]`, bit `i` = player `i`): for each player the sum of
/// `(|S|-1)!(n-|S|)!/n! · (v(S) - v(S\{i}))` over coalitions containing it.
pub fn shapley_from_values(n: usize, values: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), 1 << n, "need a worth for every subset");
    // (s-1)!(n-s)!/n! for s = 1..=n; 12! < 2^53 so f64 stays exact.
    let mut factorial = vec![1.0f64; n + 1];
    for i in 1..=n {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let weight: Vec<f64> = (0..=n)
        .map(|s| {
            if s == 0 {
                0.0
            } else {
                factorial[s - 1] * factorial[n - s] / factorial[n]
            }
        })
        .collect();

    let mut phi = vec![0.0f64; n];
    for mask in 1u32..1 << n {
        let w = weight[mask.count_ones() as usize];
        for (i, p) in phi.iter_mut().enumerate() {
            let bit = 1u32 << i;
            if mask & bit != 0 {
                *p += w * (values[mask as usize] - values[(mask & !bit) as usize]);
            }
        }
    }
    phi
}

/// Independent check of [`shapley_from_values`]: each player's payoff is its
/// average marginal contribution over all n! join orders.
pub fn shapley_permutations_from_values(n: usize, values: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), 1 << n);
    let mut phi = vec![0.0f64; n];
    if n == 0 {
        return phi;
    }
    let mut count = 0u64;
    for perm in (0..n).permutations(n) {
        let mut mask = 0u32;
        for &i in &perm {
            let next = mask | (1 << i);
            phi[i] += values[next as usize] - values[mask as usize];
            mask = next;
        }
        count += 1;
    }
    for p in &mut phi {
        *p /= count as f64;
    }
    phi
}

fn payoff_vector(route: &Route, phi: Vec<f64>, values: &[f64]) -> PayoffVector {
    let shares = route.relays().iter().copied().zip(phi).collect();
    PayoffVector {
        shares,
        grand_value: *values.last().expect("values is non-empty"),
    }
}

/// Shapley payoff of every relay on the route, capped at `max_relays`.
pub fn shapley_with_cap(
    route: &Route,
    variant: CoalitionValueVariant,
    max_relays: usize,
) -> Result<PayoffVector, ShapleyError> {
    let n = route.relays().len();
    if n > max_relays {
        return Err(ShapleyError::CoalitionTooLarge {
            relays: n,
            max: max_relays,
        });
    }
    let values = coalition_values(route, variant);
    let phi = shapley_from_values(n, &values);
    Ok(payoff_vector(route, phi, &values))
}

/// Shapley payoff of every relay on the route with the default size cap.
pub fn shapley(
    route: &Route,
    variant: CoalitionValueVariant,
) -> Result<PayoffVector, ShapleyError> {
    shapley_with_cap(route, variant, DEFAULT_MAX_EXACT_RELAYS)
}

/// Permutation-average payoffs; must match [`shapley`] within 1e-9.
pub fn shapley_oracle(
    route: &Route,
    variant: CoalitionValueVariant,
) -> Result<PayoffVector, ShapleyError> {
    let n = route.relays().len();
    if n > MAX_ORACLE_RELAYS {
        return Err(ShapleyError::OracleTooLarge {
            relays: n,
            max: MAX_ORACLE_RELAYS,
        });
    }
    let values = coalition_values(route, variant);
    let phi = shapley_permutations_from_values(n, &values);
    Ok(payoff_vector(route, phi, &values))
}
