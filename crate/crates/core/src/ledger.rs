//! Integer virtual-currency counters and the packet purse.
//!
//! Currency is integer micro-credits throughout; no fractional credit ever
//! exists, which makes conservation checkable with exact equality. A packet
//! purse carries the sender's total charge split into per-hop sections; the
//! split uses largest-remainder apportionment so the section amounts always
//! sum to the charge exactly and each stays within one micro-credit of the
//! real-valued share. Each section is claimable once, only by the relay it
//! names — the access rule that stands in for per-section encryption.

use std::collections::{BTreeMap, BTreeSet};
use std::error::Error;
use std::fmt;

use crate::geom::{tx_cost, Route};
use crate::shapley::PayoffVector;
use crate::NodeId;

/// A non-negative amount of virtual currency, in micro-credits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct CurrencyAmount(pub u64);

impl fmt::Display for CurrencyAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LedgerError {
    /// `build_purse` needs a strictly positive weight.
    InvalidWeight,
    /// A relay's payoff was zero or negative; it never reaches a purse.
    NonPositivePayoff(NodeId),
    /// The payoff vector does not cover exactly the route's relays.
    PayoffRouteMismatch,
    /// weight × payoff left the range where integer rounding is exact.
    ChargeOverflow,
    CannotAfford {
        sender: NodeId,
        needed: u64,
        available: u64,
    },
    /// The claimant has no section in the purse.
    NotAHop(NodeId),
    /// The claimant's section was already paid out.
    DoubleClaim(NodeId),
    UnknownNode(NodeId),
}

impl fmt::Display for LedgerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LedgerError::InvalidWeight => write!(f, "currency weight must be positive"),
            LedgerError::NonPositivePayoff(id) => {
                write!(f, "relay {id} has a non-positive payoff")
            }
            LedgerError::PayoffRouteMismatch => {
                write!(f, "payoff vector does not match the route's relays")
            }
            LedgerError::ChargeOverflow => write!(f, "purse charge exceeds exact integer range"),
            LedgerError::CannotAfford {
                sender,
                needed,
                available,
            } => write!(
                f,
                "sender {sender} has {available} micro-credits but needs {needed}"
            ),
            LedgerError::NotAHop(id) => write!(f, "node {id} has no section in this purse"),
            LedgerError::DoubleClaim(id) => write!(f, "node {id} already claimed its section"),
            LedgerError::UnknownNode(id) => write!(f, "node {id} has no currency counter"),
        }
    }
}

impl Error for LedgerError {}

/// One hop's slice of the purse: who may claim it, how much, and the hop
/// bookkeeping (previous hop and normalized hop power) the header carries.
#[derive(Debug, Clone, PartialEq)]
pub struct PurseSection {
    pub hop_id: NodeId,
    pub amount: CurrencyAmount,
    pub prev_hop: NodeId,
    pub hop_power: f64,
}

/// The currency a packet carries: the sender's total charge plus one
/// section per paid relay, each claimable at most once.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketPurse {
    sender: NodeId,
    total_charge: CurrencyAmount,
    sections: Vec<PurseSection>,
    claimed: BTreeSet<NodeId>,
}

impl PacketPurse {
    pub fn sender(&self) -> NodeId {
        self.sender
    }

    pub fn total_charge(&self) -> u64 {
        self.total_charge.0
    }

    pub fn sections(&self) -> &[PurseSection] {
        &self.sections
    }

    pub fn claimed(&self) -> &BTreeSet<NodeId> {
        &self.claimed
    }

    pub fn section_for(&self, id: NodeId) -> Option<&PurseSection> {
        self.sections.iter().find(|s| s.hop_id == id)
    }

    /// Total micro-credits still sitting unclaimed in the purse.
    pub fn unclaimed_total(&self) -> u64 {
        self.sections
            .iter()
            .filter(|s| !self.claimed.contains(&s.hop_id))
            .map(|s| s.amount.0)
            .sum()
    }
}

// Above this, f64 can no longer represent every integer and the rounding
// in build_purse would stop being exact.
const EXACT_LIMIT: f64 = 9_007_199_254_740_992.0; // 2^53

/// Builds the purse for a route from its relay payoffs.
///
/// Each relay's real-valued reward is `weight × payoff`. The total charge is
/// that sum rounded to the nearest micro-credit; sections get the floor of
/// their reward plus largest-remainder distribution of the leftover units,
/// ties going to the smaller node id. Sections that round to zero are
/// omitted — a purse never carries empty sections.
pub fn build_purse(
    payoffs: &PayoffVector,
    route: &Route,
    weight: u64,
) -> Result<PacketPurse, LedgerError> {
    if weight == 0 {
        return Err(LedgerError::InvalidWeight);
    }
    let relays = route.relays();
    if payoffs.shares.len() != relays.len()
        || !relays.iter().all(|id| payoffs.shares.contains_key(id))
    {
        return Err(LedgerError::PayoffRouteMismatch);
    }
    for (&id, &phi) in &payoffs.shares {
        if phi.is_nan() || phi <= 0.0 {
            return Err(LedgerError::NonPositivePayoff(id));
        }
    }

    let w = weight as f64;
    let total_raw = w * payoffs.grand_value;
    if !total_raw.is_finite() || total_raw >= EXACT_LIMIT {
        return Err(LedgerError::ChargeOverflow);
    }
    let total_charge = total_raw.round().max(0.0) as u64;

    // Floor every share, then hand out the leftover units by largest
    // fractional remainder (smaller node id wins ties).
    let mut floors = Vec::with_capacity(relays.len());
    let mut remainders = Vec::with_capacity(relays.len());
    for &id in relays {
        let raw = w * payoffs.shares[&id];
        if !raw.is_finite() || raw >= EXACT_LIMIT {
            return Err(LedgerError::ChargeOverflow);
        }
        let floor = raw.floor();
        floors.push(floor as u64);
        remainders.push((id, raw - floor));
    }
    let floor_sum: u64 = floors.iter().sum();
    assert!(
        total_charge >= floor_sum,
        "rounded total fell below the floored shares"
    );
    let leftover = total_charge - floor_sum;
    assert!(
        leftover as usize <= relays.len(),
        "more leftover units than sections"
    );
    let mut order: Vec<usize> = (0..relays.len()).collect();
    order.sort_by(|&a, &b| {
        remainders[b]
            .1
            .total_cmp(&remainders[a].1)
            .then(remainders[a].0.cmp(&remainders[b].0))
    });
    let mut amounts = floors;
    for &idx in order.iter().take(leftover as usize) {
        amounts[idx] += 1;
    }

    let d_ref = route.direct_distance();
    let seq = route.node_sequence();
    let sections = relays
        .iter()
        .enumerate()
        .filter(|&(i, _)| amounts[i] > 0)
        .map(|(i, &id)| {
            let prev_hop = seq[i];
            let hop_power =
                tx_cost(route.hop_distance(prev_hop, id), d_ref).expect("route has positive span");
            PurseSection {
                hop_id: id,
                amount: CurrencyAmount(amounts[i]),
                prev_hop,
                hop_power,
            }
        })
        .collect();

    Ok(PacketPurse {
        sender: route.sender(),
        total_charge: CurrencyAmount(total_charge),
        sections,
        claimed: BTreeSet::new(),
    })
}

/// Per-node currency counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Ledger {
    counters: BTreeMap<NodeId, CurrencyAmount>,
}

impl Ledger {
    /// Endows every listed node with the same starting balance.
    pub fn new(nodes: impl IntoIterator<Item = NodeId>, initial: u64) -> Self {
        Ledger {
            counters: nodes
                .into_iter()
                .map(|id| (id, CurrencyAmount(initial)))
                .collect(),
        }
    }

    pub fn balance(&self, id: NodeId) -> Option<u64> {
        self.counters.get(&id).map(|c| c.0)
    }

    pub fn counters(&self) -> &BTreeMap<NodeId, CurrencyAmount> {
        &self.counters
    }

    /// Sum of all counters; in-flight purses are not included.
    pub fn total(&self) -> u64 {
        self.counters.values().map(|c| c.0).sum()
    }

    /// Charges the purse's sender its full amount.
    pub fn debit_sender(&mut self, purse: &PacketPurse) -> Result<(), LedgerError> {
        let sender = purse.sender;
        let balance = self
            .counters
            .get_mut(&sender)
            .ok_or(LedgerError::UnknownNode(sender))?;
        if balance.0 < purse.total_charge.0 {
            return Err(LedgerError::CannotAfford {
                sender,
                needed: purse.total_charge.0,
                available: balance.0,
            });
        }
        balance.0 -= purse.total_charge.0;
        Ok(())
    }

    /// Pays `claimant` its own section, once. A node can never be credited
    /// from a section naming a different hop.
    pub fn claim_section(
        &mut self,
        purse: &mut PacketPurse,
        claimant: NodeId,
    ) -> Result<u64, LedgerError> {
        let section = purse
            .sections
            .iter()
            .find(|s| s.hop_id == claimant)
            .ok_or(LedgerError::NotAHop(claimant))?;
        if purse.claimed.contains(&claimant) {
            return Err(LedgerError::DoubleClaim(claimant));
        }
        let amount = section.amount.0;
        let balance = self
            .counters
            .get_mut(&claimant)
            .ok_or(LedgerError::UnknownNode(claimant))?;
        balance.0 += amount;
        purse.claimed.insert(claimant);
        Ok(amount)
    }

    /// Returns every unclaimed section's amount to the sender and closes
    /// those sections. Used when a packet aborts before full settlement.
    pub fn refund_unclaimed(&mut self, purse: &mut PacketPurse) -> Result<u64, LedgerError> {
        let refund = purse.unclaimed_total();
        let balance = self
            .counters
            .get_mut(&purse.sender)
            .ok_or(LedgerError::UnknownNode(purse.sender))?;
        balance.0 += refund;
        for s in &purse.sections {
            purse.claimed.insert(s.hop_id);
        }
        Ok(refund)
    }

    /// Removes `amount` from a node's counter. Used for flat-rate payments
    /// that do not go through a purse.
    pub fn debit(&mut self, id: NodeId, amount: u64) -> Result<(), LedgerError> {
        let balance = self
            .counters
            .get_mut(&id)
            .ok_or(LedgerError::UnknownNode(id))?;
        if balance.0 < amount {
            return Err(LedgerError::CannotAfford {
                sender: id,
                needed: amount,
                available: balance.0,
            });
        }
        balance.0 -= amount;
        Ok(())
    }

    /// Adds `amount` to a node's counter.
    pub fn credit(&mut self, id: NodeId, amount: u64) -> Result<(), LedgerError> {
        let balance = self
            .counters
            .get_mut(&id)
            .ok_or(LedgerError::UnknownNode(id))?;
        balance.0 += amount;
        Ok(())
    }

    /// Counters as `node_id,micro_credits` CSV.
    pub fn snapshot_csv(&self) -> String {
        let mut out = String::from("node_id,micro_credits\n");
        for (id, amount) in &self.counters {
            out.push_str(&format!("{id},{amount}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Position;
    use crate::shapley::{shapley, CoalitionValueVariant};

    fn thirds_route() -> Route {
        let positions = [
            (NodeId(0), Position::new(0.0, 0.0)),
            (NodeId(1), Position::new(100.0, 0.0)),
            (NodeId(2), Position::new(200.0, 0.0)),
            (NodeId(3), Position::new(300.0, 0.0)),
        ]
        .into_iter()
        .collect();
        Route::new(NodeId(0), NodeId(3), vec![NodeId(1), NodeId(2)], positions).unwrap()
    }

    fn midpoint_route() -> Route {
        let positions = [
            (NodeId(0), Position::new(0.0, 0.0)),
            (NodeId(1), Position::new(100.0, 0.0)),
            (NodeId(2), Position::new(200.0, 0.0)),
        ]
        .into_iter()
        .collect();
        Route::new(NodeId(0), NodeId(2), vec![NodeId(1)], positions).unwrap()
    }

    #[test]
    fn thirds_purse_rounding() {
        let route = thirds_route();
        let payoffs = shapley(&route, CoalitionValueVariant::Saved).unwrap();
        let purse = build_purse(&payoffs, &route, 1000).unwrap();
        assert_eq!(purse.total_charge(), 963);
        let amounts: Vec<u64> = purse.sections().iter().map(|s| s.amount.0).collect();
        // Equal remainders: the extra unit goes to the smaller node id.
        assert_eq!(amounts, vec![482, 481]);
        assert_eq!(purse.sections()[0].hop_id, NodeId(1));
        assert_eq!(purse.sections()[0].prev_hop, NodeId(0));
        assert_eq!(purse.sections()[1].prev_hop, NodeId(1));
    }

    #[test]
    fn midpoint_purse() {
        let route = midpoint_route();
        let payoffs = shapley(&route, CoalitionValueVariant::Saved).unwrap();
        let purse = build_purse(&payoffs, &route, 1000).unwrap();
        assert_eq!(purse.total_charge(), 875);
        assert_eq!(purse.sections().len(), 1);
        assert_eq!(purse.sections()[0].amount, CurrencyAmount(875));
        // Midpoint hop costs (1/2)^4 of the direct transmission.
        assert!((purse.sections()[0].hop_power - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_rejected() {
        let route = midpoint_route();
        let payoffs = shapley(&route, CoalitionValueVariant::Saved).unwrap();
        assert_eq!(
            build_purse(&payoffs, &route, 0),
            Err(LedgerError::InvalidWeight)
        );
    }

    #[test]
    fn non_positive_payoff_rejected() {
        let route = midpoint_route();
        let mut payoffs = shapley(&route, CoalitionValueVariant::Saved).unwrap();
        payoffs.shares.insert(NodeId(1), 0.0);
        assert_eq!(
            build_purse(&payoffs, &route, 1000),
            Err(LedgerError::NonPositivePayoff(NodeId(1)))
        );
    }

    #[test]
    fn mismatched_payoffs_rejected() {
        let route = thirds_route();
        let payoffs = shapley(&midpoint_route(), CoalitionValueVariant::Saved).unwrap();
        assert_eq!(
            build_purse(&payoffs, &route, 1000),
            Err(LedgerError::PayoffRouteMismatch)
        );
    }

    #[test]
    fn debit_and_claims() {
        let route = thirds_route();
        let payoffs = shapley(&route, CoalitionValueVariant::Saved).unwrap();
        let mut purse = build_purse(&payoffs, &route, 1000).unwrap();
        let ids = (0..4).map(NodeId);
        let mut ledger = Ledger::new(ids, 10_000);

        ledger.debit_sender(&purse).unwrap();
        assert_eq!(ledger.balance(NodeId(0)), Some(9_037));

        assert_eq!(ledger.claim_section(&mut purse, NodeId(1)).unwrap(), 482);
        assert_eq!(ledger.balance(NodeId(1)), Some(10_482));

        // Claiming twice or claiming someone else's section fails.
        assert_eq!(
            ledger.claim_section(&mut purse, NodeId(1)),
            Err(LedgerError::DoubleClaim(NodeId(1)))
        );
        assert_eq!(
            ledger.claim_section(&mut purse, NodeId(3)),
            Err(LedgerError::NotAHop(NodeId(3)))
        );

        assert_eq!(ledger.claim_section(&mut purse, NodeId(2)).unwrap(), 481);
        assert_eq!(purse.unclaimed_total(), 0);

        // Fully settled: total currency unchanged.
        assert_eq!(ledger.total(), 40_000);
    }

    #[test]
    fn cannot_afford() {
        let route = thirds_route();
        let payoffs = shapley(&route, CoalitionValueVariant::Saved).unwrap();
        let purse = build_purse(&payoffs, &route, 1000).unwrap();
        let mut ledger = Ledger::new((0..4).map(NodeId), 500);
        let err = ledger.debit_sender(&purse).unwrap_err();
        assert_eq!(
            err,
            LedgerError::CannotAfford {
                sender: NodeId(0),
                needed: 963,
                available: 500
            }
        );
        // A failed debit moves nothing.
        assert_eq!(ledger.total(), 2_000);
    }

    #[test]
    fn refund_returns_everything_unclaimed() {
        let route = thirds_route();
        let payoffs = shapley(&route, CoalitionValueVariant::Saved).unwrap();
        let mut purse = build_purse(&payoffs, &route, 1000).unwrap();
        let mut ledger = Ledger::new((0..4).map(NodeId), 10_000);

        ledger.debit_sender(&purse).unwrap();
        ledger.claim_section(&mut purse, NodeId(1)).unwrap();
        let refunded = ledger.refund_unclaimed(&mut purse).unwrap();
        assert_eq!(refunded, 481);
        assert_eq!(ledger.balance(NodeId(0)), Some(9_037 + 481));
        assert_eq!(ledger.total(), 40_000);

        // Refunded sections cannot be claimed afterwards.
        assert_eq!(
            ledger.claim_section(&mut purse, NodeId(2)),
            Err(LedgerError::DoubleClaim(NodeId(2)))
        );
    }

    #[test]
    fn largest_remainder_is_exact_and_fair() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let n = rng.gen_range(1..=6usize);
            let mut positions = BTreeMap::new();
            positions.insert(NodeId(0), Position::new(0.0, 0.0));
            positions.insert(NodeId(100), Position::new(1000.0, 0.0));
            let relays: Vec<NodeId> = (1..=n as u32)
                .map(|i| {
                    positions.insert(
                        NodeId(i),
                        Position::new(rng.gen_range(1.0..999.0), rng.gen_range(0.0..500.0)),
                    );
                    NodeId(i)
                })
                .collect();
            let route = Route::new(NodeId(0), NodeId(100), relays.clone(), positions).unwrap();
            let shares: BTreeMap<NodeId, f64> = relays
                .iter()
                .map(|&id| (id, rng.gen_range(0.0001..2.0)))
                .collect();
            let grand_value = shares.values().sum();
            let payoffs = PayoffVector {
                shares,
                grand_value,
            };
            let weight = rng.gen_range(1..=10_000u64);
            let purse = build_purse(&payoffs, &route, weight).unwrap();

            let section_sum: u64 = purse.sections().iter().map(|s| s.amount.0).sum();
            assert_eq!(section_sum, purse.total_charge());
            for &id in &relays {
                let raw = weight as f64 * payoffs.shares[&id];
                let amount = purse.section_for(id).map_or(0, |s| s.amount.0);
                assert!(
                    (amount as f64 - raw).abs() < 1.0,
                    "section for {id} drifted a full unit from {raw}"
                );
            }
        }
    }

    #[test]
    fn snapshot_csv_format() {
        let ledger = Ledger::new([NodeId(0), NodeId(2)], 7);
        assert_eq!(ledger.snapshot_csv(), "node_id,micro_credits\n0,7\n2,7\n");
    }
}
