//! Deterministic tick simulation: coin-toss traffic, route pricing and
//! settlement, energy accounting, and node death.
//!
//! Each tick, every alive node flips a Bernoulli coin (ascending id order)
//! and on success sends one packet to a uniformly chosen alive destination.
//! In `faster` mode the sender prices the route's relays with their Shapley
//! payoffs, carries the charge in a packet purse, and settles it hop by hop;
//! in `baseline` mode every relay is paid the same flat rate and refuses to
//! forward once its battery runs low. All failures become drop counters —
//! the run never aborts.
//!
//! Energy model: transmitting costs `p_tx · tick_seconds` joules (optionally
//! scaled by `(d_hop/comm_range)^4`), receiving costs `p_rx · tick_seconds`,
//! and every alive node pays `p_idle · tick_seconds` each tick. A node whose
//! battery reaches zero is dead from that moment on: it never transmits,
//! receives, relays, or earns again.
//!
//! Failure costs are asymmetric by protocol design. The incentive scheme's
//! header carries the power and previous-hop information the sender needs to
//! price a route before transmitting, so its failed sends (no route, guard
//! rejection, unaffordable charge) cost nothing. The baseline discovers a
//! relay's refusal only in flight: a refused attempt consumes the route's
//! radio energy and delivers nothing.

use std::collections::BTreeMap;
use std::error::Error;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geom::{relay_acceptable, Route};
use crate::ledger::{build_purse, Ledger, LedgerError, PacketPurse};
use crate::shapley::{
    shapley_with_cap, CoalitionValueVariant, ShapleyError, DEFAULT_MAX_EXACT_RELAYS,
};
use crate::topology::{find_route, generate_topology, RoutePolicy, Topology};
use crate::NodeId;

/// Payment scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Shapley-valued payoffs carried in a packet purse.
    Faster,
    /// Flat pay per relay, with low-battery refusal.
    Baseline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Faster => write!(f, "faster"),
            Mode::Baseline => write!(f, "baseline"),
        }
    }
}

/// Everything a run depends on. `Default` gives the reference setup:
/// 20 nodes on a 500 m × 500 m area with 250 m radios, 100 J batteries,
/// 1.4 W / 1.0 W / 0.83 W transmit / receive / idle power, one-second
/// ticks, and a 0.1 per-tick send probability.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_nodes: u32,
    pub area: (f64, f64),
    pub comm_range: f64,
    pub ticks: u64,
    pub p_send: f64,
    pub mode: Mode,
    pub variant: CoalitionValueVariant,
    pub epsilon_min: f64,
    pub currency_weight: u64,
    pub initial_richness: u64,
    pub initial_energy: f64,
    pub p_tx: f64,
    pub p_rx: f64,
    pub p_idle: f64,
    pub tick_seconds: f64,
    pub baseline_flat_pay: u64,
    pub baseline_refusal_threshold: f64,
    pub routing_policy: RoutePolicy,
    pub distance_scaled_tx: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_nodes: 20,
            area: (500.0, 500.0),
            comm_range: 250.0,
            ticks: 200,
            p_send: 0.1,
            mode: Mode::Faster,
            variant: CoalitionValueVariant::Saved,
            epsilon_min: 0.0,
            currency_weight: 1000,
            initial_richness: 10_000,
            initial_energy: 100.0,
            p_tx: 1.4,
            p_rx: 1.0,
            p_idle: 0.83,
            tick_seconds: 1.0,
            baseline_flat_pay: 500,
            baseline_refusal_threshold: 0.2,
            routing_policy: RoutePolicy::MinEnergy,
            distance_scaled_tx: false,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvalidConfig {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for InvalidConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid {}: {}", self.field, self.message)
    }
}

impl Error for InvalidConfig {}

fn bad(field: &'static str, message: impl Into<String>) -> InvalidConfig {
    InvalidConfig {
        field,
        message: message.into(),
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), InvalidConfig> {
        if self.n_nodes < 2 {
            return Err(bad("n_nodes", "need at least 2 nodes"));
        }
        if !self.area.0.is_finite()
            || !self.area.1.is_finite()
            || self.area.0 <= 0.0
            || self.area.1 <= 0.0
        {
            return Err(bad("area", "dimensions must be positive and finite"));
        }
        if !self.comm_range.is_finite() || self.comm_range <= 0.0 {
            return Err(bad("comm_range", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.p_send) {
            return Err(bad("p_send", "probability must be within [0, 1]"));
        }
        if !self.epsilon_min.is_finite() || self.epsilon_min < 0.0 {
            return Err(bad("epsilon_min", "must be non-negative"));
        }
        if self.currency_weight == 0 {
            return Err(bad("currency_weight", "must be positive"));
        }
        if !self.initial_energy.is_finite() || self.initial_energy <= 0.0 {
            return Err(bad("initial_energy", "must be positive"));
        }
        for (field, value) in [
            ("p_tx", self.p_tx),
            ("p_rx", self.p_rx),
            ("p_idle", self.p_idle),
            ("tick_seconds", self.tick_seconds),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(bad(field, "must be positive"));
            }
        }
        if self.baseline_refusal_threshold.is_nan()
            || self.baseline_refusal_threshold <= 0.0
            || self.baseline_refusal_threshold >= 1.0
        {
            return Err(bad(
                "baseline_refusal_threshold",
                "must lie strictly between 0 and 1",
            ));
        }
        Ok(())
    }
}

/// Why a send attempt failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    NoRoute,
    CannotAfford,
    RelayRefused,
    NegativePayoff,
    NodeDied,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DropReason::NoRoute => "no-route",
            DropReason::CannotAfford => "cannot-afford",
            DropReason::RelayRefused => "relay-refused",
            DropReason::NegativePayoff => "negative-payoff",
            DropReason::NodeDied => "node-died",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketOutcome {
    Delivered,
    Dropped(DropReason),
}

impl fmt::Display for PacketOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PacketOutcome::Delivered => write!(f, "delivered"),
            PacketOutcome::Dropped(r) => write!(f, "{r}"),
        }
    }
}

impl From<DropReason> for PacketOutcome {
    fn from(reason: DropReason) -> Self {
        PacketOutcome::Dropped(reason)
    }
}

/// One send attempt, as logged for replay audits.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub tick: u64,
    pub sender: NodeId,
    pub destination: NodeId,
    /// Full node sequence of the route used, empty when none was found.
    pub path: Vec<NodeId>,
    pub outcome: PacketOutcome,
    /// Micro-credits actually debited from the sender (0 for drops).
    pub charge: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropCounts {
    pub no_route: u64,
    pub cannot_afford: u64,
    pub relay_refused: u64,
    pub negative_payoff: u64,
    pub node_died: u64,
}

impl DropCounts {
    pub fn total(&self) -> u64 {
        self.no_route
            + self.cannot_afford
            + self.relay_refused
            + self.negative_payoff
            + self.node_died
    }

    fn bump(&mut self, reason: DropReason) {
        match reason {
            DropReason::NoRoute => self.no_route += 1,
            DropReason::CannotAfford => self.cannot_afford += 1,
            DropReason::RelayRefused => self.relay_refused += 1,
            DropReason::NegativePayoff => self.negative_payoff += 1,
            DropReason::NodeDied => self.node_died += 1,
        }
    }
}

/// Per-node metrics snapshot, one per node per recorded tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesRow {
    pub tick: u64,
    pub node_id: NodeId,
    pub battery: f64,
    pub richness: u64,
    pub alive: bool,
}

/// A node's live state as seen by the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: NodeId,
    pub position: crate::geom::Position,
    pub battery: f64,
    pub richness: u64,
    pub alive: bool,
}

/// Everything a finished run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub config: SimConfig,
    pub time_series: Vec<TimeSeriesRow>,
    /// Tick during which each node died; `None` for survivors.
    pub death_tick: BTreeMap<NodeId, Option<u64>>,
    pub sent: u64,
    pub delivered: u64,
    pub drops: DropCounts,
    pub packets: Vec<PacketRecord>,
}

impl SimResult {
    pub fn dropped(&self) -> u64 {
        self.drops.total()
    }
}

/// Outcome of pricing a route's relays before any currency moves.
#[derive(Debug, Clone, PartialEq)]
pub enum RoutePricing {
    /// Relay-free route; nothing to price.
    Direct,
    /// All guards passed; the purse is ready to fund.
    Relayed(PacketPurse),
    /// The relayed path does not strictly beat the saving margin.
    NotSaving,
    /// Some relay's Shapley payoff was zero or negative.
    NonPositivePayoff,
    /// Too many relays for the exact Shapley computation.
    TooManyRelays,
}

/// Prices a route: the saving guard runs first, so no purse is ever built
/// for a route whose saving does not strictly exceed `epsilon_min`.
pub fn price_route(
    route: &Route,
    variant: CoalitionValueVariant,
    epsilon_min: f64,
    weight: u64,
    max_relays: usize,
) -> Result<RoutePricing, LedgerError> {
    if route.relays().is_empty() {
        return Ok(RoutePricing::Direct);
    }
    if !relay_acceptable(route, epsilon_min) {
        return Ok(RoutePricing::NotSaving);
    }
    let payoffs = match shapley_with_cap(route, variant, max_relays) {
        Ok(p) => p,
        Err(ShapleyError::CoalitionTooLarge { .. }) => return Ok(RoutePricing::TooManyRelays),
        Err(e) => unreachable!("route-derived coalition cannot fail otherwise: {e}"),
    };
    let min_share = payoffs.min_share();
    if min_share.is_nan() || min_share <= 0.0 {
        return Ok(RoutePricing::NonPositivePayoff);
    }
    let purse = build_purse(&payoffs, route, weight)?;
    Ok(RoutePricing::Relayed(purse))
}

struct NodeBody {
    battery: f64,
    alive: bool,
    death_tick: Option<u64>,
}

/// A single in-progress simulation. Strictly single-threaded and
/// deterministic given its config; independent instances share nothing.
pub struct Simulation {
    config: SimConfig,
    topology: Topology,
    bodies: BTreeMap<NodeId, NodeBody>,
    ledger: Ledger,
    rng: ChaCha8Rng,
    tick: u64,
    sent: u64,
    delivered: u64,
    drops: DropCounts,
    packets: Vec<PacketRecord>,
    time_series: Vec<TimeSeriesRow>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, InvalidConfig> {
        config.validate()?;
        let topology =
            generate_topology(config.n_nodes, config.area, config.comm_range, config.seed);
        Ok(Simulation::with_topology(config, topology))
    }

    /// Starts a simulation on a caller-supplied topology instead of a
    /// generated one. The config's placement parameters are ignored.
    /// Panics on an invalid config; use [`Simulation::new`] for a `Result`.
    pub fn with_topology(config: SimConfig, topology: Topology) -> Self {
        if let Err(e) = config.validate() {
            panic!("{e}");
        }
        let ids: Vec<NodeId> = topology.nodes().keys().copied().collect();
        let bodies = ids
            .iter()
            .map(|&id| {
                (
                    id,
                    NodeBody {
                        battery: config.initial_energy,
                        alive: true,
                        death_tick: None,
                    },
                )
            })
            .collect();
        let ledger = Ledger::new(ids, config.initial_richness);
        // Stream 0 seeds node placement; stream 1 drives traffic.
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        let mut sim = Simulation {
            config,
            topology,
            bodies,
            ledger,
            rng,
            tick: 0,
            sent: 0,
            delivered: 0,
            drops: DropCounts::default(),
            packets: Vec::new(),
            time_series: Vec::new(),
        };
        sim.snapshot();
        sim
    }

    /// Runs a fresh simulation for the configured number of ticks.
    pub fn run(config: SimConfig) -> Result<SimResult, InvalidConfig> {
        let mut sim = Simulation::new(config)?;
        for _ in 0..sim.config.ticks {
            sim.step();
        }
        Ok(sim.into_result())
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn current_tick(&self) -> u64 {
        self.tick
    }

    pub fn node_state(&self, id: NodeId) -> Option<NodeState> {
        let body = self.bodies.get(&id)?;
        Some(NodeState {
            id,
            position: self.topology.position(id)?,
            battery: body.battery,
            richness: self.ledger.balance(id)?,
            alive: body.alive,
        })
    }

    fn alive_ids(&self) -> std::collections::BTreeSet<NodeId> {
        self.bodies
            .iter()
            .filter(|(_, b)| b.alive)
            .map(|(&id, _)| id)
            .collect()
    }

    fn is_alive(&self, id: NodeId) -> bool {
        self.bodies.get(&id).is_some_and(|b| b.alive)
    }

    /// Battery drain; a node hitting zero is dead from that instant.
    fn drain(&mut self, id: NodeId, joules: f64) {
        let tick = self.tick;
        let body = self.bodies.get_mut(&id).expect("known node");
        if !body.alive {
            return;
        }
        body.battery = (body.battery - joules).max(0.0);
        if body.battery == 0.0 {
            body.alive = false;
            body.death_tick = Some(tick);
        }
    }

    fn tx_energy(&self, hop_distance: f64) -> f64 {
        let base = self.config.p_tx * self.config.tick_seconds;
        if self.config.distance_scaled_tx {
            base * (hop_distance / self.config.comm_range).powi(4)
        } else {
            base
        }
    }

    fn rx_energy(&self) -> f64 {
        self.config.p_rx * self.config.tick_seconds
    }

    /// Charges tx/rx energy along the first `hop_count` hops of the route.
    fn charge_hops(&mut self, route: &Route, hop_count: usize) {
        for &(from, to) in route.hops().iter().take(hop_count) {
            let tx = self.tx_energy(route.hop_distance(from, to));
            self.drain(from, tx);
            self.drain(to, self.rx_energy());
        }
    }

    fn deliver(&mut self, route: &Route) {
        let hops = route.hops().len();
        self.charge_hops(route, hops);
        self.delivered += 1;
    }

    fn direct_route(&self, sender: NodeId, destination: NodeId) -> Option<Route> {
        if !self.topology.in_range(sender, destination) {
            return None;
        }
        let positions = [sender, destination]
            .into_iter()
            .filter_map(|id| Some((id, self.topology.position(id)?)))
            .collect();
        Route::direct(sender, destination, positions).ok()
    }

    /// Sends one packet, settling currency and energy. Every failure is a
    /// drop reason; the attempt is recorded in the packet log either way.
    pub fn send_packet(&mut self, sender: NodeId, destination: NodeId) -> PacketOutcome {
        debug_assert!(self.is_alive(sender) && self.is_alive(destination));
        self.sent += 1;
        let alive = self.alive_ids();
        let route = find_route(
            &self.topology,
            sender,
            destination,
            self.config.routing_policy,
            &alive,
        )
        .expect("sim nodes are known to the topology");
        let Some(route) = route else {
            return self.record(
                sender,
                destination,
                Vec::new(),
                0,
                DropReason::NoRoute.into(),
            );
        };
        match self.config.mode {
            Mode::Faster => self.send_faster(&route),
            Mode::Baseline => self.send_baseline(&route),
        }
    }

    fn record(
        &mut self,
        sender: NodeId,
        destination: NodeId,
        path: Vec<NodeId>,
        charge: u64,
        outcome: PacketOutcome,
    ) -> PacketOutcome {
        if let PacketOutcome::Dropped(reason) = outcome {
            self.drops.bump(reason);
        }
        self.packets.push(PacketRecord {
            tick: self.tick,
            sender,
            destination,
            path,
            outcome,
            charge,
        });
        outcome
    }

    /// Relayed send failed a guard: try the direct link, else drop.
    fn fall_back_direct(&mut self, route: &Route, reason: DropReason) -> PacketOutcome {
        let (sender, destination) = (route.sender(), route.destination());
        match self.direct_route(sender, destination) {
            Some(direct) => {
                self.deliver(&direct);
                self.record(
                    sender,
                    destination,
                    direct.node_sequence(),
                    0,
                    PacketOutcome::Delivered,
                )
            }
            None => self.record(sender, destination, route.node_sequence(), 0, reason.into()),
        }
    }

    fn send_faster(&mut self, route: &Route) -> PacketOutcome {
        let (sender, destination) = (route.sender(), route.destination());
        let pricing = price_route(
            route,
            self.config.variant,
            self.config.epsilon_min,
            self.config.currency_weight,
            DEFAULT_MAX_EXACT_RELAYS,
        );
        match pricing {
            Ok(RoutePricing::Direct) => {
                // Relay-free: no currency moves at all.
                self.deliver(route);
                self.record(
                    sender,
                    destination,
                    route.node_sequence(),
                    0,
                    PacketOutcome::Delivered,
                )
            }
            Ok(RoutePricing::Relayed(mut purse)) => {
                if let Err(LedgerError::CannotAfford { .. }) = self.ledger.debit_sender(&purse) {
                    return self.record(
                        sender,
                        destination,
                        route.node_sequence(),
                        0,
                        DropReason::CannotAfford.into(),
                    );
                }
                let charge = purse.total_charge();
                // Relays claim in path order; relays whose share rounded to
                // zero have no section and simply forward.
                for &relay in route.relays() {
                    if purse.section_for(relay).is_some() {
                        self.ledger
                            .claim_section(&mut purse, relay)
                            .expect("each relay claims its own section once");
                    }
                }
                debug_assert_eq!(purse.unclaimed_total(), 0);
                self.deliver(route);
                self.record(
                    sender,
                    destination,
                    route.node_sequence(),
                    charge,
                    PacketOutcome::Delivered,
                )
            }
            // Relays would refuse a route that saves nothing, and a route too
            // long to price exactly can never be paid fairly.
            Ok(RoutePricing::NotSaving) | Ok(RoutePricing::TooManyRelays) => {
                self.fall_back_direct(route, DropReason::RelayRefused)
            }
            Ok(RoutePricing::NonPositivePayoff) => {
                self.fall_back_direct(route, DropReason::NegativePayoff)
            }
            Err(_) => {
                // Pricing overflowed; the route cannot be paid for.
                self.record(
                    sender,
                    destination,
                    route.node_sequence(),
                    0,
                    DropReason::NegativePayoff.into(),
                )
            }
        }
    }

    fn send_baseline(&mut self, route: &Route) -> PacketOutcome {
        let (sender, destination) = (route.sender(), route.destination());
        let relays = route.relays().to_vec();
        if relays.is_empty() {
            self.deliver(route);
            return self.record(
                sender,
                destination,
                route.node_sequence(),
                0,
                PacketOutcome::Delivered,
            );
        }
        // A relay accepts only while its battery fraction strictly exceeds
        // the refusal threshold (evaluated against pre-send state).
        let refuser = relays.iter().any(|&r| {
            let fraction = self.bodies[&r].battery / self.config.initial_energy;
            fraction <= self.config.baseline_refusal_threshold
        });
        if refuser {
            // A refused attempt still consumes the route's radio energy: the
            // baseline has no pre-send header computation, so the failure is
            // only discovered in flight and the attempt is wasted. Refusal
            // suppresses delivery and payment, not the cost of the attempt.
            let hops = route.hops().len();
            self.charge_hops(route, hops);
            return self.record(
                sender,
                destination,
                route.node_sequence(),
                0,
                DropReason::RelayRefused.into(),
            );
        }
        let pay_each = self.config.baseline_flat_pay;
        let total = pay_each * relays.len() as u64;
        let balance = self.ledger.balance(sender).expect("sender has a counter");
        if balance < total {
            return self.record(
                sender,
                destination,
                route.node_sequence(),
                0,
                DropReason::CannotAfford.into(),
            );
        }
        self.ledger.debit(sender, total).expect("balance checked");
        for &r in &relays {
            self.ledger
                .credit(r, pay_each)
                .expect("relay has a counter");
        }
        self.deliver(route);
        self.record(
            sender,
            destination,
            route.node_sequence(),
            total,
            PacketOutcome::Delivered,
        )
    }

    /// Advances the simulation one tick.
    pub fn step(&mut self) {
        self.tick += 1;
        let ids: Vec<NodeId> = self.bodies.keys().copied().collect();
        for &id in &ids {
            if !self.is_alive(id) {
                continue;
            }
            if !self.rng.gen_bool(self.config.p_send) {
                continue;
            }
            let candidates: Vec<NodeId> =
                self.alive_ids().into_iter().filter(|&c| c != id).collect();
            if candidates.is_empty() {
                // The would-be destination pool has died out entirely.
                self.sent += 1;
                self.record(id, id, Vec::new(), 0, DropReason::NodeDied.into());
                continue;
            }
            let destination = candidates[self.rng.gen_range(0..candidates.len())];
            self.send_packet(id, destination);
        }
        // Idle drain for everyone still alive, then the snapshot.
        for &id in &ids {
            if self.is_alive(id) {
                self.drain(id, self.config.p_idle * self.config.tick_seconds);
            }
        }
        self.snapshot();
    }

    fn snapshot(&mut self) {
        let tick = self.tick;
        for (&id, body) in &self.bodies {
            self.time_series.push(TimeSeriesRow {
                tick,
                node_id: id,
                battery: body.battery,
                richness: self.ledger.balance(id).expect("every node has a counter"),
                alive: body.alive,
            });
        }
    }

    pub fn into_result(self) -> SimResult {
        let death_tick = self
            .bodies
            .iter()
            .map(|(&id, b)| (id, b.death_tick))
            .collect();
        SimResult {
            config: self.config,
            time_series: self.time_series,
            death_tick,
            sent: self.sent,
            delivered: self.delivered,
            drops: self.drops,
            packets: self.packets,
        }
    }
}
