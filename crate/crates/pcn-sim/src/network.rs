//! Channel graph with directed balances and atomic payment application.
//!
//! A channel between `u` and `v` holds two directed balances whose sum (the
//! total capacity) never changes; payments shift value from one direction to
//! the other. Internally each channel stores its capacity and the balance of
//! the canonical (lower id -> higher id) direction, so capacity conservation
//! is exact by construction rather than subject to floating-point drift.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Dense node index. Ids are contiguous `0..node_count` within one network.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of a channel inside one [`PaymentNetwork`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct ChannelId(pub u32);

impl ChannelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("node {0} out of range, network has {1} nodes")]
    UnknownNode(NodeId, u32),
    #[error("no channel between {0} and {1}")]
    MissingChannel(NodeId, NodeId),
    #[error("channel between {0} and {1} already exists")]
    DuplicateChannel(NodeId, NodeId),
    #[error("node {0} cannot open a channel with itself")]
    SelfChannel(NodeId),
    #[error("initial balances {0} / {1} must be non-negative with positive sum")]
    InvalidInitialBalances(f64, f64),
    #[error("transfer amount must be positive and finite, got {0}")]
    InvalidAmount(f64),
    #[error("insufficient balance from {from} to {to}: need {required}, have {available}")]
    InsufficientBalance {
        from: NodeId,
        to: NodeId,
        required: f64,
        available: f64,
    },
    #[error("reference point {0} outside [0, {1}]")]
    ReferenceOutOfRange(f64, f64),
}

/// First hop of a payment that could not forward its load; the whole payment
/// rolls back, so the pre-call network state is preserved bit for bit.
#[derive(Debug, Error, PartialEq)]
pub enum PaymentError {
    #[error("path {path} hop {hop}: cannot forward {required} from {from} to {to}, available {available}")]
    InsufficientBalance {
        path: usize,
        hop: usize,
        from: NodeId,
        to: NodeId,
        required: f64,
        available: f64,
    },
    #[error("path {path} hop {hop}: no channel between {from} and {to}")]
    MissingChannel {
        path: usize,
        hop: usize,
        from: NodeId,
        to: NodeId,
    },
    #[error("path {path} hop {hop}: invalid transfer amount {amount}")]
    InvalidAmount { path: usize, hop: usize, amount: f64 },
}

/// Channel state seen from one direction: `balance_out` is spendable toward
/// the neighbor, `balance_in` is the reverse direction, `reference` is the
/// balance the owners consider optimal for the outgoing direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelView {
    pub balance_out: f64,
    pub balance_in: f64,
    pub reference: f64,
}

impl ChannelView {
    pub fn capacity(&self) -> f64 {
        self.balance_out + self.balance_in
    }
}

struct Channel {
    a: NodeId,
    b: NodeId,
    capacity: f64,
    /// Spendable from `a` toward `b`; the reverse balance is `capacity - balance_ab`.
    balance_ab: f64,
    /// Reference point for the `a -> b` direction.
    reference_ab: f64,
}

impl Channel {
    fn balance_from(&self, u: NodeId) -> f64 {
        if u == self.a {
            self.balance_ab
        } else {
            self.capacity - self.balance_ab
        }
    }

    fn reference_from(&self, u: NodeId) -> f64 {
        if u == self.a {
            self.reference_ab
        } else {
            self.capacity - self.reference_ab
        }
    }
}

/// A payment channel network: nodes `0..node_count` plus bidirectional
/// channels. One instance is owned by one simulation loop; routing only
/// reads, payments mutate through the atomic helpers below.
pub struct PaymentNetwork {
    node_count: u32,
    channels: Vec<Channel>,
    adjacency: Vec<Vec<(NodeId, ChannelId)>>,
    pair_index: HashMap<(NodeId, NodeId), ChannelId>,
}

impl PaymentNetwork {
    pub fn new(node_count: u32) -> Self {
        Self {
            node_count,
            channels: Vec::new(),
            adjacency: vec![Vec::new(); node_count as usize],
            pair_index: HashMap::new(),
        }
    }

    pub fn node_count(&self) -> u32 {
        self.node_count
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count).map(NodeId)
    }

    fn check_node(&self, u: NodeId) -> Result<(), NetworkError> {
        if u.0 >= self.node_count {
            return Err(NetworkError::UnknownNode(u, self.node_count));
        }
        Ok(())
    }

    fn canonical(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
        if u <= v {
            (u, v)
        } else {
            (v, u)
        }
    }

    /// Opens a channel funded with `balance_uv` spendable from `u` and
    /// `balance_vu` spendable from `v`. The reference point defaults to half
    /// the total capacity.
    pub fn add_channel(
        &mut self,
        u: NodeId,
        v: NodeId,
        balance_uv: f64,
        balance_vu: f64,
    ) -> Result<ChannelId, NetworkError> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Err(NetworkError::SelfChannel(u));
        }
        let key = Self::canonical(u, v);
        if self.pair_index.contains_key(&key) {
            return Err(NetworkError::DuplicateChannel(u, v));
        }
        let capacity = balance_uv + balance_vu;
        if !(balance_uv >= 0.0) || !(balance_vu >= 0.0) || !(capacity > 0.0) || !capacity.is_finite()
        {
            return Err(NetworkError::InvalidInitialBalances(balance_uv, balance_vu));
        }
        let (a, b) = key;
        let balance_ab = if a == u { balance_uv } else { balance_vu };
        let id = ChannelId(self.channels.len() as u32);
        self.channels.push(Channel {
            a,
            b,
            capacity,
            balance_ab,
            reference_ab: capacity / 2.0,
        });
        for (from, to) in [(u, v), (v, u)] {
            let list = &mut self.adjacency[from.index()];
            let pos = list.partition_point(|(n, _)| *n < to);
            list.insert(pos, (to, id));
        }
        self.pair_index.insert(key, id);
        Ok(id)
    }

    pub fn channel_between(&self, u: NodeId, v: NodeId) -> Option<ChannelId> {
        self.pair_index.get(&Self::canonical(u, v)).copied()
    }

    fn channel(&self, u: NodeId, v: NodeId) -> Result<&Channel, NetworkError> {
        self.channel_between(u, v)
            .map(|id| &self.channels[id.index()])
            .ok_or(NetworkError::MissingChannel(u, v))
    }

    /// Directed balance currently spendable from `u` to `v`.
    pub fn balance(&self, u: NodeId, v: NodeId) -> Result<f64, NetworkError> {
        Ok(self.channel(u, v)?.balance_from(u))
    }

    /// Total capacity of the channel between `u` and `v`. Public information
    /// in the source-routing model, unlike the directed balances.
    pub fn total_capacity(&self, u: NodeId, v: NodeId) -> Result<f64, NetworkError> {
        Ok(self.channel(u, v)?.capacity)
    }

    /// Reference point for the direction `u -> v`.
    pub fn reference(&self, u: NodeId, v: NodeId) -> Result<f64, NetworkError> {
        Ok(self.channel(u, v)?.reference_from(u))
    }

    /// Sets the reference point, expressed as the optimal balance for the
    /// `u -> v` direction.
    pub fn set_reference(&mut self, u: NodeId, v: NodeId, reference: f64) -> Result<(), NetworkError> {
        let id = self
            .channel_between(u, v)
            .ok_or(NetworkError::MissingChannel(u, v))?;
        let channel = &mut self.channels[id.index()];
        if !(0.0..=channel.capacity).contains(&reference) {
            return Err(NetworkError::ReferenceOutOfRange(reference, channel.capacity));
        }
        channel.reference_ab = if channel.a == u {
            reference
        } else {
            channel.capacity - reference
        };
        Ok(())
    }

    /// Channel state as seen when paying from `u` to `v`.
    pub fn view(&self, u: NodeId, v: NodeId) -> Result<ChannelView, NetworkError> {
        let channel = self.channel(u, v)?;
        let balance_out = channel.balance_from(u);
        Ok(ChannelView {
            balance_out,
            balance_in: channel.capacity - balance_out,
            reference: channel.reference_from(u),
        })
    }

    /// Neighbors of `u` with the connecting channel, sorted by neighbor id.
    pub fn neighbors(&self, u: NodeId) -> &[(NodeId, ChannelId)] {
        &self.adjacency[u.index()]
    }

    /// Endpoints of a channel, lower id first.
    pub fn endpoints_of(&self, id: ChannelId) -> (NodeId, NodeId) {
        let channel = &self.channels[id.index()];
        (channel.a, channel.b)
    }

    pub fn capacity_of(&self, id: ChannelId) -> f64 {
        self.channels[id.index()].capacity
    }

    /// Directed balance spendable by `from` on this channel. `from` must be
    /// one of the channel's endpoints.
    pub fn balance_of(&self, id: ChannelId, from: NodeId) -> f64 {
        let channel = &self.channels[id.index()];
        debug_assert!(from == channel.a || from == channel.b);
        channel.balance_from(from)
    }

    /// Channel state as seen when paying out of `from` on this channel.
    pub fn view_of(&self, id: ChannelId, from: NodeId) -> ChannelView {
        let channel = &self.channels[id.index()];
        debug_assert!(from == channel.a || from == channel.b);
        let balance_out = channel.balance_from(from);
        ChannelView {
            balance_out,
            balance_in: channel.capacity - balance_out,
            reference: channel.reference_from(from),
        }
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adjacency[u.index()].len()
    }

    /// Moves `amount` from the `u -> v` balance to the `v -> u` balance.
    pub fn apply_transfer(&mut self, u: NodeId, v: NodeId, amount: f64) -> Result<(), NetworkError> {
        if !(amount > 0.0) || !amount.is_finite() {
            return Err(NetworkError::InvalidAmount(amount));
        }
        let id = self
            .channel_between(u, v)
            .ok_or(NetworkError::MissingChannel(u, v))?;
        let channel = &mut self.channels[id.index()];
        let available = channel.balance_from(u);
        if amount > available {
            return Err(NetworkError::InsufficientBalance {
                from: u,
                to: v,
                required: amount,
                available,
            });
        }
        let delta = if channel.a == u { -amount } else { amount };
        // Clamp: at full depletion the subtraction can land one ulp outside
        // [0, capacity].
        channel.balance_ab = (channel.balance_ab + delta).clamp(0.0, channel.capacity);
        Ok(())
    }

    /// Applies a batch of hop transfers atomically: either every transfer
    /// succeeds in sequence, or the network is left untouched. Transfers are
    /// given as `(path, hop, from, to, amount)` so failures name the first
    /// violating hop.
    pub fn apply_transfers_atomic(
        &mut self,
        transfers: &[(usize, usize, NodeId, NodeId, f64)],
    ) -> Result<(), PaymentError> {
        // Stage balance changes on copies of the touched channels; commit
        // only when the full sequence is feasible.
        let mut staged: HashMap<ChannelId, f64> = HashMap::new();
        for &(path, hop, from, to, amount) in transfers {
            if !(amount > 0.0) || !amount.is_finite() {
                return Err(PaymentError::InvalidAmount { path, hop, amount });
            }
            let id = self
                .channel_between(from, to)
                .ok_or(PaymentError::MissingChannel { path, hop, from, to })?;
            let channel = &self.channels[id.index()];
            let balance_ab = *staged.entry(id).or_insert(channel.balance_ab);
            let available = if channel.a == from {
                balance_ab
            } else {
                channel.capacity - balance_ab
            };
            if amount > available {
                return Err(PaymentError::InsufficientBalance {
                    path,
                    hop,
                    from,
                    to,
                    required: amount,
                    available,
                });
            }
            let delta = if channel.a == from { -amount } else { amount };
            staged.insert(id, (balance_ab + delta).clamp(0.0, channel.capacity));
        }
        for (id, balance_ab) in staged {
            self.channels[id.index()].balance_ab = balance_ab;
        }
        Ok(())
    }

    /// FNV-1a digest of every channel balance; any balance mutation changes
    /// the digest, so failed payments can be checked for perfect rollback.
    pub fn state_digest(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bits: u64| {
            for byte in bits.to_le_bytes() {
                hash ^= byte as u64;
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for channel in &self.channels {
            eat(channel.balance_ab.to_bits());
        }
        hash
    }

    /// Sum of all total capacities; constant over the network's lifetime.
    pub fn total_capacity_sum(&self) -> f64 {
        self.channels.iter().map(|c| c.capacity).sum()
    }

    /// Sum of both directed balances over all channels, recomputed from the
    /// current state. Equals `total_capacity_sum` unless conservation broke.
    pub fn total_balance_sum(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.balance_ab + (c.capacity - c.balance_ab))
            .sum()
    }
}
