//! Ground-station broadcast network.
//!
//! The ground station sends one message per agent every `1/rate` seconds.
//! Each message is dropped independently (or through a two-state burst
//! model) and otherwise arrives after a fixed latency. Delivery is
//! event-driven, so without jitter every inter-arrival gap is an exact
//! multiple of the broadcast period.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::formation::{AgentId, FollowerLink};
use crate::geom::Vec2;

/// Relative tolerance when deciding whether a gap is a whole number of
/// periods.
pub const QUANTIZATION_TOLERANCE: f64 = 1e-6;

/// Two-state burst loss. In the good state messages drop with the link's
/// base probability, in the bad state with `bad_drop_probability`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GilbertElliott {
    pub good_to_bad: f64,
    pub bad_to_good: f64,
    pub bad_drop_probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinkModel {
    pub rate_hz: f64,
    pub latency_s: f64,
    pub drop_probability: f64,
    /// Standard deviation of the extra one-sided delay (s). Zero disables it.
    pub jitter_std: f64,
    pub burst: Option<GilbertElliott>,
    pub seed: u64,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            rate_hz: 60.0,
            latency_s: 0.040,
            drop_probability: 0.0,
            jitter_std: 0.0,
            burst: None,
            seed: 0,
        }
    }
}

fn probability(name: &'static str, p: f64, allow_one: bool) -> Result<()> {
    let ok = p >= 0.0 && if allow_one { p <= 1.0 } else { p < 1.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: "probability out of range",
        })
    }
}

impl LinkModel {
    pub fn period(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rate_hz",
                reason: "must be positive",
            });
        }
        if !(self.latency_s >= 0.0 && self.latency_s.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "latency_s",
                reason: "must be non-negative",
            });
        }
        if !(self.jitter_std >= 0.0 && self.jitter_std.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "jitter_std",
                reason: "must be non-negative",
            });
        }
        probability("drop_probability", self.drop_probability, false)?;
        if let Some(b) = &self.burst {
            probability("good_to_bad", b.good_to_bad, true)?;
            probability("bad_to_good", b.bad_to_good, true)?;
            probability("bad_drop_probability", b.bad_drop_probability, true)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payload {
    /// Ground-truth position of the destination agent at send time.
    pub pose: Vec2,
    /// Desired position, followers only.
    pub setpoint: Option<Vec2>,
    /// Mission leg the ground station is in.
    pub phase: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub destination: AgentId,
    pub seq: u64,
    pub send_time: f64,
    pub deliver_time: f64,
    pub payload: Payload,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeliveryRecord {
    pub destination: AgentId,
    pub seq: u64,
    pub send_time: f64,
    pub deliver_time: Option<f64>,
    pub dropped: bool,
}

/// Heap entry ordered so the earliest `(time, destination, seq)` pops first.
#[derive(Debug, Clone, Copy)]
struct Pending(Message);

impl Pending {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.0
            .deliver_time
            .total_cmp(&other.0.deliver_time)
            .then(self.0.destination.cmp(&other.0.destination))
            .then(self.0.seq.cmp(&other.0.seq))
    }
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

#[derive(Debug, Clone)]
struct LinkState {
    rng: ChaCha8Rng,
    bad: bool,
    last_deliver: f64,
}

/// Broadcast link set owned by the simulation loop.
#[derive(Debug, Clone)]
pub struct Network {
    model: LinkModel,
    jitter: Option<Normal<f64>>,
    links: BTreeMap<AgentId, LinkState>,
    queue: BinaryHeap<Pending>,
    next_seq: u64,
    log: Vec<DeliveryRecord>,
}

impl Network {
    pub fn new(model: LinkModel) -> Result<Self> {
        model.validate()?;
        let jitter = if model.jitter_std > 0.0 {
            Some(Normal::new(0.0, model.jitter_std).map_err(|_| Error::InvalidParameter {
                name: "jitter_std",
                reason: "invalid normal distribution",
            })?)
        } else {
            None
        };
        Ok(Self {
            model,
            jitter,
            links: BTreeMap::new(),
            queue: BinaryHeap::new(),
            next_seq: 0,
            log: Vec::new(),
        })
    }

    pub fn model(&self) -> &LinkModel {
        &self.model
    }

    fn link(&mut self, id: AgentId) -> &mut LinkState {
        let seed = self.model.seed;
        self.links.entry(id).or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Stream 0 is left to the vehicles' disturbance generators.
            rng.set_stream(0x6e65_7400_0000_0000 | u64::from(id.0));
            LinkState {
                rng,
                bad: false,
                last_deliver: f64::NEG_INFINITY,
            }
        })
    }

    /// Sends one message per destination at `send_time`.
    pub fn broadcast_tick(&mut self, send_time: f64, outgoing: &[(AgentId, Payload)]) {
        let model = self.model;
        let jitter = self.jitter;
        for &(destination, payload) in outgoing {
            let seq = self.next_seq;
            self.next_seq += 1;
            let link = self.link(destination);

            let p = match &model.burst {
                Some(b) => {
                    let flip = if link.bad { b.bad_to_good } else { b.good_to_bad };
                    if link.rng.random::<f64>() < flip {
                        link.bad = !link.bad;
                    }
                    if link.bad {
                        b.bad_drop_probability
                    } else {
                        model.drop_probability
                    }
                }
                None => model.drop_probability,
            };
            let dropped = link.rng.random::<f64>() < p;

            let deliver_time = if dropped {
                None
            } else {
                let extra = jitter.map_or(0.0, |n| libm::fabs(n.sample(&mut link.rng)));
                // Jitter never reorders a link.
                let t = (send_time + model.latency_s + extra).max(link.last_deliver);
                link.last_deliver = t;
                Some(t)
            };

            self.log.push(DeliveryRecord {
                destination,
                seq,
                send_time,
                deliver_time,
                dropped,
            });
            if let Some(deliver_time) = deliver_time {
                self.queue.push(Pending(Message {
                    destination,
                    seq,
                    send_time,
                    deliver_time,
                    payload,
                }));
            }
        }
    }

    /// Pops every message due at or before `now`, in delivery order.
    pub fn deliver_until(&mut self, now: f64) -> Vec<Message> {
        let mut out = Vec::new();
        while let Some(next) = self.queue.peek() {
            if next.0.deliver_time > now + 1e-12 {
                break;
            }
            out.push(self.queue.pop().expect("peeked").0);
        }
        out
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    pub fn log(&self) -> &[DeliveryRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<DeliveryRecord> {
        self.log
    }
}

/// Broadcast instants `k / rate`, computed from the integer index so they do
/// not accumulate rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BroadcastClock {
    rate: f64,
    next: u64,
}

impl BroadcastClock {
    pub fn new(rate: f64) -> Self {
        Self { rate, next: 0 }
    }

    pub fn peek(&self) -> f64 {
        self.next as f64 / self.rate
    }

    /// Next broadcast instant if it is due by `now`.
    pub fn due(&mut self, now: f64) -> Option<f64> {
        let t = self.peek();
        if t <= now + 1e-12 {
            self.next += 1;
            Some(t)
        } else {
            None
        }
    }
}

/// How followers obtain their setpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FollowerMode {
    /// Weighted sum of the neighbors' global desired positions.
    #[default]
    GlobalReference,
    /// Weighted sum of the neighbors' actual positions.
    LocalCommunication,
}

/// What the ground station knows about a follower's three in-neighbors,
/// in the order of the follower's link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborData {
    pub global_desired: [Vec2; 3],
    pub actual: [Vec2; 3],
}

pub fn follower_setpoint(mode: FollowerMode, link: &FollowerLink, data: &NeighborData) -> Vec2 {
    match mode {
        FollowerMode::GlobalReference => link.weights.combine(&data.global_desired),
        FollowerMode::LocalCommunication => link.weights.combine(&data.actual),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinkCounts {
    pub sent: usize,
    pub delivered: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinkStatistics {
    pub rate_hz: f64,
    pub totals: LinkCounts,
    pub per_link: BTreeMap<AgentId, LinkCounts>,
    /// Inter-arrival gaps binned by the nearest whole number of periods.
    pub histogram: BTreeMap<u64, usize>,
    pub gap_count: usize,
    /// Largest distance of a gap from a whole number of periods, in periods.
    pub max_quantization_error: f64,
    pub all_quantized: bool,
}

/// Inter-arrival statistics of a delivery log. Gaps are measured between
/// consecutive deliveries to the same destination.
pub fn link_statistics(log: &[DeliveryRecord], rate_hz: f64) -> Result<LinkStatistics> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "rate_hz",
            reason: "must be positive",
        });
    }
    let mut per_link: BTreeMap<AgentId, LinkCounts> = BTreeMap::new();
    let mut arrivals: BTreeMap<AgentId, Vec<f64>> = BTreeMap::new();
    for r in log {
        let c = per_link.entry(r.destination).or_default();
        c.sent += 1;
        match (r.dropped, r.deliver_time) {
            (false, Some(t)) => {
                c.delivered += 1;
                arrivals.entry(r.destination).or_default().push(t);
            }
            _ => c.dropped += 1,
        }
    }
    let totals = per_link.values().fold(LinkCounts::default(), |acc, c| LinkCounts {
        sent: acc.sent + c.sent,
        delivered: acc.delivered + c.delivered,
        dropped: acc.dropped + c.dropped,
    });

    let mut histogram = BTreeMap::new();
    let mut gap_count = 0;
    let mut max_err: f64 = 0.0;
    let mut all_quantized = true;
    for times in arrivals.values_mut() {
        times.sort_by(f64::total_cmp);
        for pair in times.windows(2) {
            let periods = (pair[1] - pair[0]) * rate_hz;
            let k = libm::round(periods);
            let err = libm::fabs(periods - k);
            max_err = max_err.max(err);
            if k < 1.0 || err > QUANTIZATION_TOLERANCE {
                all_quantized = false;
            }
            *histogram.entry(k.max(0.0) as u64).or_insert(0) += 1;
            gap_count += 1;
        }
    }
    Ok(LinkStatistics {
        rate_hz,
        totals,
        per_link,
        histogram,
        gap_count,
        max_quantization_error: max_err,
        all_quantized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formation::Weights;

    fn payload() -> Payload {
        Payload {
            pose: Vec2::ZERO,
            setpoint: None,
            phase: 0,
        }
    }

    fn run(model: LinkModel, seconds: u64) -> Network {
        let mut net = Network::new(model).unwrap();
        let mut clock = BroadcastClock::new(model.rate_hz);
        let ids = [AgentId(1), AgentId(2)];
        let ticks = seconds * model.rate_hz as u64;
        for _ in 0..ticks {
            let t = clock.due(f64::INFINITY).unwrap();
            let out: Vec<_> = ids.iter().map(|&id| (id, payload())).collect();
            net.broadcast_tick(t, &out);
        }
        net
    }

    #[test]
    fn lossless_link_is_periodic() {
        let net = run(LinkModel::default(), 5);
        let stats = link_statistics(net.log(), 60.0).unwrap();
        assert_eq!(stats.totals.dropped, 0);
        assert_eq!(stats.histogram.len(), 1);
        assert_eq!(stats.histogram.get(&1), Some(&stats.gap_count));
        assert!(stats.all_quantized);
    }

    #[test]
    fn lossy_link_gaps_are_whole_periods() {
        let model = LinkModel {
            drop_probability: 0.1,
            seed: 7,
            ..LinkModel::default()
        };
        let net = run(model, 20);
        let stats = link_statistics(net.log(), 60.0).unwrap();
        assert!(stats.totals.dropped > 0);
        assert!(stats.all_quantized);
        assert!(stats.histogram.keys().any(|&k| k > 1));
        assert_eq!(stats.totals.sent, stats.totals.delivered + stats.totals.dropped);
    }

    #[test]
    fn certain_loss_delivers_nothing() {
        let mut net = Network::new(LinkModel {
            burst: Some(GilbertElliott {
                good_to_bad: 1.0,
                bad_to_good: 0.0,
                bad_drop_probability: 1.0,
            }),
            ..LinkModel::default()
        })
        .unwrap();
        net.broadcast_tick(0.0, &[(AgentId(1), payload())]);
        assert!(net.deliver_until(10.0).is_empty());
        assert!(LinkModel {
            drop_probability: 1.0,
            ..LinkModel::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn delivery_respects_latency_and_order() {
        let mut net = Network::new(LinkModel::default()).unwrap();
        net.broadcast_tick(0.0, &[(AgentId(2), payload()), (AgentId(1), payload())]);
        assert!(net.deliver_until(0.039).is_empty());
        let got = net.deliver_until(0.04);
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].destination, AgentId(1));
        assert_eq!(got[1].destination, AgentId(2));
    }

    #[test]
    fn jitter_preserves_order() {
        let model = LinkModel {
            jitter_std: 0.02,
            seed: 3,
            ..LinkModel::default()
        };
        let mut net = run(model, 5);
        let got = net.deliver_until(f64::INFINITY);
        let mut last = BTreeMap::new();
        for m in got {
            let prev = last.insert(m.destination, m.send_time);
            assert!(prev.is_none_or(|p| p < m.send_time));
        }
    }

    #[test]
    fn empty_log_is_error() {
        assert!(matches!(link_statistics(&[], 60.0), Err(Error::EmptyLog)));
    }

    #[test]
    fn setpoint_modes_agree_on_perfect_tracking() {
        let link = FollowerLink {
            neighbors: [AgentId(1), AgentId(2), AgentId(3)],
            weights: Weights([0.2, 0.3, 0.5]),
        };
        let p = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let data = NeighborData {
            global_desired: p,
            actual: p,
        };
        assert_eq!(
            follower_setpoint(FollowerMode::GlobalReference, &link, &data),
            follower_setpoint(FollowerMode::LocalCommunication, &link, &data)
        );
        let mut shifted = data;
        shifted.actual[2] += Vec2::new(0.1, 0.0);
        let d = follower_setpoint(FollowerMode::LocalCommunication, &link, &shifted)
            - follower_setpoint(FollowerMode::LocalCommunication, &link, &data);
        assert!((d - Vec2::new(0.05, 0.0)).norm() < 1e-15);
    }
}
