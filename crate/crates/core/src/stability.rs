//! Closed-form stability regions.
//!
//! All margins are in packets per slot: the service capacity on the right of
//! an inequality minus the arrival rate on its left. A verdict is stable when
//! the binding margin exceeds [`BOUNDARY_TOL`], so inputs placed exactly on a
//! boundary classify as unstable.

use serde::{Deserialize, Serialize};

use crate::channel::{success_prob, ChannelParams, PcModel};
use crate::error::{domain, Error, Result};
use crate::throughput::{optimize_protocol, tdma_throughput, LinkProbs, LinkSet, Protocol, RelayArm, SearchBounds};

/// Margins at or below this value count as "on the boundary".
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Step taken strictly inside a boundary when solving for a minimal share.
pub const STRICT_STEP: f64 = 1e-9;

/// Bernoulli arrival rates of sources A and B and the TDMA share of A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficProfile {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub omega_a: f64,
}

impl TrafficProfile {
    /// Rates must lie in `[0, 1]`; a rate of exactly one marks a saturated
    /// source, which only the non-cooperative simulator accepts.
    pub fn new(lambda_a: f64, lambda_b: f64, omega_a: f64) -> Result<Self> {
        for (name, v) in [("lambda_a", lambda_a), ("lambda_b", lambda_b), ("omega_a", omega_a)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(domain(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(Self {
            lambda_a,
            lambda_b,
            omega_a,
        })
    }

    /// Splits a total rate evenly between the sources with equal shares.
    pub fn symmetric(lambda_total: f64) -> Result<Self> {
        Self::new(lambda_total / 2.0, lambda_total / 2.0, 0.5)
    }

    pub fn omega_b(&self) -> f64 {
        1.0 - self.omega_a
    }

    pub fn total(&self) -> f64 {
        self.lambda_a + self.lambda_b
    }

    pub fn is_saturated(&self) -> bool {
        self.lambda_a >= 1.0 || self.lambda_b >= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    SourceA,
    SourceB,
    Sum,
    RelayA,
    RelayB,
    RelaySum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub margin: f64,
    pub binding: Constraint,
}

impl StabilityVerdict {
    /// Picks the smallest margin; earlier entries win ties.
    fn tightest(constraints: &[(Constraint, f64)]) -> Self {
        let (binding, margin) = constraints
            .iter()
            .copied()
            .fold((constraints[0].0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
        Self {
            stable: margin > BOUNDARY_TOL,
            margin,
            binding,
        }
    }
}

fn per_source(traffic: &TrafficProfile, cap_a: f64, cap_b: f64, relay: bool) -> [(Constraint, f64); 3] {
    let (a, b, sum) = if relay {
        (Constraint::RelayA, Constraint::RelayB, Constraint::RelaySum)
    } else {
        (Constraint::SourceA, Constraint::SourceB, Constraint::Sum)
    };
    [
        (a, traffic.omega_a * cap_a - traffic.lambda_a),
        (b, traffic.omega_b() * cap_b - traffic.lambda_b),
        (sum, traffic.omega_a * cap_a + traffic.omega_b() * cap_b - traffic.total()),
    ]
}

/// Stationary law of a discrete-time Geo/Geo/1 queue observed at slot
/// boundaries (an arrival cannot be served in the slot it arrives).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoGeo1 {
    pub pi0: f64,
    /// `pi_1 .. pi_{j_max}`
    pub tail: Vec<f64>,
    /// `p (1 - q) / (q (1 - p))`
    pub ratio: f64,
}

impl GeoGeo1 {
    /// Mass beyond `j_max`: `pi0 / (1 - q) * ratio^(j_max+1) / (1 - ratio)`.
    pub fn truncated_mass(&self, q: f64) -> f64 {
        let j = self.tail.len() as i32 + 1;
        self.pi0 / (1.0 - q) * self.ratio.powi(j) / (1.0 - self.ratio)
    }
}

pub fn geo_geo1_stationary(p: f64, q: f64, j_max: usize) -> Result<GeoGeo1> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(domain(format!("probabilities must lie in [0, 1], got p={p}, q={q}")));
    }
    if p >= q {
        return Err(Error::Unstable { arrival: p, service: q });
    }
    let pi0 = (q - p) / q;
    if q >= 1.0 {
        // every queued packet leaves next slot; the queue never exceeds one
        let mut tail = vec![0.0; j_max];
        if j_max > 0 {
            tail[0] = p;
        }
        return Ok(GeoGeo1 {
            pi0: 1.0 - p,
            tail,
            ratio: 0.0,
        });
    }
    let ratio = p * (1.0 - q) / (q * (1.0 - p));
    let lead = pi0 / (1.0 - q);
    let mut tail = Vec::with_capacity(j_max);
    let mut term = lead;
    for _ in 0..j_max {
        term *= ratio;
        tail.push(term);
    }
    Ok(GeoGeo1 { pi0, tail, ratio })
}

/// Non-cooperative TDMA: `lambda_i < omega_i P_c(k_i)` per source and the sum
/// of both.
pub fn tdma_stable(
    traffic: &TrafficProfile,
    k_a: u64,
    k_b: u64,
    n: u64,
    channel: &ChannelParams,
    model: PcModel,
) -> StabilityVerdict {
    let pa = success_prob(k_a as f64, n, channel, model);
    let pb = success_prob(k_b as f64, n, channel, model);
    StabilityVerdict::tightest(&per_source(traffic, pa, pb, false))
}

/// Arrival and departure rates of one relay queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueRates {
    /// Packets per slot entering the relay queue.
    pub lambda_r: f64,
    /// Packets per slot the relay can remove when backlogged.
    pub mu_r: f64,
    /// Per-slot probability that the relay delivers a codeword.
    pub service_prob: f64,
    /// Probability that the source is idle when granted the slot.
    pub pi0: f64,
}

/// Rates of relay queue `i` given its source's traffic. `batch` is 1 for
/// cognitive cooperation and `L` for relay-side batching, in which case the
/// relay codeword carries `L k` bits and each success removes `L` packets.
pub fn relay_rates(
    lambda_i: f64,
    omega_i: f64,
    k: u64,
    n: u64,
    links: &LinkSet,
    model: PcModel,
    batch: u64,
) -> Result<QueueRates> {
    if batch == 0 {
        return Err(domain("batch must be positive"));
    }
    let p = LinkProbs::evaluate(links, k, batch * k, n, model);
    let mu_i = omega_i * p.leaves_source();
    if !(lambda_i < mu_i) {
        return Err(Error::Unstable {
            arrival: lambda_i,
            service: mu_i,
        });
    }
    let pi0 = 1.0 - lambda_i / mu_i;
    let service_prob = omega_i * pi0 * p.rd;
    Ok(QueueRates {
        lambda_r: omega_i * (1.0 - pi0) * p.via_relay(),
        mu_r: batch as f64 * service_prob,
        service_prob,
        pi0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcVerdict {
    /// The relay region, which is contained in the source region.
    pub overall: StabilityVerdict,
    pub source_region: StabilityVerdict,
    pub relay_region: StabilityVerdict,
}

/// Per-unit-share capacities `(source, relay)` in packets per slot.
fn coop_caps(p: &LinkProbs, batch: u64, arm: RelayArm) -> (f64, f64) {
    let s = p.leaves_source();
    let a = p.via_relay();
    let weight = match arm {
        RelayArm::Unweighted => 1.0,
        RelayArm::BatchWeighted => batch as f64,
    };
    let den = weight * p.rd + a;
    let relay = if den > 0.0 { batch as f64 * s * (p.rd / den) } else { 0.0 };
    (s, relay)
}

/// Cognitive cooperation with packet size `k` at both sources.
pub fn cc_stable(traffic: &TrafficProfile, k: u64, n: u64, links: &LinkSet, model: PcModel) -> CcVerdict {
    let p = LinkProbs::evaluate(links, k, k, n, model);
    let (s, relay) = coop_caps(&p, 1, RelayArm::Unweighted);
    let source = per_source(traffic, s, s, false);
    let relays = per_source(traffic, relay, relay, true);
    let relay_region = StabilityVerdict::tightest(&relays);
    CcVerdict {
        overall: relay_region,
        source_region: StabilityVerdict::tightest(&source),
        relay_region,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BafVariant {
    Relay,
    Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BafVerdict {
    /// From the canonical closed form (`RelayArm::Unweighted`).
    pub canonical: StabilityVerdict,
    /// From the batch-weighted relay condition.
    pub batch_weighted: StabilityVerdict,
    pub disagree: bool,
}

impl BafVerdict {
    pub fn for_arm(&self, arm: RelayArm) -> StabilityVerdict {
        match arm {
            RelayArm::Unweighted => self.canonical,
            RelayArm::BatchWeighted => self.batch_weighted,
        }
    }
}

/// Batch-and-forward stability with both relay-arm forms.
///
/// For source-side batching the relay carries single packets, so both forms
/// coincide and `disagree` is always false.
pub fn baf_stable(
    traffic: &TrafficProfile,
    k: u64,
    batch: u64,
    n: u64,
    links: &LinkSet,
    model: PcModel,
    variant: BafVariant,
) -> BafVerdict {
    let verdict = |arm: RelayArm| {
        let (source_cap, relay_cap) = match variant {
            BafVariant::Relay => coop_caps(&LinkProbs::evaluate(links, k, batch * k, n, model), batch, arm),
            BafVariant::Source => {
                // source codewords carry L packets; the relay forwards one at a time
                let p = LinkProbs::evaluate(links, batch * k, k, n, model);
                let (s, relay) = coop_caps(&p, 1, RelayArm::Unweighted);
                (batch as f64 * s, relay)
            }
        };
        let relays = per_source(traffic, relay_cap, relay_cap, true);
        let sources = per_source(traffic, source_cap, source_cap, false);
        let all = [relays[0], relays[1], relays[2], sources[0], sources[1], sources[2]];
        StabilityVerdict::tightest(&all)
    };
    let canonical = verdict(RelayArm::Unweighted);
    let batch_weighted = verdict(RelayArm::BatchWeighted);
    BafVerdict {
        canonical,
        batch_weighted,
        disagree: canonical.stable != batch_weighted.stable,
    }
}

/// Minimal share for a primary source and the best packet size for the
/// secondary source using the remaining share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CognitiveSplit {
    pub omega_a: f64,
    pub omega_b: f64,
    pub k_b: u64,
    pub u_secondary: f64,
}

pub fn cognitive_split(
    lambda_a: f64,
    k_a: u64,
    k_b_max: u64,
    n: u64,
    channel: &ChannelParams,
    model: PcModel,
) -> Result<CognitiveSplit> {
    if k_b_max == 0 {
        return Err(domain("k_b_max must be positive"));
    }
    let pc = success_prob(k_a as f64, n, channel, model);
    let omega_a = lambda_a / pc + STRICT_STEP;
    if !(lambda_a < pc) || omega_a > 1.0 {
        return Err(domain(format!(
            "primary demand {lambda_a} exceeds its full-share service rate {pc} (deficit {})",
            lambda_a - pc
        )));
    }
    let omega_b = 1.0 - omega_a;
    let links = LinkSet::new(*channel, *channel, *channel);
    let bounds = SearchBounds {
        k_max: Some(k_b_max),
        ..SearchBounds::default()
    };
    let best = optimize_protocol(Protocol::Nc, n, &links, model, &bounds)?;
    Ok(CognitiveSplit {
        omega_a,
        omega_b,
        k_b: best.k_star,
        u_secondary: omega_b * tdma_throughput(best.k_star, n, channel, model),
    })
}
