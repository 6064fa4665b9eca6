//! Throughput of the non-cooperative, cognitive-cooperation and
//! batch-and-forward protocols, and their maximization over packet size `k`
//! and batch size `L`.
//!
//! Notation used below, all evaluated at blocklength `n`:
//! `s = P_sd + P_e,sd * P_sr` is the per-attempt probability that a packet
//! leaves its source, `a = P_e,sd * P_sr` the probability that it leaves via
//! the relay, and `r = P_rd` the relay's per-attempt success probability.

use serde::{Deserialize, Serialize};

use crate::channel::{success_prob, ChannelParams, PcModel};
use crate::error::{domain, Result};

/// Source→destination, source→relay and relay→destination links, shared by
/// both sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSet {
    pub sd: ChannelParams,
    pub sr: ChannelParams,
    pub rd: ChannelParams,
}

impl LinkSet {
    pub fn new(sd: ChannelParams, sr: ChannelParams, rd: ChannelParams) -> Self {
        Self { sd, sr, rd }
    }

    pub fn from_snr(snr_sd: f64, snr_sr: f64, snr_rd: f64) -> Result<Self> {
        Ok(Self {
            sd: ChannelParams::new(snr_sd)?,
            sr: ChannelParams::new(snr_sr)?,
            rd: ChannelParams::new(snr_rd)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Nc,
    Cc,
    BafRelay,
    BafSource,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::Nc, Protocol::Cc, Protocol::BafRelay, Protocol::BafSource];

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Nc => "nc",
            Protocol::Cc => "cc",
            Protocol::BafRelay => "baf_relay",
            Protocol::BafSource => "baf_source",
        }
    }

    pub fn is_batched(&self) -> bool {
        matches!(self, Protocol::BafRelay | Protocol::BafSource)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    SourceLimited,
    RelayLimited,
    NotApplicable,
}

impl Binding {
    pub fn name(&self) -> &'static str {
        match self {
            Binding::SourceLimited => "source_limited",
            Binding::RelayLimited => "relay_limited",
            Binding::NotApplicable => "not_applicable",
        }
    }
}

/// Relay-arm throughput used for relay-side batching.
///
/// With `L` packets per relay codeword the two candidate forms differ only in
/// the weight of `r` in the denominator:
///
/// * `Unweighted`: `(Lk/n) s r / (r + a)`
/// * `BatchWeighted`: `(Lk/n) s r / (L r + a)`, which follows from requiring
///   the relay's batch service rate `L * (idle share) * r` to exceed its
///   arrival rate.
///
/// `Unweighted` is the canonical analytic form; slot-level simulation picks
/// `BatchWeighted` (see `docs/relay-arm-adjudication.md`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayArm {
    #[default]
    Unweighted,
    BatchWeighted,
}

impl RelayArm {
    pub fn name(&self) -> &'static str {
        match self {
            RelayArm::Unweighted => "unweighted",
            RelayArm::BatchWeighted => "batch_weighted",
        }
    }
}

/// Per-attempt link probabilities at given source and relay payloads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkProbs {
    pub sd: f64,
    pub sr: f64,
    pub rd: f64,
}

impl LinkProbs {
    pub fn evaluate(links: &LinkSet, source_bits: u64, relay_bits: u64, n: u64, model: PcModel) -> Self {
        Self {
            sd: success_prob(source_bits as f64, n, &links.sd, model),
            sr: success_prob(source_bits as f64, n, &links.sr, model),
            rd: success_prob(relay_bits as f64, n, &links.rd, model),
        }
    }

    /// `a = P_e,sd * P_sr`
    pub fn via_relay(&self) -> f64 {
        (1.0 - self.sd) * self.sr
    }

    /// `s = P_sd + a`
    pub fn leaves_source(&self) -> f64 {
        self.sd + self.via_relay()
    }
}

/// `(k/n) * P_c(k, n)` over a single link.
pub fn tdma_throughput(k: u64, n: u64, channel: &ChannelParams, model: PcModel) -> f64 {
    k as f64 / n as f64 * success_prob(k as f64, n, channel, model)
}

/// Optimal packet size for single-link TDMA throughput.
///
/// Scans `k = 1, 2, ...` and stops at the first decrease, which is exact
/// because the throughput is log-concave in `k`. The scan is capped at
/// `10 * max(1, ceil(nC))`.
pub fn optimize_k(n: u64, channel: &ChannelParams, model: PcModel) -> (u64, f64) {
    let cap = 10 * ((n as f64 * channel.capacity()).ceil() as u64).max(1);
    let mut best_k = 1;
    let mut best_u = tdma_throughput(1, n, channel, model);
    for k in 2..=cap {
        let u = tdma_throughput(k, n, channel, model);
        if u < best_u {
            break;
        }
        if u > best_u {
            best_k = k;
            best_u = u;
        }
    }
    (best_k, best_u)
}

pub fn nc_throughput(k: u64, n: u64, links: &LinkSet, model: PcModel) -> f64 {
    tdma_throughput(k, n, &links.sd, model)
}

/// Result of a cooperative throughput evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoopThroughput {
    /// `min(source_arm, relay_arm)`, bits per channel use.
    pub value: f64,
    pub source_arm: f64,
    pub relay_arm: f64,
    pub binding: Binding,
    /// The relay-arm denominator vanished; the relay arm was taken as zero.
    pub degenerate: bool,
}

/// `relay_bits / n * s * r / (weight * r + a)`, or zero if the denominator vanishes.
fn relay_arm(relay_bits: u64, n: u64, s: f64, r: f64, a: f64, weight: f64) -> (f64, bool) {
    let den = weight * r + a;
    if den <= 0.0 {
        return (0.0, true);
    }
    // the ratio first keeps the arm at or below the source arm when a = 0
    (relay_bits as f64 / n as f64 * s * (r / den), false)
}

fn coop(source_arm: f64, relay: (f64, bool)) -> CoopThroughput {
    let (relay_arm, degenerate) = relay;
    let (value, binding) = if source_arm <= relay_arm {
        (source_arm, Binding::SourceLimited)
    } else {
        (relay_arm, Binding::RelayLimited)
    };
    CoopThroughput {
        value,
        source_arm,
        relay_arm,
        binding,
        degenerate,
    }
}

/// Cognitive-cooperation throughput `(k/n) s r / (r + a)`.
pub fn cc_throughput(k: u64, n: u64, links: &LinkSet, model: PcModel) -> CoopThroughput {
    let p = LinkProbs::evaluate(links, k, k, n, model);
    let (s, a) = (p.leaves_source(), p.via_relay());
    let relay = relay_arm(k, n, s, p.rd, a, 1.0);
    CoopThroughput {
        value: relay.0,
        source_arm: k as f64 / n as f64 * s,
        relay_arm: relay.0,
        binding: Binding::NotApplicable,
        degenerate: relay.1,
    }
}

/// Relay-side batching: the source arm `(k/n) s` at payload `k` and the
/// relay arm at payload `Lk` on the relay→destination link.
pub fn baf_relay_throughput(k: u64, batch: u64, n: u64, links: &LinkSet, model: PcModel) -> CoopThroughput {
    baf_relay_throughput_with(k, batch, n, links, model, RelayArm::Unweighted)
}

pub fn baf_relay_throughput_with(
    k: u64,
    batch: u64,
    n: u64,
    links: &LinkSet,
    model: PcModel,
    arm: RelayArm,
) -> CoopThroughput {
    let p = LinkProbs::evaluate(links, k, batch * k, n, model);
    let (s, a) = (p.leaves_source(), p.via_relay());
    let weight = match arm {
        RelayArm::Unweighted => 1.0,
        RelayArm::BatchWeighted => batch as f64,
    };
    let source_arm = k as f64 / n as f64 * s;
    coop(source_arm, relay_arm(batch * k, n, s, p.rd, a, weight))
}

/// Branch condition printed alongside relay-side batching: source-limited iff
/// `L >= 1 + a / P_rd(Lk)`.
pub fn baf_relay_printed_source_limited(k: u64, batch: u64, n: u64, links: &LinkSet, model: PcModel) -> bool {
    let p = LinkProbs::evaluate(links, k, batch * k, n, model);
    batch as f64 >= 1.0 + p.via_relay() / p.rd
}

/// Source-side batching: source arm `(Lk/n) s(Lk)` and relay arm
/// `(k/n) s(Lk) r(k) / (r(k) + a(Lk))`.
pub fn baf_source_throughput(k: u64, batch: u64, n: u64, links: &LinkSet, model: PcModel) -> CoopThroughput {
    let p = LinkProbs::evaluate(links, batch * k, k, n, model);
    let (s, a) = (p.leaves_source(), p.via_relay());
    let source_arm = (batch * k) as f64 / n as f64 * s;
    coop(source_arm, relay_arm(k, n, s, p.rd, a, 1.0))
}

/// Branch condition printed alongside source-side batching: source-limited iff
/// `L >= P_rd(Lk) / (P_rd(k) + a(Lk))`. Exposed for comparison only; the
/// binding arm reported by [`baf_source_throughput`] comes from the min itself.
pub fn baf_source_printed_source_limited(k: u64, batch: u64, n: u64, links: &LinkSet, model: PcModel) -> bool {
    let big = LinkProbs::evaluate(links, batch * k, batch * k, n, model);
    let rd_k = success_prob(k as f64, n, &links.rd, model);
    batch as f64 >= big.rd / (rd_k + big.via_relay())
}

/// Throughput of `protocol` at one operating point. `batch` is ignored for
/// the unbatched protocols.
pub fn protocol_throughput(
    protocol: Protocol,
    k: u64,
    batch: u64,
    n: u64,
    links: &LinkSet,
    model: PcModel,
    arm: RelayArm,
) -> CoopThroughput {
    match protocol {
        Protocol::Nc => {
            let u = nc_throughput(k, n, links, model);
            CoopThroughput {
                value: u,
                source_arm: u,
                relay_arm: f64::INFINITY,
                binding: Binding::NotApplicable,
                degenerate: false,
            }
        }
        Protocol::Cc => cc_throughput(k, n, links, model),
        Protocol::BafRelay => baf_relay_throughput_with(k, batch, n, links, model, arm),
        Protocol::BafSource => baf_source_throughput(k, batch, n, links, model),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputResult {
    pub protocol: Protocol,
    pub k_star: u64,
    pub l_star: u64,
    pub u_star: f64,
    pub binding: Binding,
}

/// Grid bounds for [`optimize_protocol`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBounds {
    /// Largest packet size; `None` means `n`.
    pub k_max: Option<u64>,
    pub l_max: u64,
    pub relay_arm: RelayArm,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            k_max: None,
            l_max: 8,
            relay_arm: RelayArm::Unweighted,
        }
    }
}

/// Exhaustive search over `k in [1, k_max]` (and `L in [1, l_max]` for the
/// batched protocols). Ties go to the smallest `(L, k)`.
pub fn optimize_protocol(
    protocol: Protocol,
    n: u64,
    links: &LinkSet,
    model: PcModel,
    bounds: &SearchBounds,
) -> Result<ThroughputResult> {
    let k_max = bounds.k_max.unwrap_or(n);
    if n == 0 || k_max == 0 || bounds.l_max == 0 {
        return Err(domain(format!(
            "empty search grid: n={n}, k_max={k_max}, l_max={}",
            bounds.l_max
        )));
    }
    let l_max = if protocol.is_batched() { bounds.l_max } else { 1 };
    let mut best = ThroughputResult {
        protocol,
        k_star: 1,
        l_star: 1,
        u_star: f64::NEG_INFINITY,
        binding: Binding::NotApplicable,
    };
    for batch in 1..=l_max {
        for k in 1..=k_max {
            let t = protocol_throughput(protocol, k, batch, n, links, model, bounds.relay_arm);
            if t.value > best.u_star {
                best = ThroughputResult {
                    protocol,
                    k_star: k,
                    l_star: batch,
                    u_star: t.value,
                    binding: if protocol.is_batched() {
                        t.binding
                    } else {
                        Binding::NotApplicable
                    },
                };
            }
        }
    }
    Ok(best)
}

/// Best of relay-side and source-side batching. Ties go to relay-side.
pub fn optimize_overall(n: u64, links: &LinkSet, model: PcModel, bounds: &SearchBounds) -> Result<ThroughputResult> {
    let relay = optimize_protocol(Protocol::BafRelay, n, links, model, bounds)?;
    let source = optimize_protocol(Protocol::BafSource, n, links, model, bounds)?;
    Ok(if source.u_star > relay.u_star { source } else { relay })
}

#[cfg(test)]
mod tests {
    use super::*;

    const M: PcModel = PcModel::SecondOrder;

    fn triple_b() -> LinkSet {
        LinkSet::from_snr(0.2, 0.5, 1.0).unwrap()
    }

    #[test]
    fn tdma_throughput_examples() {
        let ch = ChannelParams::new(1.0).unwrap();
        assert_eq!(tdma_throughput(500, 1000, &ch, M), 0.25);
        // 0.457 * (1 - Q(1.5391286)) = 0.457 * 0.938115...
        let u = tdma_throughput(457, 1000, &ch, M);
        assert!((u - 0.428_718).abs() < 2e-6, "{u}");
        // chi = -6 at k = nC + 6 sqrt(nV)
        let k = (500.0 + 6.0 * (780.513_367_877_1f64).sqrt()).round() as u64;
        assert!(tdma_throughput(k, 1000, &ch, M) < 1e-8 * k as f64 / 1000.0);
    }

    #[test]
    fn optimize_k_terminates_for_n_one() {
        for snr in [0.01, 1.0, 100.0] {
            let ch = ChannelParams::new(snr).unwrap();
            let (k, u) = optimize_k(1, &ch, M);
            assert!(k >= 1 && u > 0.0);
        }
    }

    #[test]
    fn nc_ignores_relay_links() {
        let a = LinkSet::from_snr(0.2, 0.5, 1.0).unwrap();
        let b = LinkSet::from_snr(0.2, 7.0, 0.01).unwrap();
        for k in [1, 50, 131, 400] {
            assert_eq!(nc_throughput(k, 1000, &a, M).to_bits(), nc_throughput(k, 1000, &b, M).to_bits());
            assert_eq!(nc_throughput(k, 1000, &a, M), tdma_throughput(k, 1000, &a.sd, M));
        }
    }

    #[test]
    fn nc_at_capacity_is_half_capacity() {
        let links = LinkSet::from_snr(3.0, 1.0, 1.0).unwrap();
        assert_eq!(nc_throughput(500, 500, &links, M), 0.5);
    }

    #[test]
    fn cc_collapses_without_relay_to_destination() {
        let links = LinkSet::from_snr(0.2, 0.5, 1e-12).unwrap();
        let t = cc_throughput(100, 1000, &links, M);
        assert_eq!(t.value, 0.0);
        assert!(!t.degenerate);
    }

    #[test]
    fn cc_degenerate_denominator() {
        // P_sr and P_rd both underflow to zero
        let links = LinkSet::from_snr(0.2, 1e-12, 1e-12).unwrap();
        let t = cc_throughput(100, 1000, &links, M);
        assert_eq!(t.value, 0.0);
        assert!(t.degenerate);
    }

    #[test]
    fn baf_relay_reduces_to_cc() {
        let links = triple_b();
        for k in [10, 120, 227, 260, 500] {
            let cc = cc_throughput(k, 1000, &links, M);
            for arm in [RelayArm::Unweighted, RelayArm::BatchWeighted] {
                let baf = baf_relay_throughput_with(k, 1, 1000, &links, M, arm);
                assert_eq!(baf.value, cc.value);
                assert!(baf.relay_arm <= baf.source_arm);
            }
            assert_eq!(baf_source_throughput(k, 1, 1000, &links, M).value, cc.value);
        }
    }

    #[test]
    fn optimize_rejects_empty_grid() {
        let links = triple_b();
        let bounds = SearchBounds {
            k_max: Some(0),
            ..SearchBounds::default()
        };
        assert!(optimize_protocol(Protocol::Cc, 1000, &links, M, &bounds).is_err());
    }

    #[test]
    fn optimize_nc_matches_optimize_k() {
        let links = LinkSet::from_snr(1.0, 1.0, 1.0).unwrap();
        let r = optimize_protocol(Protocol::Nc, 1000, &links, M, &SearchBounds::default()).unwrap();
        let (k, u) = optimize_k(1000, &links.sd, M);
        assert_eq!((r.k_star, r.l_star, r.u_star), (k, 1, u));
    }
}
