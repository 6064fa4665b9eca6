//! Seeded slot-level Monte Carlo simulation.
//!
//! A run is sequential and fully determined by its [`SimConfig`]; parallelism
//! only ever spans independent runs.

mod engine;
mod rng;
mod scan;

use serde::{Deserialize, Serialize};

pub use engine::{run_sim, Conservation, Engine, SimConfig, SimReport, SlotOutcome, SlotProbs, MIN_SLOTS};
pub use rng::SlotRng;
pub use scan::{boundary_scan, majority, BoundaryEstimate, GridPoint, ScanSpec};

use crate::error::{domain, Error, Result};
use crate::stability::TrafficProfile;
use crate::throughput::Protocol;

/// Fewest measured slots for which [`classify_stability`] commits to a verdict.
pub const MIN_CLASSIFY_SLOTS: u64 = 100_000;

/// Drift above this multiple of the offered load is classified unstable.
pub const UNSTABLE_DRIFT: f64 = 0.02;

/// Drift at or below this multiple of the offered load may be classified stable.
pub const STABLE_DRIFT: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimVerdict {
    Stable,
    Unstable,
    Indeterminate,
}

impl SimVerdict {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Stable => "stable",
            Self::Unstable => "unstable",
            Self::Indeterminate => "indeterminate",
        }
    }
}

/// Empirical stability from the backlog drift of a report.
///
/// A run counts as stable only when its drift is small and the quarterly
/// mean backlog does not keep climbing past twice its first-quarter level.
pub fn classify_stability(report: &SimReport, lambda_total: f64) -> SimVerdict {
    if report.measured_slots < MIN_CLASSIFY_SLOTS {
        return SimVerdict::Indeterminate;
    }
    let drift = report.drift_slope;
    if drift > UNSTABLE_DRIFT * lambda_total {
        return SimVerdict::Unstable;
    }
    let [q1, q2, q3, q4] = report.quarter_backlog;
    let growing = q2 <= q3 && q3 <= q4 && q4 > 2.0 * q1 + 1.0;
    if drift <= STABLE_DRIFT * lambda_total && !growing {
        SimVerdict::Stable
    } else {
        SimVerdict::Indeterminate
    }
}

/// Idle-frequency estimate for one Bernoulli(`p`) source served with
/// probability `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pi0Estimate {
    pub frequency: f64,
    pub stderr: f64,
}

pub fn estimate_pi0(p: f64, q: f64, slots: u64, seed: u64) -> Result<Pi0Estimate> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(domain(format!("probabilities must lie in [0, 1], got p={p}, q={q}")));
    }
    if p >= q {
        return Err(Error::Unstable { arrival: p, service: q });
    }
    if slots < MIN_SLOTS {
        return Err(domain(format!("slots must be at least {MIN_SLOTS}, got {slots}")));
    }
    let engine = Engine {
        protocol: Protocol::Nc,
        batch: 1,
        probs: SlotProbs { sd: q, sr: 0.0, rd: 0.0 },
        k: 1,
        n: 1,
    };
    let traffic = TrafficProfile::new(p, 0.0, 1.0)?;
    let report = engine.run(&traffic, slots, 0.1, seed);
    Ok(Pi0Estimate {
        frequency: report.idle_freq[0],
        stderr: report.idle_stderr[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{CodeSpec, PcModel};
    use crate::throughput::LinkSet;

    fn cfg(protocol: Protocol, traffic: TrafficProfile, k: u64, batch: u64, slots: u64, seed: u64) -> SimConfig {
        let links = LinkSet::from_snr(0.2, 0.5, 1.0).unwrap();
        let code = CodeSpec::new(k, 1000, batch).unwrap();
        SimConfig::new(protocol, traffic, code, links, PcModel::SecondOrder, slots, seed).unwrap()
    }

    #[test]
    fn zero_traffic() {
        let t = TrafficProfile::new(0.0, 0.0, 0.5).unwrap();
        for protocol in Protocol::ALL {
            let r = run_sim(&cfg(protocol, t, 227, if protocol.is_batched() { 2 } else { 1 }, 200_000, 1)).unwrap();
            assert_eq!(r.delivered_bits, 0);
            assert_eq!(r.idle_freq, [1.0, 1.0]);
            assert_eq!(classify_stability(&r, 0.0), SimVerdict::Stable);
        }
    }

    #[test]
    fn config_validation() {
        let t = TrafficProfile::new(0.1, 0.1, 0.5).unwrap();
        let links = LinkSet::from_snr(1.0, 1.0, 1.0).unwrap();
        let code = CodeSpec::new(100, 1000, 2).unwrap();
        let m = PcModel::SecondOrder;
        assert!(SimConfig::new(Protocol::Cc, t, code, links, m, 100_000, 0).is_err());
        let single = CodeSpec::single(100, 1000).unwrap();
        assert!(SimConfig::new(Protocol::Cc, t, single, links, m, 9_999, 0).is_err());
        let sat = TrafficProfile::new(1.0, 0.0, 0.5).unwrap();
        assert!(SimConfig::new(Protocol::Cc, sat, single, links, m, 100_000, 0).is_err());
        assert!(SimConfig::new(Protocol::Nc, sat, single, links, m, 100_000, 0).is_ok());
        let ok = SimConfig::new(Protocol::Nc, t, single, links, m, 100_000, 0).unwrap();
        assert!(ok.with_warmup(1.0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let t = TrafficProfile::new(0.2, 0.15, 0.5).unwrap();
        let c = cfg(Protocol::BafRelay, t, 227, 2, 50_000, 9);
        assert_eq!(run_sim(&c).unwrap(), run_sim(&c).unwrap());
        let other = SimConfig { seed: 10, ..c };
        assert_ne!(run_sim(&c).unwrap(), run_sim(&other).unwrap());
    }

    #[test]
    fn conservation_and_throughput_cap() {
        for (protocol, batch) in [(Protocol::Nc, 1), (Protocol::Cc, 1), (Protocol::BafRelay, 3), (Protocol::BafSource, 2)] {
            for lambda in [0.05, 0.3, 0.6] {
                let t = TrafficProfile::symmetric(lambda).unwrap();
                let r = run_sim(&cfg(protocol, t, 200, batch, 30_000, 3)).unwrap();
                assert!(r.conservation.holds(), "{protocol:?} {lambda}");
                assert!(r.empirical_throughput <= (batch * 200) as f64 / 1000.0);
            }
        }
    }

    #[test]
    fn baf_relay_with_unit_batch_tracks_cc() {
        let t = TrafficProfile::new(0.2, 0.25, 0.4).unwrap();
        let cc = Engine::from_config(&cfg(Protocol::Cc, t, 227, 1, 20_000, 5));
        let baf = Engine::from_config(&cfg(Protocol::BafRelay, t, 227, 1, 20_000, 5));
        assert_eq!(cc.trace(&t, 20_000, 5), baf.trace(&t, 20_000, 5));
    }

    #[test]
    fn classify_examples() {
        let mut r = run_sim(&cfg(Protocol::Nc, TrafficProfile::new(0.0, 0.0, 0.5).unwrap(), 100, 1, 200_000, 0)).unwrap();
        assert_eq!(classify_stability(&r, 0.0), SimVerdict::Stable);
        r.measured_slots = MIN_CLASSIFY_SLOTS - 1;
        assert_eq!(classify_stability(&r, 0.0), SimVerdict::Indeterminate);

        // one saturated source served with probability 0.4
        let engine = Engine {
            protocol: Protocol::Nc,
            batch: 1,
            probs: SlotProbs { sd: 0.4, sr: 0.0, rd: 0.0 },
            k: 1,
            n: 1,
        };
        let sat = TrafficProfile::new(1.0, 0.0, 1.0).unwrap();
        let r = engine.run(&sat, 200_000, 0.1, 4);
        assert!((r.drift_slope - 0.6).abs() < 0.01);
        assert_eq!(classify_stability(&r, 1.0), SimVerdict::Unstable);
    }

    #[test]
    fn pi0_examples() {
        assert_eq!(estimate_pi0(0.0, 0.5, 10_000, 1).unwrap().frequency, 1.0);
        assert!(matches!(estimate_pi0(0.5, 0.5, 10_000, 1), Err(Error::Unstable { .. })));
        let e = estimate_pi0(0.2, 0.5, 1_000_000, 11).unwrap();
        assert!((e.frequency - 0.6).abs() < 0.005, "{e:?}");
    }
}
