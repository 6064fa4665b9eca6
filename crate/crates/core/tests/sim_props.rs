use fblmac::sim::{boundary_scan, estimate_pi0, run_sim, Engine, ScanSpec, SimConfig, SlotProbs};
use fblmac::{success_prob, CodeSpec, LinkSet, PcModel, Protocol, TrafficProfile};
use proptest::prelude::*;

const M: PcModel = PcModel::SecondOrder;

fn config(protocol: Protocol, lambda: f64, batch: u64, slots: u64, seed: u64) -> SimConfig {
    let links = LinkSet::from_snr(0.2, 0.5, 1.0).unwrap();
    let code = CodeSpec::new(227, 1000, batch).unwrap();
    SimConfig::new(protocol, TrafficProfile::symmetric(lambda).unwrap(), code, links, M, slots, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn packets_are_conserved(lambda in 0.0f64..1.2, batch in 1u64..5, seed in any::<u64>(), which in 0usize..4) {
        let protocol = Protocol::ALL[which];
        let batch = if protocol.is_batched() { batch } else { 1 };
        let r = run_sim(&config(protocol, lambda, batch, 20_000, seed)).unwrap();
        prop_assert!(r.conservation.holds());
        prop_assert!(r.empirical_throughput <= (batch * 227) as f64 / 1000.0);
    }

    #[test]
    fn unit_batch_trajectory_equals_cc(lambda in 0.0f64..1.0, seed in any::<u64>()) {
        let t = TrafficProfile::symmetric(lambda).unwrap();
        let cc = Engine::from_config(&config(Protocol::Cc, lambda, 1, 10_000, seed));
        let baf = Engine::from_config(&config(Protocol::BafRelay, lambda, 1, 10_000, seed));
        prop_assert_eq!(cc.trace(&t, 10_000, seed), baf.trace(&t, 10_000, seed));
    }
}

#[test]
fn identical_results_across_worker_counts() {
    let links = LinkSet::from_snr(0.2, 0.5, 1.0).unwrap();
    let code = CodeSpec::single(100, 1000).unwrap();
    let pc = success_prob(100.0, 1000, &links.sd, M);
    let grid = vec![0.6 * pc, 0.8 * pc, 1.2 * pc, 1.4 * pc];
    let spec = ScanSpec::new(Protocol::Nc, code, links, M, grid, 200_000, vec![3, 4, 5]);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| boundary_scan(&spec).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn saturated_sources_deliver_the_service_rate() {
    let links = LinkSet::from_snr(1.0, 1.0, 1.0).unwrap();
    let code = CodeSpec::single(457, 1000).unwrap();
    let sat = TrafficProfile::new(1.0, 1.0, 0.3).unwrap();
    let cfg = SimConfig::new(Protocol::Nc, sat, code, links, M, 1_000_000, 8).unwrap();
    let r = run_sim(&cfg).unwrap();
    let expected = 0.457 * success_prob(457.0, 1000, &links.sd, M);
    assert!((r.empirical_throughput / expected - 1.0).abs() < 0.01, "{} vs {expected}", r.empirical_throughput);
}

#[test]
fn idle_frequency_within_three_standard_errors() {
    let links = LinkSet::from_snr(1.0, 1.0, 1.0).unwrap();
    let code = CodeSpec::single(457, 1000).unwrap();
    let pc = success_prob(457.0, 1000, &links.sd, M);
    for (i, (la, omega)) in [(0.1, 0.5), (0.3, 0.6), (0.2, 0.3)].into_iter().enumerate() {
        let t = TrafficProfile::new(la, 0.05, omega).unwrap();
        let cfg = SimConfig::new(Protocol::Nc, t, code, links, M, 1_000_000, 100 + i as u64).unwrap();
        let r = run_sim(&cfg).unwrap();
        let expected = 1.0 - la / (omega * pc);
        let z = (r.idle_freq[0] - expected).abs() / r.idle_stderr[0];
        assert!(z < 3.0, "lambda={la} omega={omega}: {} vs {expected} (z={z:.2})", r.idle_freq[0]);
    }
}

#[test]
fn near_critical_idle_frequency() {
    let e = estimate_pi0(0.49, 0.5, 10_000_000, 21).unwrap();
    assert!((e.frequency - 0.02).abs() < 0.01, "{e:?}");
}

#[test]
fn nc_drift_around_the_boundary() {
    let links = LinkSet::from_snr(1.0, 1.0, 1.0).unwrap();
    let pc = success_prob(457.0, 1000, &links.sd, M);
    let engine = Engine {
        protocol: Protocol::Nc,
        batch: 1,
        probs: SlotProbs { sd: pc, sr: 0.0, rd: 0.0 },
        k: 457,
        n: 1000,
    };
    let inside = TrafficProfile::symmetric(0.95 * pc).unwrap();
    let r = engine.run(&inside, 1_000_000, 0.1, 1);
    assert!(r.drift_slope.abs() < 1e-4, "{}", r.drift_slope);
    let offered = 0.457 * 0.95 * pc;
    assert!((r.empirical_throughput / offered - 1.0).abs() < 0.02);

    let outside = TrafficProfile::symmetric(1.05 * pc).unwrap();
    let r = engine.run(&outside, 1_000_000, 0.1, 1);
    assert!((r.drift_slope / (0.05 * pc) - 1.0).abs() < 0.1, "{}", r.drift_slope);
    assert_eq!(fblmac::sim::classify_stability(&r, 1.05 * pc), fblmac::sim::SimVerdict::Unstable);
}
