use fblmac::stability::{
    baf_stable, cc_stable, cognitive_split, geo_geo1_stationary, relay_rates, tdma_stable, BafVariant, STRICT_STEP,
};
use fblmac::throughput::LinkProbs;
use fblmac::{success_prob, ChannelParams, LinkSet, PcModel, RelayArm, TrafficProfile};
use proptest::prelude::*;

const M: PcModel = PcModel::SecondOrder;

fn links() -> impl Strategy<Value = LinkSet> {
    (0.05f64..5.0, 0.05f64..5.0, 0.05f64..5.0).prop_map(|(a, b, c)| LinkSet::from_snr(a, b, c).unwrap())
}

fn traffic() -> impl Strategy<Value = TrafficProfile> {
    (0.0f64..0.99, 0.0f64..0.99, 0.0f64..=1.0).prop_map(|(a, b, w)| TrafficProfile::new(a, b, w).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn relay_region_nested_in_source_region(t in traffic(), l in links(), n in 50u64..2000, frac in 0.02f64..0.8) {
        let k = ((frac * n as f64) as u64).max(1);
        let v = cc_stable(&t, k, n, &l, M);
        prop_assert!(!v.relay_region.stable || v.source_region.stable);
        prop_assert_eq!(v.overall, v.relay_region);
    }

    #[test]
    fn more_traffic_never_stabilizes(t in traffic(), l in links(), n in 50u64..2000, frac in 0.02f64..0.8,
                                     da in 0.0f64..0.5, db in 0.0f64..0.5, batch in 1u64..5) {
        let k = ((frac * n as f64) as u64).max(1);
        let more = TrafficProfile::new((t.lambda_a + da).min(0.999), (t.lambda_b + db).min(0.999), t.omega_a).unwrap();
        let ch = l.sd;
        prop_assert!(tdma_stable(&t, k, k, n, &ch, M).stable || !tdma_stable(&more, k, k, n, &ch, M).stable);
        prop_assert!(cc_stable(&t, k, n, &l, M).overall.stable || !cc_stable(&more, k, n, &l, M).overall.stable);
        for variant in [BafVariant::Relay, BafVariant::Source] {
            for arm in [RelayArm::Unweighted, RelayArm::BatchWeighted] {
                let before = baf_stable(&t, k, batch, n, &l, M, variant).for_arm(arm);
                let after = baf_stable(&more, k, batch, n, &l, M, variant).for_arm(arm);
                prop_assert!(before.stable || !after.stable);
            }
        }
    }

    #[test]
    fn unit_batch_matches_cc(t in traffic(), l in links(), n in 50u64..2000, frac in 0.02f64..0.8) {
        let k = ((frac * n as f64) as u64).max(1);
        let cc = cc_stable(&t, k, n, &l, M).overall;
        for variant in [BafVariant::Relay, BafVariant::Source] {
            let b = baf_stable(&t, k, 1, n, &l, M, variant);
            prop_assert!(!b.disagree);
            prop_assert_eq!(b.canonical.stable, cc.stable);
            prop_assert!((b.canonical.margin - cc.margin).abs() <= 1e-12);
        }
    }

    #[test]
    fn verdicts_agree_without_relay_traffic(t in traffic(), snr_sd in 0.05f64..5.0, snr_rd in 0.05f64..5.0,
                                            n in 50u64..2000, frac in 0.02f64..0.8, batch in 2u64..6) {
        // with the relay unreachable the disputed relay term vanishes
        let l = LinkSet::from_snr(snr_sd, 1e-12, snr_rd).unwrap();
        let k = ((frac * n as f64) as u64).max(1);
        let p = LinkProbs::evaluate(&l, k, batch * k, n, M);
        prop_assume!(p.via_relay() == 0.0);
        prop_assert!(!baf_stable(&t, k, batch, n, &l, M, BafVariant::Relay).disagree);
    }

    #[test]
    fn geo_geo1_masses(p in 0.0f64..0.95, gap in 0.01f64..1.0, j_max in 1usize..200) {
        let q = (p + gap).min(1.0);
        prop_assume!(p < q);
        let d = geo_geo1_stationary(p, q, j_max).unwrap();
        prop_assert!(d.pi0 >= 0.0 && d.tail.iter().all(|&x| x >= 0.0));
        prop_assert!(d.tail.windows(2).all(|w| w[1] <= w[0]));
        let total = d.pi0 + d.tail.iter().sum::<f64>();
        prop_assert!(total <= 1.0 + 1e-12);
        if q < 1.0 {
            let deficit = 1.0 - total;
            // the masses carry a pi0 / (1 - q) prefactor, which can exceed one
            let bound = d.pi0 / (1.0 - q) * d.ratio.powi(j_max as i32 + 1) / (1.0 - d.ratio);
            prop_assert!(deficit <= bound + 1e-12, "{deficit} {bound}");
            prop_assert!((deficit - d.truncated_mass(q)).abs() <= 1e-10);
        }
    }

    #[test]
    fn relay_rates_consistent(lambda in 0.0f64..0.5, omega in 0.05f64..1.0, l in links(), n in 50u64..2000,
                              frac in 0.02f64..0.5, batch in 1u64..4) {
        let k = ((frac * n as f64) as u64).max(1);
        if let Ok(r) = relay_rates(lambda, omega, k, n, &l, M, batch) {
            let mu = omega * LinkProbs::evaluate(&l, k, batch * k, n, M).leaves_source();
            prop_assert!(((1.0 - r.pi0) - lambda / mu).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&r.pi0) && r.lambda_r >= 0.0 && r.mu_r >= 0.0);
            let again = relay_rates(lambda, omega, k, n, &l, M, batch).unwrap();
            prop_assert_eq!(r, again);
        }
    }

    #[test]
    fn cognitive_share_is_minimal(lambda in 0.0f64..0.9, snr in 0.2f64..5.0, n in 100u64..2000, frac in 0.05f64..0.6) {
        let ch = ChannelParams::new(snr).unwrap();
        let k_a = ((frac * n as f64 * ch.capacity()) as u64).max(1);
        let pc = success_prob(k_a as f64, n, &ch, M);
        prop_assume!(lambda / pc + STRICT_STEP <= 1.0 && lambda < pc);
        let s = cognitive_split(lambda, k_a, n, n, &ch, M).unwrap();
        prop_assert!(lambda < s.omega_a * pc);
        prop_assert!(lambda >= (s.omega_a - STRICT_STEP) * pc * (1.0 - 1e-12));
        prop_assert!((s.omega_a + s.omega_b - 1.0).abs() <= 1e-15);
    }
}
