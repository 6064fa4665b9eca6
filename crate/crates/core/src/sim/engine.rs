use serde::{Deserialize, Serialize};

use super::rng::SlotRng;
use crate::channel::{CodeSpec, PcModel};
use crate::error::{domain, Result};
use crate::stability::TrafficProfile;
use crate::throughput::{LinkProbs, LinkSet, Protocol};

/// Smallest run length accepted by [`SimConfig::new`].
pub const MIN_SLOTS: u64 = 10_000;

const IDLE_BATCHES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub protocol: Protocol,
    pub traffic: TrafficProfile,
    pub code: CodeSpec,
    pub links: LinkSet,
    pub model: PcModel,
    pub slots: u64,
    pub warmup_fraction: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(
        protocol: Protocol,
        traffic: TrafficProfile,
        code: CodeSpec,
        links: LinkSet,
        model: PcModel,
        slots: u64,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            protocol,
            traffic,
            code,
            links,
            model,
            slots,
            warmup_fraction: 0.1,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_warmup(mut self, fraction: f64) -> Result<Self> {
        self.warmup_fraction = fraction;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots < MIN_SLOTS {
            return Err(domain(format!("slots must be at least {MIN_SLOTS}, got {}", self.slots)));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(domain(format!(
                "warmup fraction must lie in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        if !self.protocol.is_batched() && self.code.batch() != 1 {
            return Err(domain(format!(
                "protocol {} does not batch; batch must be 1, got {}",
                self.protocol.name(),
                self.code.batch()
            )));
        }
        if self.traffic.is_saturated() && self.protocol != Protocol::Nc {
            return Err(domain("saturated sources are only supported for the nc protocol"));
        }
        Ok(())
    }

    /// Per-attempt success probabilities implied by the protocol.
    pub fn slot_probs(&self) -> SlotProbs {
        let (k, n, l) = (self.code.k(), self.code.n(), self.code.batch());
        let (source_bits, relay_bits) = match self.protocol {
            Protocol::Nc | Protocol::Cc => (k, k),
            Protocol::BafRelay => (k, l * k),
            Protocol::BafSource => (l * k, k),
        };
        let p = LinkProbs::evaluate(&self.links, source_bits, relay_bits, n, self.model);
        match self.protocol {
            Protocol::Nc => SlotProbs { sd: p.sd, sr: 0.0, rd: 0.0 },
            _ => SlotProbs { sd: p.sd, sr: p.sr, rd: p.rd },
        }
    }
}

/// Success probabilities of one transmission attempt on each link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotProbs {
    pub sd: f64,
    pub sr: f64,
    pub rd: f64,
}

/// Packet ledger over the whole run, warmup included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conservation {
    pub arrived: u64,
    pub delivered: u64,
    pub backlogged: u64,
}

impl Conservation {
    pub fn holds(&self) -> bool {
        self.arrived as u128 == self.delivered as u128 + self.backlogged as u128
    }
}

/// Post-warmup statistics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub delivered_bits: u128,
    /// Bits per channel use over the measured slots.
    pub empirical_throughput: f64,
    /// Time-averaged occupancy of `Q_A`, `Q_B`, `Q_AR`, `Q_BR` in packets.
    pub mean_queue: [f64; 4],
    /// Least-squares slope of the total backlog, packets per slot.
    pub drift_slope: f64,
    /// Per-source fraction of granted slots in which the source had nothing
    /// to send; 1 for a source that was never granted a slot.
    pub idle_freq: [f64; 2],
    /// Batch-means standard error of `idle_freq`.
    pub idle_stderr: [f64; 2],
    /// Mean total backlog in each quarter of the measured window.
    pub quarter_backlog: [f64; 4],
    pub measured_slots: u64,
    pub conservation: Conservation,
}

struct Stats {
    measured: u64,
    delivered_packets: u128,
    queue_sum: [u128; 4],
    // least squares on (t, backlog) with exact integer sums
    s_q: i128,
    s_tq: i128,
    quarter_sum: [u128; 4],
    granted: [[u64; IDLE_BATCHES]; 2],
    idle: [[u64; IDLE_BATCHES]; 2],
}

impl Stats {
    fn new(measured: u64) -> Self {
        Self {
            measured,
            delivered_packets: 0,
            queue_sum: [0; 4],
            s_q: 0,
            s_tq: 0,
            quarter_sum: [0; 4],
            granted: [[0; IDLE_BATCHES]; 2],
            idle: [[0; IDLE_BATCHES]; 2],
        }
    }

    fn slope(&self) -> f64 {
        let m = self.measured as i128;
        if m < 2 {
            return 0.0;
        }
        let s_t = m * (m - 1) / 2;
        let s_tt = (m - 1) * m * (2 * m - 1) / 6;
        let num = m * self.s_tq - s_t * self.s_q;
        let den = m * s_tt - s_t * s_t;
        num as f64 / den as f64
    }

    fn idle_freq(&self, i: usize) -> (f64, f64) {
        let granted: u64 = self.granted[i].iter().sum();
        let idle: u64 = self.idle[i].iter().sum();
        if granted == 0 {
            return (1.0, 0.0);
        }
        let freq = idle as f64 / granted as f64;
        let ratios: Vec<f64> = (0..IDLE_BATCHES)
            .filter(|&b| self.granted[i][b] > 0)
            .map(|b| self.idle[i][b] as f64 / self.granted[i][b] as f64)
            .collect();
        if ratios.len() < 2 {
            return (freq, f64::INFINITY);
        }
        let nb = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / nb;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (nb - 1.0);
        (freq, (var / nb).sqrt())
    }
}

/// Slot-loop parameters with the success probabilities already resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Engine {
    pub protocol: Protocol,
    pub batch: u64,
    pub probs: SlotProbs,
    /// Bits per packet.
    pub k: u64,
    pub n: u64,
}

impl Engine {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            protocol: cfg.protocol,
            batch: cfg.code.batch(),
            probs: cfg.slot_probs(),
            k: cfg.code.k(),
            n: cfg.code.n(),
        }
    }

    /// Runs the slot loop, calling `observe` after every slot with the slot
    /// index, the queue contents (`Q_A`, `Q_B`, `Q_AR`, `Q_BR`) and the slot
    /// outcome. Returns the packet ledger.
    ///
    /// Every slot consumes exactly six uniforms, in order: arrival at A,
    /// arrival at B, scheduler, source-destination, source-relay,
    /// relay-destination. Arrivals precede the service decision of the same
    /// slot.
    pub fn drive(
        &self,
        traffic: &TrafficProfile,
        slots: u64,
        seed: u64,
        mut observe: impl FnMut(u64, &[u64; 4], SlotOutcome),
    ) -> Conservation {
        let mut rng = SlotRng::new(seed);
        let probs = self.probs;
        let has_relay = self.protocol != Protocol::Nc;
        let source_need = if self.protocol == Protocol::BafSource { self.batch } else { 1 };
        let relay_need = if self.protocol == Protocol::BafRelay { self.batch } else { 1 };

        let mut q = [0u64; 4];
        let mut arrived = 0u64;
        let mut delivered = 0u64;

        for slot in 0..slots {
            let arrive_a = rng.bernoulli(traffic.lambda_a);
            let arrive_b = rng.bernoulli(traffic.lambda_b);
            let granted = if rng.bernoulli(traffic.omega_a) { 0 } else { 1 };
            let u_sd = rng.uniform();
            let u_sr = rng.uniform();
            let u_rd = rng.uniform();

            q[0] += arrive_a as u64;
            q[1] += arrive_b as u64;
            arrived += arrive_a as u64 + arrive_b as u64;

            let mut out = 0u64;
            let idle = q[granted] < source_need;
            if !idle {
                if u_sd < probs.sd {
                    q[granted] -= source_need;
                    out = source_need;
                } else if has_relay && u_sr < probs.sr {
                    q[granted] -= source_need;
                    q[2 + granted] += source_need;
                }
            } else if has_relay && q[2 + granted] >= relay_need && u_rd < probs.rd {
                q[2 + granted] -= relay_need;
                out = relay_need;
            }
            delivered += out;
            observe(
                slot,
                &q,
                SlotOutcome {
                    granted,
                    idle,
                    delivered: out,
                },
            );
        }
        Conservation {
            arrived,
            delivered,
            backlogged: q.iter().sum(),
        }
    }

    /// Queue contents after every slot.
    pub fn trace(&self, traffic: &TrafficProfile, slots: u64, seed: u64) -> Vec<[u64; 4]> {
        let mut out = Vec::with_capacity(slots as usize);
        self.drive(traffic, slots, seed, |_, q, _| out.push(*q));
        out
    }

    pub fn run(&self, traffic: &TrafficProfile, slots: u64, warmup_fraction: f64, seed: u64) -> SimReport {
        let warmup = (slots as f64 * warmup_fraction).floor() as u64;
        let measured = slots - warmup;
        let mut stats = Stats::new(measured);
        let conservation = self.drive(traffic, slots, seed, |slot, q, outcome| {
            if slot < warmup {
                return;
            }
            let t = slot - warmup;
            let backlog = q.iter().sum::<u64>();
            stats.delivered_packets += outcome.delivered as u128;
            for (acc, &x) in stats.queue_sum.iter_mut().zip(q) {
                *acc += x as u128;
            }
            stats.s_q += backlog as i128;
            stats.s_tq += t as i128 * backlog as i128;
            stats.quarter_sum[(t as u128 * 4 / measured as u128) as usize] += backlog as u128;
            let b = (t as u128 * IDLE_BATCHES as u128 / measured as u128) as usize;
            stats.granted[outcome.granted][b] += 1;
            stats.idle[outcome.granted][b] += outcome.idle as u64;
        });

        let m = measured as f64;
        let quarter_len = |j: u64| ((j + 1) * measured / 4 - j * measured / 4).max(1) as f64;
        let (fa, sa) = stats.idle_freq(0);
        let (fb, sb) = stats.idle_freq(1);
        let delivered_bits = stats.delivered_packets * self.k as u128;
        SimReport {
            delivered_bits,
            empirical_throughput: delivered_bits as f64 / (m * self.n as f64),
            mean_queue: stats.queue_sum.map(|s| s as f64 / m),
            drift_slope: stats.slope(),
            idle_freq: [fa, fb],
            idle_stderr: [sa, sb],
            quarter_backlog: [0u64, 1, 2, 3].map(|j| stats.quarter_sum[j as usize] as f64 / quarter_len(j)),
            measured_slots: measured,
            conservation,
        }
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotOutcome {
    /// 0 for source A, 1 for source B.
    pub granted: usize,
    /// The granted source had too few packets to transmit.
    pub idle: bool,
    /// Packets delivered to the destination.
    pub delivered: u64,
}

pub fn run_sim(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    Ok(Engine::from_config(config).run(&config.traffic, config.slots, config.warmup_fraction, config.seed))
}
