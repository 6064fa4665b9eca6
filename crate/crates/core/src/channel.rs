//! AWGN finite-blocklength channel model.
//!
//! A link is described by its linear SNR, from which the Shannon capacity
//! `C` (bits per channel use) and the channel dispersion `V` (bits² per
//! channel use) follow. Decoding success for a `b`-bit payload over `n`
//! channel uses is approximated by the normal approximation
//! `1 - Q((nC - b) / sqrt(nV))`, optionally with the `0.5 log2 n` third-order
//! correction added to the numerator.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::qfunc::q_function;

/// One AWGN link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    snr: f64,
    capacity: f64,
    dispersion: f64,
}

impl ChannelParams {
    /// Builds a link from a linear (not dB) SNR.
    pub fn new(snr: f64) -> Result<Self> {
        if !snr.is_finite() || snr <= 0.0 {
            return Err(domain(format!("snr must be positive and finite, got {snr}")));
        }
        let log2e = std::f64::consts::LOG2_E;
        let capacity = 0.5 * (1.0 + snr).log2();
        let dispersion = (snr / 2.0) * (snr + 2.0) / ((snr + 1.0) * (snr + 1.0)) * log2e * log2e;
        Ok(Self {
            snr,
            capacity,
            dispersion,
        })
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// Capacity in bits per channel use.
    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Dispersion in bits² per channel use.
    pub fn dispersion(&self) -> f64 {
        self.dispersion
    }
}

/// Alias kept for callers that prefer the free-function form.
pub fn make_channel(snr: f64) -> Result<ChannelParams> {
    ChannelParams::new(snr)
}

/// Packet size `k`, blocklength `n` and batch multiplicity `L` of one codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSpec {
    k: u64,
    n: u64,
    batch: u64,
}

impl CodeSpec {
    pub fn new(k: u64, n: u64, batch: u64) -> Result<Self> {
        if k == 0 || n == 0 || batch == 0 {
            return Err(domain(format!(
                "code parameters must be positive, got k={k}, n={n}, L={batch}"
            )));
        }
        if k.checked_mul(batch).is_none() {
            return Err(domain("payload L*k overflows"));
        }
        Ok(Self { k, n, batch })
    }

    /// Single-packet code (`L = 1`).
    pub fn single(k: u64, n: u64) -> Result<Self> {
        Self::new(k, n, 1)
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn batch(&self) -> u64 {
        self.batch
    }

    /// Bits carried by one codeword, `L * k`.
    pub fn payload_bits(&self) -> u64 {
        self.k * self.batch
    }
}

/// Which normal approximation of the success probability to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcModel {
    /// `1 - Q((nC - b)/sqrt(nV))`; pessimistic, well behaved for small `n`.
    #[default]
    SecondOrder,
    /// Adds `0.5 log2 n` to the numerator.
    ThirdOrder,
}

impl PcModel {
    pub fn name(&self) -> &'static str {
        match self {
            PcModel::SecondOrder => "second",
            PcModel::ThirdOrder => "third",
        }
    }
}

/// Normalized margin `(nC - b) / sqrt(nV)`.
pub fn chi(bits: f64, n: u64, channel: &ChannelParams) -> f64 {
    let n = n as f64;
    (n * channel.capacity - bits) / (n * channel.dispersion).sqrt()
}

fn margin(bits: f64, n: u64, channel: &ChannelParams, model: PcModel) -> f64 {
    match model {
        PcModel::SecondOrder => chi(bits, n, channel),
        PcModel::ThirdOrder => {
            let nf = n as f64;
            (nf * channel.capacity - bits + 0.5 * nf.log2()) / (nf * channel.dispersion).sqrt()
        }
    }
}

/// Probability that a `bits`-bit payload is decoded over `n` channel uses.
///
/// Evaluated as `Q(-margin)` so that both tails keep full relative precision.
pub fn success_prob(bits: f64, n: u64, channel: &ChannelParams, model: PcModel) -> f64 {
    q_function(-margin(bits, n, channel, model))
}

/// Block error probability, `1 - success_prob`.
pub fn error_prob(bits: f64, n: u64, channel: &ChannelParams, model: PcModel) -> f64 {
    1.0 - success_prob(bits, n, channel, model)
}
