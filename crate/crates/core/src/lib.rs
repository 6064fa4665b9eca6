//! Finite-blocklength analysis of TDMA multiple-access networks with and
//! without a cognitive relay.
//!
//! * [`channel`]: AWGN capacity, dispersion and normal-approximation success
//!   probabilities.
//! * [`approx`]: linear and quadratic surrogates with closed-form optima.
//! * [`throughput`]: protocol throughputs and their maximization.
//! * [`stability`]: closed-form stability regions.
//! * [`sim`]: seeded slot-level Monte Carlo simulation of the same protocols.

pub mod approx;
pub mod channel;
mod error;
pub mod qfunc;
pub mod sim;
pub mod stability;
pub mod throughput;

pub use channel::{chi, error_prob, make_channel, success_prob, ChannelParams, CodeSpec, PcModel};
pub use error::{Error, Result};
pub use stability::TrafficProfile;
pub use throughput::{LinkSet, Protocol, RelayArm};
