//! Physics, channel and optimization primitives for stacked intelligent
//! metasurface (SIM) assisted multi-user MISO downlinks.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: dense complex linear algebra helpers.
//! - [`geometry`]: SIM layout, Rayleigh-Sommerfeld propagation and the
//!   cascaded wave-domain response.
//! - [`channel`]: user placement, path loss and spatially correlated fading.
//! - [`metrics`]: SINR, sum rate and its analytic phase gradient.
//! - [`baselines`]: water-filling, random/codebook SIM configurations and
//!   digital ZF/MMSE precoding without a SIM.
//! - [`ao`]: alternating optimization of phases and powers.

pub mod ao;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod numerics;
pub mod rng;
pub mod units;

pub use error::{Error, Result};
pub use numerics::CMatrix;
pub use num_complex::Complex64;
