//! Mixed-numerology MU-MIMO downlink simulator: numerology alignment,
//! tap-delay-line MISO channels, rational channel resampling, CB and SLNR
//! precoding, a multi-numerology OFDM chain, and EVM/capacity analysis.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod numerology;
pub mod phy;
pub mod precoding;
pub mod resample;
pub mod sim;

pub use error::{Error, Result};
