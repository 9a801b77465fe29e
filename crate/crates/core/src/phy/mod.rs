//! Transmit/receive chain: QAM mapping, per-group precoding and OFDM
//! modulation, time-domain superposition, channel and noise, and per-user
//! demodulation with scalar MMSE equalization.

pub mod dump;
mod ofdm;
pub mod qam;

pub use ofdm::{
    apply_channel, check_delay_spread, demodulate_user, equalize, modulate_group, noise_variance, superpose,
    AntennaFrame, GroupLayout, GroupPayload,
};
pub use qam::{qam_demap, qam_map, Constellation};
