//! Delay-phase hybrid precoding for wideband THz massive MIMO.
//!
//! The crate generates beam-split cluster channels, builds phase and TTD delay
//! codebooks whose per-subcarrier measurement matrices track the split beams,
//! and designs hybrid precoders with sparse-recovery solvers:
//!
//! * [`sparse::essp`]: simultaneous OMP over all subcarriers with
//!   frequency-dependent atoms.
//! * [`sparse::lce_ssp`]: non-iterative, hierarchical, partial-subcarrier
//!   variant of the same selection.
//! * [`sparse::ssp_freq_independent`]: phase-shifter-only baseline.
//!
//! [`bench`] drives Monte-Carlo sweeps and writes CSV/JSON results; the
//! `dpp-bench` binary is a thin CLI over it.

pub mod bench;
pub mod channel;
pub mod codebook;
pub mod config;
pub mod error;
pub mod linalg;
pub mod multiuser;
pub mod precoder;
pub mod selftest;
pub mod sparse;

pub use error::{Error, Result};
