//! Distributed 3D real-to-complex FFT over a slab decomposition.
//!
//! A real `n0 × n1 × n2` field is split along `n0` across `p` ranks. The
//! forward transform runs three stages on every rank:
//!
//! 1. 2D r2c transforms of the `n0/p` local `n1 × n2` planes,
//! 2. a redistribution so that each rank owns `n1/p` full `n0` columns,
//! 3. 1D c2c transforms of length `n0` along those columns.
//!
//! Stage 2 comes in two flavours ([`exchange::Strategy`]): the classic
//! pack-transpose / all-to-all / unpack sequence, and a transpose-free
//! exchange where strided descriptors move data straight between the
//! column bands of the ranks' buffers. In the latter case the stage-3
//! columns end up strided in memory and are transformed with the strided
//! kernel in [`fft_core`].
//!
//! Ranks are simulated in-process by [`transport`], either on real threads
//! or under a deterministic round-robin scheduler.

pub mod dfft;
pub mod error;
pub mod exchange;
pub mod fft_core;
pub mod layout;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod transport;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Size in bytes of one complex element on the wire.
pub const COMPLEX_BYTES: u64 = std::mem::size_of::<Complex64>() as u64;
