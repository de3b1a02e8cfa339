//! Tensor-network compressed sensing.
//!
//! A matrix-product-state Born machine is trained on a class of images. An
//! image is then communicated by sending a small, well-chosen subset of its
//! pixels: the receiver projects the Born machine onto those pixels and reads
//! the remaining ones off the measured state.
//!
//! * [`mps`]: the state representation and its linear algebra.
//! * [`feature_map`]: pixels to qubits and back.
//! * [`trainer`]: NLL training of the Born machine.
//! * [`sampling`]: choosing which pixels to send, and q-sparsity.
//! * [`codec`]: encoding, decoding, classification, and the encrypted protocol.
//! * [`metrics`] and [`oracle`]: PSNR, the `N_f` estimate, and exact checks.
//! * [`data`] and [`bench`]: datasets, persistence, and the benchmark harness.

pub mod bench;
pub mod codec;
pub mod data;
pub mod error;
pub mod feature_map;
pub mod known_states;
pub mod metrics;
pub mod mps;
pub mod oracle;
pub mod sampling;
pub mod trainer;

pub use error::{Result, TncsError};
pub use feature_map::{Image, PixelMap};
pub use mps::{DensityMatrix1, Mps, QubitState};
