#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod density;
pub mod error;
pub mod kernel;
pub mod paleywiener;
pub mod profile;
pub mod quadrature;
pub mod sampling;
pub mod schrodinger;
pub mod sturm;

pub use error::{Error, Result};
pub use kernel::{KernelModel, Mode, SpectralQuadrature, SpectralSet};
pub use num_complex::Complex64 as C64;
pub use profile::{BandwidthProfile, BlendShape, Interval, ProfileSpec};
pub use schrodinger::{Potential, ScatteringData};
pub use paleywiener::VarBandFunction;
pub use sampling::SampleSet;
