//! Sampling-and-reconstruction toolkit on [0,1]^d: sequency-ordered Walsh and
//! Fourier measurements, Haar and boundary-corrected Daubechies reconstruction
//! spaces, subspace-angle stable sampling rates, and three reconstruction
//! methods (least-squares generalized sampling, PBDW correction, l1-consistent
//! coefficient recovery).

pub mod approx;
pub mod error;
pub mod gramian;
pub mod grid;
pub mod l1;
pub mod pgm;
pub mod recon;
pub mod signals;
pub mod walsh;
pub mod wavelet;

pub use error::{Error, Result};

pub use approx::{truncation_error, DecayReport, TruncationBasis};
pub use gramian::{AngleReport, CrossGramian, SamplingFamily, SamplingSpec, SsrOutcome};
pub use grid::FineGridFunction;
pub use l1::{DenseOp, L1Params, L1Report, MeasurementOp};
pub use recon::{ReconstructionResult, SampleValues, SampleVector};
pub use signals::TestSignal;
pub use walsh::DyadicPoint;
pub use wavelet::{BasisFunctionId, BasisKind, BasisSpec, Family, OrthoBasis, Representation};

