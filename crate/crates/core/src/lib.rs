//! Estimation of a constant observed through Gaussian noise and a quantizer.
//!
//! - [`quantizer`]: uniform and tabulated-level quantizers, INL/DNL, generators.
//! - [`moments`]: closed-form error/output moments and the arithmetic mean's bias.
//! - [`fisher`]: single-sample Fisher information, CRLBs, quantization efficiency.
//! - [`estimators`]: arithmetic mean, moment-based and maximum-likelihood estimators.
//! - [`simulate`]: seeded Monte Carlo harness for MSE sweeps and Fisher validation.
//! - [`ingest`]: loading of ADC capture files and estimation-error curves.

pub mod error;
pub mod estimators;
pub mod fisher;
pub mod ingest;
pub mod moments;
pub mod normal;
pub mod quantizer;
pub mod simulate;

pub use error::{Error, Result};
pub use moments::EstimationScenario;
pub use quantizer::{Quantizer, QuantizerModel, TabulatedQuantizer, UniformQuantizer};
