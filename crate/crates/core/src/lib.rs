// `!(x > y)` is used on purpose where NaN must fall into the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod babf;
pub mod channel;
pub mod codes;
pub mod despread;
pub mod equalize;
pub mod error;
pub mod frontend;
pub mod linalg;
pub mod metrics;
pub mod num;
pub mod runner;
pub mod signal;
pub mod waveform;

pub use error::{Error, Result};
pub use num::Real;

// f64 is what the simulator runs on; f32 variants are for memory-bound capture experiments
pub type SampleStream = signal::SampleStream<f64>;
pub type SampleStream32 = signal::SampleStream<f32>;
pub type VirtualChainSet = despread::VirtualChainSet<f64>;
pub type VirtualChainSet32 = despread::VirtualChainSet<f32>;
pub type C64 = num_complex::Complex<f64>;
