pub mod config;
pub mod diophantine;
pub mod error;
pub mod interval;
pub mod lambda_set;
pub mod lattice;
pub mod nls_sim;
pub mod normal_form;
pub mod ode;
pub mod pipeline;
pub mod resonance;
pub mod scalar;
pub mod toy_model;

pub use error::{Error, Result};

pub use num_complex::Complex;
pub use scalar::Real;

pub type C64 = Complex<f64>;
pub type C32 = Complex<f32>;
pub type State = lattice::FourierState<f64>;
pub type State32 = lattice::FourierState<f32>;
pub type ToyTrajectory64 = toy_model::ToyTrajectory<f64>;
