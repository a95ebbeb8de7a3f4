pub mod dissipation;
pub mod floquet;
pub mod model;
pub mod numerics;
pub mod perturbation;
pub mod rwa;
pub mod sweep;

pub use numerics::C64;
