pub mod ansatz;
pub mod autodiff;
pub mod checks;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod learning;
pub mod sim;

pub use ansatz::{build_model, AnsatzShape, ModelSpec, ModelVariant};
pub use config::FederationConfig;
pub use error::{Error, Result};
pub use federation::{GlobalParams, RoundRecord, Technique};
pub use sim::StateVector;
