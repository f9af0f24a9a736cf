//! Base-station pricing strategies.

pub mod differentiated;
pub mod uniform;
