pub mod attack;
pub mod error;
pub mod graph;
pub mod net;
pub mod paillier;
pub mod party;
pub mod protocol;
pub mod secure_compare;
pub mod secure_conflict;
pub mod tabu;
pub mod transcript;

pub use error::{Error, Result};
