//! Authorized keyword search over role-based encrypted data shared across
//! organizations.
//!
//! Authorities agree on a common secret, derive role parameters along each
//! organization's role hierarchy and issue keys. Owners encrypt documents
//! under a role set and a keyword set; users build trapdoors from their role
//! keys; the cloud authenticates the user, tests keywords with proxy
//! re-encryption keys and partially decrypts matches.

pub mod agreement;
pub mod authority;
pub mod client;
pub mod cloud;
pub mod error;
pub mod hierarchy;
pub mod owner;
pub mod pairing;
pub mod role_manager;
pub mod telemetry;
pub mod wire;

pub use error::{Error, Result};
