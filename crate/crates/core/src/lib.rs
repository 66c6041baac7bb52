//! Static Android app features to grounded functional descriptions,
//! text preprocessing and malware classification.

pub mod cache;
pub mod classify;
pub mod corpus;
pub mod features;
pub mod gateway;
pub mod hashing;
pub mod labeling;
pub mod matcher;
pub mod retrieval;
pub mod textprep;
