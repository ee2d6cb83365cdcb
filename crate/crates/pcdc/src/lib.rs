//! Command-line tooling around `pcdc-core`: the container format, method
//! dispatch, the external predictor client, fixtures and the bench harness.

pub mod bench;
pub mod container;
pub mod external;
pub mod fixtures;
pub mod formats;
pub mod method;
pub mod report;
