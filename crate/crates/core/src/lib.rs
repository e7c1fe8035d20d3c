//! Group-sparse zero-attracting LMS adaptive filters whose step size and
//! shrinkage are re-optimised at every iteration from a transient model of
//! the mean-square deviation.
//!
//! * [`partition`]: group layouts, mixed norms and attractor directions.
//! * [`filter`]: the LMS / GZA-LMS / GRZA-LMS update.
//! * [`vp`]: the online step-size and shrinkage engine.
//! * [`signal`]: input processes, noise and switching plants.
//! * [`oracle`]: brute-force and Monte-Carlo checks of the model.
//! * [`harness`]: experiments, output files and the CLI.

pub mod error;
pub mod filter;
pub mod harness;
pub mod oracle;
pub mod partition;
pub mod signal;
pub mod vp;

pub use error::{Error, Result};
pub use filter::{FilterConfig, FilterState};
pub use partition::{AttractorMode, GroupPartition};
pub use vp::{VpConfig, VpState};
