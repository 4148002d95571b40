//! Topological barcodes of loss landscapes.
//!
//! The barcode of minima assigns to every local minimum `p` the segment
//! `[L(p), h_p]`, where `h_p` is the lowest possible peak of the loss along a
//! path from `p` to strictly lower loss. The crate estimates `h_p` by
//! optimizing sampled paths between minima with the normal component of the
//! gradient ([`pathopt`]), assembles barcodes and TO-scores ([`barcode`]),
//! extends the construction to sampled 2-simplices and saddle barcodes
//! ([`morse`]), and checks everything against grid-based sublevel-set
//! persistence ([`oracle`]).

pub mod barcode;
pub mod error;
pub mod landscape;
pub(crate) mod linalg;
pub mod morse;
pub mod oracle;
pub mod pathopt;
pub mod trainer;

pub use error::{Error, Result};
pub use landscape::{eval_grad, eval_loss, ParamVector, ScalarField};
