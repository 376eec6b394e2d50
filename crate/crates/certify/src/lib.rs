//! Certified regret for piecewise-linear auction networks.
//!
//! For a valuation profile and an agent, the agent's utility over its whole
//! misreport box is maximized exactly: the network is encoded as a
//! mixed-integer program ([`encode`]) using neuron bounds tightened by LP
//! ([`planet_bounds`]) and solved by branch-and-bound over LP relaxations
//! ([`branch_and_bound`]). The returned bound is sound even when the search
//! stops early.

pub mod bnb;
pub mod certificate;
pub mod encode;
pub mod model;
pub mod planet;

pub use bnb::{branch_and_bound, BnbOptions, BnbResult, BnbStatus, Heuristic};
pub use certificate::{certify_batch, certify_regret, Certificate, CertifyOptions};
pub use encode::{encode, ComplementarityMode, EncodeOptions, Encoding, Switch};
pub use model::{Bilinear, Expr, MipModel, Row};
pub use planet::planet_bounds;

use rcert_core::NetError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("network has smooth activations and cannot be encoded exactly")]
    NotPiecewiseLinear,
    #[error("agent {0} is out of range")]
    Agent(usize),
    #[error("a neuron bound is infinite; refusing to encode")]
    UnboundedNeuron,
    #[error("malformed encoding: {0}")]
    Encoding(String),
    #[error(transparent)]
    Net(#[from] NetError),
}
