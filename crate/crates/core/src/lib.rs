//! Auction mechanisms as small feedforward networks.
//!
//! [`net`] evaluates and differentiates the network, [`bounds`] propagates
//! input boxes through it, [`train`] runs augmented-Lagrangian training
//! against gradient-based misreports, and [`io`] persists models, datasets
//! and configs.

pub mod activation;
pub mod bounds;
pub mod data;
pub mod error;
pub mod io;
pub mod net;
pub mod train;

pub use activation::{hard_sigmoid, sparsemax, sparsemax_jacobian};
pub use bounds::{ibp_bounds, stability_penalty, InputBox, LayerBounds, NeuronBounds};
pub use data::Dataset;
pub use error::{IoError, NetError, TrainError};
pub use net::{
    utility, Activation, AuctionConfig, AuctionNet, BidProfile, DenseLayer, IrMode, NetGradient,
    Outcome, Trace,
};
