//! Conformal embedding flows.
//!
//! An injective flow `x = g(h(z))` where `h` is an ordinary bijective flow on
//! the latent space and `g` is a *conformal* embedding, `J_gᵀJ_g = λ²(u)·I`.
//! Because the embedding only rescales angles, the density on its image is
//! exact and cheap: `log p(x) = log p(z) − log|det J_h| − m·log λ(u)`.

pub mod bijective;
pub mod conformal;
pub mod data;
mod error;
pub mod flow;
pub mod linalg;
pub mod par;
pub mod train;
pub mod verify;

pub use error::{CefError, Result};
