//! Adversarial patch search against a differentiable object detector.
//!
//! The perturbation is factored into a texture layer and a mask layer built
//! from cosine-relaxed rectangle primitives. Mask parameters and texture are
//! optimized alternately under an area penalty and a texture-norm penalty
//! whose weights grow every step.
//!
//! Module map:
//! - [`image`], [`bbox`], [`rng`]: pixel grids, box geometry, NMS, seeding, PPM I/O
//! - [`mask`]: rectangle primitives, mask rendering, area loss, analytic gradients
//! - [`detector`]: detector contract, toy anchor detector, scene generator, target boxes
//! - [`attack`]: attack losses, alternating search, fixed-position baselines
//! - [`eval`]: success criteria, ASR/MAR/texture distance, patch detector (ADA)
//! - [`config`]: plain-text key-value configuration files

pub mod attack;
pub mod bbox;
pub mod config;
pub mod detector;
pub mod error;
pub mod eval;
pub mod image;
pub mod mask;
pub mod rng;

pub use error::{Error, Result};
