//! Semi-supervised background/foreground classification of video object
//! instances by interpolating labels over an instance graph.
//!
//! Instances are described by motion, intensity and texture features,
//! linked into a k-nearest-neighbour graph, and labelled from a small
//! sampled subset with a Sobolev-regularized interpolant. The guide in
//! `book/` walks through each stage.

pub mod cg;
pub mod error;
pub mod experiment;
pub mod features;
pub mod frame;
pub mod graph;
pub mod io;
pub mod labeling;
pub mod mask;
pub mod pipeline;
pub mod sampling;
pub mod sobolev;
pub mod spectral;
mod svd;
pub mod synthetic;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/sobolev.md")]
    mod sobolev {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/labeling.md")]
    mod labeling {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
