//! Headless engine for immersive data-storytelling packs.
//!
//! This crate holds everything that does not touch the filesystem or the
//! network: the story-pack document model and validator, the tabular data
//! store, the spatial scene registry, the data-binding language, the
//! deterministic narrative runtime, and mesh decimation / light baking.
//! IO, the CLI and the preview service live in the `recit` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod binding;
pub mod data;
pub mod diag;
pub mod doc;
pub mod fmt;
pub mod geom;
pub mod mesh;
pub mod narration;
pub mod registry;
pub mod runtime;
pub mod story;

pub use diag::{Code, Diagnostic, Severity};
pub use geom::{Aabb, Quat, Ray, Vec3};
