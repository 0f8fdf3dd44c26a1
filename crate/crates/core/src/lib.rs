//! Multi-view specular-to-diffuse image translation.

pub mod cli;
pub mod correspond;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod image;
pub mod inference;
pub mod losses;
pub mod network;
pub mod training;

pub use error::{Error, Result};
pub use image::ImageTensor;
