//! Restoration of images captured in nighttime haze.
//!
//! Nighttime hazy photographs suffer from three coupled degradations:
//! non-uniform illumination from artificial light sources, a color cast from
//! the light-source chromaticity, and the scattering veil of the haze itself.
//! This crate restores such images in three sequential stages:
//!
//! 1. [`illum`] — decompose into illumination and surrogate reflectance,
//!    brighten with gamma correction, optionally stretch;
//! 2. [`color`] — estimate the incident-light color per pixel and divide it
//!    out;
//! 3. [`dehaze`] — estimate pointwise environmental light and transmission
//!    with the dark-channel prior and invert the scattering model.
//!
//! Every windowed kernel ([`filter`]) runs in time linear in the pixel count
//! and independent of the window radius. [`synth`] generates ground-truthed
//! nighttime hazy scenes for quantitative evaluation with [`metrics`].

pub mod color;
pub mod config;
pub mod dehaze;
pub mod error;
pub mod filter;
pub mod illum;
pub mod image;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod synth;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use image::PlanarImage;
