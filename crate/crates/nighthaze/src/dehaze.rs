//! Stage 3: dark-channel transmission, pointwise environmental light and the
//! final haze removal.

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::filter::{guided_filter, window_argmax_plane, window_min_plane, FilterParams};
use crate::image::{value_channel, PlanarImage};

/// Transmission map, clamped to [t_floor, 1].
#[derive(Debug, Clone)]
pub struct Transmission {
    pub t: PlanarImage,
}

/// Pointwise environmental light remaining after color correction, in (0, 1].
#[derive(Debug, Clone)]
pub struct EnvironmentalLight {
    pub a: PlanarImage,
}

/// Per-pixel minimum over channels, then over the local patch.
pub fn dark_channel(img: &PlanarImage, radius: usize) -> Result<PlanarImage> {
    img.require_channels(3)?;
    let n = img.pixel_count();
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let channel_min: Vec<f64> = (0..n).map(|i| r[i].min(g[i]).min(b[i])).collect();
    let mut out = vec![0.0; n];
    window_min_plane(&channel_min, img.width(), img.height(), radius, &mut out);
    PlanarImage::new(img.width(), img.height(), 1, out)
}

/// Environmental light: in each patch, take the color of the pixel with the
/// brightest dark channel (row-major first occurrence on ties), then smooth
/// each channel with a guided filter driven by the V channel.
pub fn estimate_env_light(i_tilde: &PlanarImage, cfg: &PipelineConfig) -> Result<EnvironmentalLight> {
    let raw = env_light_raw(i_tilde, cfg.patch_radius)?;
    let guide = value_channel(i_tilde)?;
    let params = FilterParams::new(cfg.gf_radius, cfg.gf_epsilon)?;
    let mut planes = Vec::with_capacity(3);
    for c in 0..3 {
        let smoothed = guided_filter(&raw.extract_channel(c), &guide, params)?;
        planes.push(smoothed.map(|v| v.clamp(cfg.log_floor, 1.0)));
    }
    Ok(EnvironmentalLight {
        a: PlanarImage::from_planes([planes.remove(0), planes.remove(0), planes.remove(0)])?,
    })
}

/// Unsmoothed local environmental light, exposed for the estimation oracle.
pub(crate) fn env_light_raw(i_tilde: &PlanarImage, patch_radius: usize) -> Result<PlanarImage> {
    i_tilde.require_channels(3)?;
    let dc = dark_channel(i_tilde, patch_radius)?;
    let (w, h) = (i_tilde.width(), i_tilde.height());
    let argmax = window_argmax_plane(dc.plane(0), w, h, patch_radius);
    let n = w * h;
    let mut data = Vec::with_capacity(3 * n);
    for c in 0..3 {
        let plane = i_tilde.plane(c);
        data.extend(argmax.iter().map(|&idx| plane[idx]));
    }
    PlanarImage::new(w, h, 3, data)
}

/// Dark-channel transmission of the color-corrected image, refined by a
/// guided filter and clamped to [t_floor, 1].
pub fn estimate_transmission(
    i_tilde: &PlanarImage,
    env: &EnvironmentalLight,
    cfg: &PipelineConfig,
) -> Result<Transmission> {
    let raw = transmission_raw(i_tilde, env, cfg)?;
    let guide = value_channel(i_tilde)?;
    let params = FilterParams::new(cfg.gf_radius, cfg.gf_epsilon)?;
    let refined = guided_filter(&raw, &guide, params)?;
    Ok(Transmission {
        t: refined.map(|v| v.clamp(cfg.t_floor, 1.0)),
    })
}

/// Raw transmission before refinement: 1 - omega * dark(I / A).
pub(crate) fn transmission_raw(
    i_tilde: &PlanarImage,
    env: &EnvironmentalLight,
    cfg: &PipelineConfig,
) -> Result<PlanarImage> {
    i_tilde.require_channels(3)?;
    i_tilde.require_same_dims(&env.a)?;
    let ratio = i_tilde.zip_map(&env.a, |i, a| i / a)?;
    let dc = dark_channel(&ratio, cfg.patch_radius)?;
    Ok(dc.map(|d| 1.0 - cfg.omega * d))
}

/// Inverts the scattering model: J = (I - A) / t + A, clamped to [0, 1].
pub fn recover(
    i_tilde: &PlanarImage,
    env: &EnvironmentalLight,
    transmission: &Transmission,
) -> Result<PlanarImage> {
    Ok(recover_raw(i_tilde, env, transmission)?.map(|v| v.clamp(0.0, 1.0)))
}

pub(crate) fn recover_raw(
    i_tilde: &PlanarImage,
    env: &EnvironmentalLight,
    transmission: &Transmission,
) -> Result<PlanarImage> {
    i_tilde.require_channels(3)?;
    i_tilde.require_same_dims(&env.a)?;
    i_tilde.require_same_dims(&transmission.t)?;
    transmission.t.require_channels(1)?;
    let n = i_tilde.pixel_count();
    let t = transmission.t.plane(0);
    let mut data = Vec::with_capacity(3 * n);
    for c in 0..3 {
        let i = i_tilde.plane(c);
        let a = env.a.plane(c);
        data.extend((0..n).map(|k| (i[k] - a[k]) / t[k] + a[k]));
    }
    PlanarImage::new(i_tilde.width(), i_tilde.height(), 3, data)
}
