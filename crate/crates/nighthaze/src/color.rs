//! Stage 2: estimate the incident-light color per channel and divide it out.

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::filter::{guided_filter, window_max, FilterParams};
use crate::illum::pow_image;
use crate::image::PlanarImage;

/// Per-channel chromatic gain of the incident light, in [eta_floor, 1].
#[derive(Debug, Clone)]
pub struct IncidentLightColor {
    pub eta: PlanarImage,
}

/// Lower bound of the incident-light color from patchwise maxima:
/// max(I_hat) / max(L^gamma) over the local patch, per channel.
pub fn eta_lower_bound(
    i_hat: &PlanarImage,
    illumination: &PlanarImage,
    cfg: &PipelineConfig,
) -> Result<PlanarImage> {
    i_hat.require_channels(3)?;
    illumination.require_channels(1)?;
    i_hat.require_same_dims(illumination)?;

    let l_gamma = pow_image(illumination, cfg.gamma);
    let den = window_max(&l_gamma, cfg.patch_radius)?;
    let mut planes = Vec::with_capacity(3);
    for c in 0..3 {
        let num = window_max(&i_hat.extract_channel(c), cfg.patch_radius)?;
        planes.push(num.zip_map(&den, |n, d| {
            (n / d.max(cfg.log_floor)).clamp(cfg.log_floor, 1.0)
        })?);
    }
    PlanarImage::from_planes([planes.remove(0), planes.remove(0), planes.remove(0)])
}

/// Smooths the raw lower bound with a guided filter (guide: grayscale of the
/// illumination-compensated image) and amplifies it toward the true color.
///
/// The amplification multiplies each channel by m^(gamma0 - 1) where m is the
/// channel mean, per pixel by default or one global factor when configured.
pub fn refine_eta(
    raw: &PlanarImage,
    guide: &PlanarImage,
    cfg: &PipelineConfig,
) -> Result<IncidentLightColor> {
    raw.require_channels(3)?;
    guide.require_channels(1)?;
    raw.require_same_dims(guide)?;

    let params = FilterParams::new(cfg.gf_radius, cfg.gf_epsilon)?;
    let mut planes = Vec::with_capacity(3);
    for c in 0..3 {
        planes.push(guided_filter(&raw.extract_channel(c), guide, params)?);
    }
    let filtered =
        PlanarImage::from_planes([planes.remove(0), planes.remove(0), planes.remove(0)])?;
    let eta = amplify(&filtered, cfg)?;
    Ok(IncidentLightColor { eta })
}

/// Amplification applied to the filtered lower bound, before the final clamp.
fn amplify(filtered: &PlanarImage, cfg: &PipelineConfig) -> Result<PlanarImage> {
    let n = filtered.pixel_count();
    let (r, g, b) = (filtered.plane(0), filtered.plane(1), filtered.plane(2));
    let factor_at = |m: f64| amplification_factor(m, cfg.gamma0, cfg.log_floor);

    let mut out = filtered.clone();
    if cfg.global_amplification {
        let grand_mean = filtered.data().iter().sum::<f64>() / filtered.data().len() as f64;
        let f = factor_at(grand_mean);
        for v in out.data_mut() {
            *v = (*v * f).clamp(cfg.eta_floor, 1.0);
        }
    } else {
        for c in 0..3 {
            let plane = out.plane_mut(c);
            for i in 0..n {
                let m = (r[i] + g[i] + b[i]) / 3.0;
                plane[i] = (plane[i] * factor_at(m)).clamp(cfg.eta_floor, 1.0);
            }
        }
    }
    Ok(out)
}

/// m^(gamma0) / m, guarded against a vanishing mean.
fn amplification_factor(mean: f64, gamma0: f64, floor: f64) -> f64 {
    mean.max(floor).powf(gamma0 - 1.0)
}

/// Divides the incident-light color out of the compensated image.
pub fn color_correct(
    i_hat: &PlanarImage,
    eta: &IncidentLightColor,
    cfg: &PipelineConfig,
) -> Result<PlanarImage> {
    i_hat.require_same_dims(&eta.eta)?;
    i_hat.zip_map(&eta.eta, |v, e| (v / e.max(cfg.eta_floor)).clamp(0.0, 1.0))
}
