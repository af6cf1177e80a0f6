//! Stage 1: split the input into illumination and surrogate reflectance,
//! then balance the illumination by gamma correction and an optional
//! percentile stretch.

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::filter::{guided_filter, FilterParams};
use crate::image::{percentile_pair, value_channel, PlanarImage};

/// Paired illumination L (1 channel) and surrogate reflectance (3 channels)
/// with `L * reflectance` reconstructing the input.
#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub illumination: PlanarImage,
    pub surrogate_reflectance: PlanarImage,
}

/// Estimates the illumination from the V channel in the log domain and
/// derives the surrogate reflectance.
///
/// The smoothed log-illumination is clamped up to its initial estimate so
/// that L >= V pointwise, which keeps the reflectance in [0, 1]. By default
/// the reflectance is the exact quotient I / L; the two-pass mode filters the
/// log-reflectance as well, trading the exact reconstruction for smoothness.
pub fn decompose(img: &PlanarImage, cfg: &PipelineConfig) -> Result<DecompositionResult> {
    img.require_channels(3)?;
    let v = value_channel(img)?;
    let ll0 = v.map(|x| x.max(cfg.log_floor).ln());
    let params = FilterParams::new(cfg.gf_radius, cfg.gf_epsilon)?;
    let ll = guided_filter(&ll0, &ll0, params)?;
    let ll = ll.zip_map(&ll0, f64::max)?;
    let illumination = ll.map(|x| x.exp().clamp(cfg.log_floor, 1.0));

    let surrogate_reflectance = if cfg.two_pass_decomposition {
        let mut planes = Vec::with_capacity(3);
        for c in 0..3 {
            let ii = img.extract_channel(c).map(|x| x.max(cfg.log_floor).ln());
            let rr = ii.zip_map(&ll, |i, l| i - l)?;
            let rr = guided_filter(&rr, &ll0, params)?;
            planes.push(rr.map(|x| x.exp().clamp(0.0, 1.0)));
        }
        PlanarImage::from_planes([planes.remove(0), planes.remove(0), planes.remove(0)])?
    } else {
        img.zip_broadcast(&illumination, |i, l| (i / l).clamp(0.0, 1.0))?
    };

    Ok(DecompositionResult {
        illumination,
        surrogate_reflectance,
    })
}

/// Rebuilds the image with gamma-compensated illumination: L^gamma * R.
pub fn gamma_correct(dec: &DecompositionResult, gamma: f64) -> Result<PlanarImage> {
    let l_gamma = pow_image(&dec.illumination, gamma);
    dec.surrogate_reflectance
        .zip_broadcast(&l_gamma, |r, lg| (lg * r).clamp(0.0, 1.0))
}

/// Per-pixel power with an exact identity at gamma = 1.
pub(crate) fn pow_image(img: &PlanarImage, gamma: f64) -> PlanarImage {
    if gamma == 1.0 {
        img.clone()
    } else {
        img.map(|v| v.powf(gamma))
    }
}

/// Robust per-channel contrast stretch between two nearest-rank percentiles.
///
/// Channels whose percentile span is below 1e-6 are returned unchanged.
pub fn stretch(img: &PlanarImage, lo_rank: f64, hi_rank: f64) -> Result<PlanarImage> {
    if !(lo_rank < hi_rank) {
        return Err(crate::error::Error::InvalidParam(format!(
            "stretch requires lo_rank < hi_rank, got {lo_rank} and {hi_rank}"
        )));
    }
    let mut out = img.clone();
    for c in 0..img.channels() {
        let (lo, hi) = percentile_pair(img.plane(c), lo_rank, hi_rank)?;
        let span = hi - lo;
        if span < 1e-6 {
            continue;
        }
        for v in out.plane_mut(c) {
            *v = ((*v - lo) / span).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}
