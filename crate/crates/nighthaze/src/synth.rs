//! Ground-truthed synthetic nighttime hazy scenes from a clear image plus a
//! disparity map, and the polynomial illumination-compensation alternative
//! used in quantitative comparisons.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::filter::{guided_filter, FilterParams};
use crate::image::{value_channel, PlanarImage};

/// t = 0.8 * d: transmission from the normalized disparity.
pub const TRANSMISSION_FACTOR: f64 = 0.8;

/// Intensity floor before logs and divisions in the generator.
const LOG_FLOOR: f64 = 1.0 / 255.0;

/// Scene generation settings.
///
/// Defaults: attenuation beta 0.8, scattering mix alpha 0.5, yellow light
/// (1, 1, 0.3), smoothing patch radius 16 with a large regularization of 0.1.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub beta: f64,
    pub alpha: f64,
    pub light_color: [f64; 3],
    pub env_patch_radius: usize,
    pub env_gf_epsilon: f64,
    pub focal_scale: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            beta: 0.8,
            alpha: 0.5,
            light_color: [1.0, 1.0, 0.3],
            env_patch_radius: 16,
            env_gf_epsilon: 0.1,
            focal_scale: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParam("alpha must be in (0, 1)".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParam("beta must be in (0, 1)".into()));
        }
        for (i, &c) in self.light_color.iter().enumerate() {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::InvalidParam(format!(
                    "light_color[{i}] must be in (0, 1], got {c}"
                )));
            }
        }
        if self.env_patch_radius < 1 {
            return Err(Error::InvalidParam("env_patch_radius must be >= 1".into()));
        }
        if !(self.env_gf_epsilon > 0.0) {
            return Err(Error::InvalidParam("env_gf_epsilon must be > 0".into()));
        }
        if !(self.focal_scale > 0.0) {
            return Err(Error::InvalidParam("focal_scale must be > 0".into()));
        }
        Ok(())
    }

    /// Sets one field from its config-file key (`synth_` prefix stripped by
    /// the caller).
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::InvalidConfigValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        match key {
            "beta" => self.beta = value.parse().map_err(|_| bad())?,
            "alpha" => self.alpha = value.parse().map_err(|_| bad())?,
            "light_color" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|p| p.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad())?;
                if parts.len() != 3 {
                    return Err(bad());
                }
                self.light_color = [parts[0], parts[1], parts[2]];
            }
            "env_patch_radius" => self.env_patch_radius = value.parse().map_err(|_| bad())?,
            "env_gf_epsilon" => self.env_gf_epsilon = value.parse().map_err(|_| bad())?,
            "focal_scale" => self.focal_scale = value.parse().map_err(|_| bad())?,
            _ => return Err(Error::UnknownConfigKey(key.to_string())),
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "beta = {}\nalpha = {}\nlight_color = {},{},{}\nenv_patch_radius = {}\nenv_gf_epsilon = {}\nfocal_scale = {}\n",
            self.beta,
            self.alpha,
            self.light_color[0],
            self.light_color[1],
            self.light_color[2],
            self.env_patch_radius,
            self.env_gf_epsilon,
            self.focal_scale,
        )
    }
}

/// Everything the generator knows about one scene, ground truth included.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    /// The clear image, used as the reflectance.
    pub reflectance: PlanarImage,
    /// Hole-filled, max-normalized disparity.
    pub disparity: PlanarImage,
    /// t = 0.8 * disparity.
    pub transmission: PlanarImage,
    /// L = 1 - beta * distance.
    pub illumination: PlanarImage,
    /// Light-source color.
    pub eta_true: [f64; 3],
    /// Environmental-light color: B / L per channel.
    pub sigma_true: PlanarImage,
    /// Environmental light B.
    pub env_light: PlanarImage,
    /// The synthesized nighttime hazy image.
    pub hazy: PlanarImage,
}

/// Fills zero-valued disparity holes from the nearest valid pixel
/// (multi-source BFS, deterministic scan order). Errors when every pixel
/// is a hole.
pub fn fill_disparity_holes(disparity: &PlanarImage) -> Result<PlanarImage> {
    disparity.require_channels(1)?;
    let (w, h) = (disparity.width(), disparity.height());
    let mut data = disparity.plane(0).to_vec();
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut filled = vec![false; w * h];
    for (i, &v) in data.iter().enumerate() {
        if v > 0.0 {
            filled[i] = true;
            queue.push_back(i);
        }
    }
    if queue.is_empty() {
        return Err(Error::DegenerateDisparity);
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        let mut visit = |j: usize, filled: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
            if !filled[j] {
                data[j] = data[i];
                filled[j] = true;
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1, &mut filled, &mut queue);
        }
        if x + 1 < w {
            visit(i + 1, &mut filled, &mut queue);
        }
        if y > 0 {
            visit(i - w, &mut filled, &mut queue);
        }
        if y + 1 < h {
            visit(i + w, &mut filled, &mut queue);
        }
    }
    PlanarImage::new(w, h, 1, data)
}

/// Normalized distance of every scene point from a light source at the
/// origin, via a pinhole camera with focal length `focal_scale * width`.
///
/// Depth is Z = 1/d; lateral coordinates scale with Z; the output is the
/// Euclidean distance normalized by its maximum.
pub fn scene_distance(disparity: &PlanarImage, focal_scale: f64) -> Result<PlanarImage> {
    if !(focal_scale > 0.0) {
        return Err(Error::InvalidParam(format!(
            "focal_scale must be > 0, got {focal_scale}"
        )));
    }
    let d = fill_disparity_holes(disparity)?;
    let (w, h) = (d.width(), d.height());
    let (wf, hf) = (w as f64, h as f64);
    let mut dist = vec![0.0; w * h];
    let plane = d.plane(0);
    for y in 0..h {
        for x in 0..w {
            let z = 1.0 / plane[y * w + x];
            let sx = (x as f64 - wf / 2.0) * z / (focal_scale * wf);
            let sy = (y as f64 - hf / 2.0) * z / (focal_scale * wf);
            dist[y * w + x] = (sx * sx + sy * sy + z * z).sqrt();
        }
    }
    let max = dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in &mut dist {
        *v /= max;
    }
    PlanarImage::new(w, h, 1, dist)
}

/// Generates one scene from a clear image and a disparity map.
///
/// The scattered light mixes incident and reflected components
/// (S = L*eta*(alpha + (1-alpha)*R)) and is smoothed into the environmental
/// light with a guided filter; the hazy image follows the forward scattering
/// model exactly, which `generate` self-checks.
pub fn generate(
    reflectance: &PlanarImage,
    disparity: &PlanarImage,
    cfg: &SynthConfig,
) -> Result<SyntheticScene> {
    cfg.validate()?;
    reflectance.require_channels(3)?;
    reflectance.require_same_dims(disparity)?;

    let filled = fill_disparity_holes(disparity)?;
    let max = filled.max_value();
    let disparity = filled.map(|v| v / max);

    let dis = scene_distance(&disparity, cfg.focal_scale)?;
    let illumination = dis.map(|v| 1.0 - cfg.beta * v);
    let transmission = disparity.map(|v| TRANSMISSION_FACTOR * v);

    // Scattered light: alpha parts incident plus (1 - alpha) parts reflected.
    let n = reflectance.pixel_count();
    let l = illumination.plane(0);
    let mut scatter_planes = Vec::with_capacity(3);
    for c in 0..3 {
        let r = reflectance.plane(c);
        let eta = cfg.light_color[c];
        let data: Vec<f64> = (0..n)
            .map(|i| l[i] * eta * (cfg.alpha + (1.0 - cfg.alpha) * r[i]))
            .collect();
        scatter_planes.push(PlanarImage::new(reflectance.width(), reflectance.height(), 1, data)?);
    }
    let scatter = PlanarImage::from_planes([
        scatter_planes.remove(0),
        scatter_planes.remove(0),
        scatter_planes.remove(0),
    ])?;

    let guide = value_channel(&scatter)?;
    let params = FilterParams::new(cfg.env_patch_radius, cfg.env_gf_epsilon)?;
    let mut env_planes = Vec::with_capacity(3);
    for c in 0..3 {
        let smoothed = guided_filter(&scatter.extract_channel(c), &guide, params)?;
        env_planes.push(smoothed.map(|v| v.clamp(0.0, 1.0)));
    }
    let env_light =
        PlanarImage::from_planes([env_planes.remove(0), env_planes.remove(0), env_planes.remove(0)])?;

    let sigma_true = env_light.zip_broadcast(&illumination, |b, l| b / l.max(LOG_FLOOR))?;

    let t = transmission.plane(0);
    let mut hazy_data = Vec::with_capacity(3 * n);
    for c in 0..3 {
        let r = reflectance.plane(c);
        let b = env_light.plane(c);
        let eta = cfg.light_color[c];
        hazy_data.extend((0..n).map(|i| l[i] * eta * r[i] * t[i] + b[i] * (1.0 - t[i])));
    }
    let hazy = PlanarImage::new(reflectance.width(), reflectance.height(), 3, hazy_data)?;

    let scene = SyntheticScene {
        reflectance: reflectance.clone(),
        disparity,
        transmission,
        illumination,
        eta_true: cfg.light_color,
        sigma_true,
        env_light,
        hazy,
    };
    let residual = scene.forward_residual();
    assert!(
        residual < 1e-6,
        "forward-model self-check failed: residual {residual}"
    );
    Ok(scene)
}

impl SyntheticScene {
    /// Max absolute deviation of the stored hazy image from
    /// L*eta*R*t + B*(1-t), recomputed from the stored fields.
    pub fn forward_residual(&self) -> f64 {
        let n = self.reflectance.pixel_count();
        let l = self.illumination.plane(0);
        let t = self.transmission.plane(0);
        let mut worst = 0.0f64;
        for c in 0..3 {
            let r = self.reflectance.plane(c);
            let b = self.env_light.plane(c);
            let i = self.hazy.plane(c);
            let eta = self.eta_true[c];
            for k in 0..n {
                let expect = l[k] * eta * r[k] * t[k] + b[k] * (1.0 - t[k]);
                worst = worst.max((expect - i[k]).abs());
            }
        }
        worst
    }

    /// Max absolute deviation of B from L * sigma.
    pub fn env_light_residual(&self) -> f64 {
        let n = self.reflectance.pixel_count();
        let l = self.illumination.plane(0);
        let mut worst = 0.0f64;
        for c in 0..3 {
            let b = self.env_light.plane(c);
            let s = self.sigma_true.plane(c);
            for k in 0..n {
                worst = worst.max((l[k] * s[k] - b[k]).abs());
            }
        }
        worst
    }
}

/// Fits a polynomial from hazy to clear illumination through the upper edge
/// of their joint distribution.
///
/// Hazy values are histogrammed into 64 equal-width bins over [0, 1]; each
/// occupied bin contributes (bin center, max clear value) weighted by its
/// occupancy to the least-squares fit. Coefficients come back lowest order
/// first.
pub fn fit_illumination_poly(
    hazy_l: &PlanarImage,
    clear_l: &PlanarImage,
    degree: usize,
) -> Result<Vec<f64>> {
    hazy_l.require_channels(1)?;
    clear_l.require_channels(1)?;
    hazy_l.require_same_dims(clear_l)?;
    if degree < 1 {
        return Err(Error::InvalidParam(format!(
            "polynomial degree must be >= 1, got {degree}"
        )));
    }

    const BINS: usize = 64;
    let mut occupancy = [0usize; BINS];
    let mut bin_max = [f64::NEG_INFINITY; BINS];
    for (&hv, &cv) in hazy_l.plane(0).iter().zip(clear_l.plane(0)) {
        let bin = ((hv * BINS as f64) as usize).min(BINS - 1);
        occupancy[bin] += 1;
        bin_max[bin] = bin_max[bin].max(cv);
    }

    let points: Vec<(f64, f64, f64)> = (0..BINS)
        .filter(|&k| occupancy[k] > 0)
        .map(|k| {
            let center = (k as f64 + 0.5) / BINS as f64;
            (center, bin_max[k], occupancy[k] as f64)
        })
        .collect();
    if points.len() < degree + 1 {
        return Err(Error::InsufficientSupport {
            needed: degree + 1,
            got: points.len(),
        });
    }

    // Weighted normal equations for the Vandermonde system.
    let m = degree + 1;
    let mut ata = vec![0.0; m * m];
    let mut atb = vec![0.0; m];
    for &(x, y, w) in &points {
        let mut powers = vec![1.0; 2 * m - 1];
        for p in 1..2 * m - 1 {
            powers[p] = powers[p - 1] * x;
        }
        for row in 0..m {
            for col in 0..m {
                ata[row * m + col] += w * powers[row + col];
            }
            atb[row] += w * powers[row] * y;
        }
    }
    solve_dense(&mut ata, &mut atb, m)?;
    Ok(atb)
}

/// Gaussian elimination with partial pivoting; solution lands in `b`.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Result<()> {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        if a[pivot * n + col].abs() < 1e-12 {
            return Err(Error::InvalidParam(
                "singular system in polynomial fit".into(),
            ));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
    }
    Ok(())
}

/// Evaluates the fitted curve per pixel (Horner) and clamps to [floor, 1].
pub fn apply_poly(l: &PlanarImage, coeffs: &[f64], floor: f64) -> Result<PlanarImage> {
    l.require_channels(1)?;
    if coeffs.is_empty() {
        return Err(Error::InvalidParam("empty coefficient list".into()));
    }
    Ok(l.map(|x| {
        let mut acc = coeffs[coeffs.len() - 1];
        for &c in coeffs[..coeffs.len() - 1].iter().rev() {
            acc = acc * x + c;
        }
        acc.clamp(floor, 1.0)
    }))
}

/// Seeded uniform-noise image for benchmarking.
pub fn noise_image(width: usize, height: usize, channels: usize, seed: u64) -> PlanarImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height * channels)
        .map(|_| rng.random::<f64>())
        .collect();
    PlanarImage::new(width, height, channels, data).expect("valid noise dimensions")
}

/// Procedural clear image plus disparity map for demos and tests: a colorful
/// gradient background with seeded rectangles at distinct depths, small dark
/// patches for dark-channel support, and a few disparity holes.
pub fn sample_scene_inputs(width: usize, height: usize, seed: u64) -> (PlanarImage, PlanarImage) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (wf, hf) = (width as f64, height as f64);

    let mut clear = PlanarImage::from_fn(width, height, 3, |c, x, y| {
        let (fx, fy) = (x as f64 / wf, y as f64 / hf);
        match c {
            0 => 0.25 + 0.6 * fx,
            1 => 0.25 + 0.55 * fy,
            _ => 0.15 + 0.55 * (fx + fy) / 2.0,
        }
    })
    .expect("valid dimensions");
    // Ground-plane-like depth: the bottom of the frame is near.
    let mut disparity = PlanarImage::from_fn(width, height, 1, |_, _, y| {
        0.55 + 0.4 * (y as f64 / hf)
    })
    .expect("valid dimensions");

    // Rectangles: saturated colors at their own depths. Depth steps stay
    // moderate, matching the piecewise-smooth illumination assumption.
    let rects = 14.max(width * height / 4096);
    for _ in 0..rects {
        let rw = rng.random_range(width / 10..width / 3);
        let rh = rng.random_range(height / 10..height / 3);
        let x0 = rng.random_range(0..width - rw);
        let y0 = rng.random_range(0..height - rh);
        let color = [
            rng.random_range(0.05..0.95),
            rng.random_range(0.05..0.95),
            rng.random_range(0.05..0.95),
        ];
        let mid = 0.55 + 0.4 * ((y0 + rh / 2) as f64 / hf);
        let d = (mid + rng.random_range(-0.07..0.07)).clamp(0.3, 1.0);
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                for c in 0..3 {
                    clear.set(c, x, y, color[c]);
                }
                disparity.set(0, x, y, d);
            }
        }
    }

    // Sprinkle small dark and white squares: cluttered scenes carry both
    // shadows (dark-channel support) and near-white objects (patch maxima).
    let step = 24;
    let mut toggle = false;
    for by in (4..height.saturating_sub(4)).step_by(step) {
        for bx in (4..width.saturating_sub(4)).step_by(step) {
            let value = if toggle {
                rng.random_range(0.9..0.98)
            } else {
                rng.random_range(0.0..0.06)
            };
            toggle = !toggle;
            for y in by..(by + 3).min(height) {
                for x in bx..(bx + 3).min(width) {
                    for c in 0..3 {
                        clear.set(c, x, y, value);
                    }
                }
            }
        }
    }

    // A few occlusion holes for the fill pass.
    for _ in 0..5 {
        let x0 = rng.random_range(0..width.saturating_sub(6));
        let y0 = rng.random_range(0..height.saturating_sub(6));
        for y in y0..y0 + 5 {
            for x in x0..x0 + 5 {
                disparity.set(0, x, y, 0.0);
            }
        }
    }

    (clear, disparity)
}
