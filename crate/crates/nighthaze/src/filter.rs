//! O(N) windowed kernels: box mean, sliding extrema and the guided filter.
//!
//! All windows are `(2r+1)^2` squares clipped to the image bounds; means are
//! normalized by the in-bounds pixel count. Runtime is independent of the
//! radius: box means run on an integral image, extrema on a monotonic deque.
//! Accumulation is always in f64.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// Guided-filter window and regularization settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    /// Window half-size; the window is (2r+1)^2.
    pub radius: usize,
    /// Regularizer added to the guide variance.
    pub epsilon: f64,
}

impl FilterParams {
    pub fn new(radius: usize, epsilon: f64) -> Result<Self> {
        if radius < 1 {
            return Err(Error::InvalidParam(format!(
                "filter radius must be >= 1, got {radius}"
            )));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParam(format!(
                "filter epsilon must be > 0, got {epsilon}"
            )));
        }
        Ok(Self { radius, epsilon })
    }
}

fn check_radius(radius: usize) -> Result<()> {
    if radius < 1 {
        return Err(Error::InvalidParam(format!(
            "window radius must be >= 1, got {radius}"
        )));
    }
    Ok(())
}

/// Border-aware box mean of a single-channel image.
pub fn box_mean(img: &PlanarImage, radius: usize) -> Result<PlanarImage> {
    img.require_channels(1)?;
    check_radius(radius)?;
    let mut out = vec![0.0; img.pixel_count()];
    box_mean_plane(img.plane(0), img.width(), img.height(), radius, &mut out);
    PlanarImage::new(img.width(), img.height(), 1, out)
}

/// Sliding-window minimum over the clipped window.
pub fn window_min(img: &PlanarImage, radius: usize) -> Result<PlanarImage> {
    window_extremum(img, radius, Extremum::Min)
}

/// Sliding-window maximum over the clipped window.
pub fn window_max(img: &PlanarImage, radius: usize) -> Result<PlanarImage> {
    window_extremum(img, radius, Extremum::Max)
}

/// Guided filter with a single-channel guide.
///
/// Per window k: a_k = cov(guide, p) / (var(guide) + eps),
/// b_k = mean(p) - a_k * mean(guide); the output at i averages
/// `a*guide_i + b` over every window containing i.
pub fn guided_filter(p: &PlanarImage, guide: &PlanarImage, params: FilterParams) -> Result<PlanarImage> {
    p.require_channels(1)?;
    guide.require_channels(1)?;
    p.require_same_dims(guide)?;
    let (w, h) = (p.width(), p.height());
    let n = w * h;
    let r = params.radius;

    let pp = p.plane(0);
    let gg = guide.plane(0);

    let mut integral = vec![0.0; (w + 1) * (h + 1)];
    let mut mean_g = vec![0.0; n];
    let mut mean_p = vec![0.0; n];
    box_mean_with(gg, w, h, r, &mut integral, &mut mean_g);
    box_mean_with(pp, w, h, r, &mut integral, &mut mean_p);

    // Window covariance statistics, reusing one product buffer.
    let mut product = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        product[i] = gg[i] * gg[i];
    }
    box_mean_with(&product, w, h, r, &mut integral, &mut a); // E[g*g]
    for i in 0..n {
        product[i] = gg[i] * pp[i];
    }
    box_mean_with(&product, w, h, r, &mut integral, &mut b); // E[g*p]

    for i in 0..n {
        let var = a[i] - mean_g[i] * mean_g[i];
        let cov = b[i] - mean_g[i] * mean_p[i];
        let ai = cov / (var + params.epsilon);
        a[i] = ai;
        b[i] = mean_p[i] - ai * mean_g[i];
    }

    // mean_g and mean_p are free; they hold the averaged coefficients now.
    box_mean_with(&a, w, h, r, &mut integral, &mut mean_g);
    box_mean_with(&b, w, h, r, &mut integral, &mut mean_p);

    let mut out = a;
    for i in 0..n {
        out[i] = mean_g[i] * gg[i] + mean_p[i];
    }
    PlanarImage::new(w, h, 1, out)
}

/// Box mean over a raw plane; exact up to accumulation rounding and
/// radius-independent.
pub(crate) fn box_mean_plane(src: &[f64], w: usize, h: usize, radius: usize, out: &mut [f64]) {
    let mut integral = vec![0.0; (w + 1) * (h + 1)];
    box_mean_with(src, w, h, radius, &mut integral, out);
}

/// Integral-image box mean writing into caller-provided buffers.
fn box_mean_with(
    src: &[f64],
    w: usize,
    h: usize,
    radius: usize,
    integral: &mut [f64],
    out: &mut [f64],
) {
    debug_assert_eq!(src.len(), w * h);
    debug_assert_eq!(out.len(), w * h);
    debug_assert_eq!(integral.len(), (w + 1) * (h + 1));

    // integral[y][x] = sum of src over [0, y) x [0, x)
    let iw = w + 1;
    integral[..iw].fill(0.0);
    for y in 0..h {
        let mut row_sum = 0.0;
        integral[(y + 1) * iw] = 0.0;
        for x in 0..w {
            row_sum += src[y * w + x];
            integral[(y + 1) * iw + (x + 1)] = integral[y * iw + (x + 1)] + row_sum;
        }
    }

    for y in 0..h {
        let y0 = y.saturating_sub(radius);
        let y1 = (y + radius).min(h - 1);
        for x in 0..w {
            let x0 = x.saturating_sub(radius);
            let x1 = (x + radius).min(w - 1);
            let sum = integral[(y1 + 1) * iw + (x1 + 1)] - integral[y0 * iw + (x1 + 1)]
                - integral[(y1 + 1) * iw + x0]
                + integral[y0 * iw + x0];
            let count = ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64;
            out[y * w + x] = sum / count;
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Extremum {
    Min,
    Max,
}

fn window_extremum(img: &PlanarImage, radius: usize, ext: Extremum) -> Result<PlanarImage> {
    img.require_channels(1)?;
    check_radius(radius)?;
    let (w, h) = (img.width(), img.height());
    let mut out = vec![0.0; w * h];
    extremum_plane(img.plane(0), w, h, radius, ext, &mut out);
    PlanarImage::new(w, h, 1, out)
}

pub(crate) fn window_min_plane(src: &[f64], w: usize, h: usize, radius: usize, out: &mut [f64]) {
    extremum_plane(src, w, h, radius, Extremum::Min, out);
}

/// Separable clipped-window extremum: 1D pass over rows, then columns.
fn extremum_plane(src: &[f64], w: usize, h: usize, radius: usize, ext: Extremum, out: &mut [f64]) {
    debug_assert_eq!(src.len(), w * h);
    let mut tmp = vec![0.0; w * h];
    let mut line_out = vec![0.0; w.max(h)];
    for y in 0..h {
        slide_extremum_1d(&src[y * w..(y + 1) * w], radius, ext, &mut line_out[..w]);
        tmp[y * w..(y + 1) * w].copy_from_slice(&line_out[..w]);
    }
    let mut column = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            column[y] = tmp[y * w + x];
        }
        slide_extremum_1d(&column, radius, ext, &mut line_out[..h]);
        for y in 0..h {
            out[y * w + x] = line_out[y];
        }
    }
}

/// Monotonic-deque sliding extremum with clipped windows; O(n) amortized.
fn slide_extremum_1d(src: &[f64], radius: usize, ext: Extremum, out: &mut [f64]) {
    let n = src.len();
    let mut dq: VecDeque<usize> = VecDeque::new();
    for j in 0..n + radius {
        if j < n {
            while let Some(&back) = dq.back() {
                let replace = match ext {
                    Extremum::Min => src[back] >= src[j],
                    Extremum::Max => src[back] <= src[j],
                };
                if replace {
                    dq.pop_back();
                } else {
                    break;
                }
            }
            dq.push_back(j);
        }
        if j >= radius {
            let i = j - radius;
            while *dq.front().unwrap() + radius < i {
                dq.pop_front();
            }
            out[i] = src[*dq.front().unwrap()];
        }
    }
}

/// Per-pixel argmax over the clipped window, ties broken by first occurrence
/// in row-major scan order. Returns linear pixel indices.
pub(crate) fn window_argmax_plane(src: &[f64], w: usize, h: usize, radius: usize) -> Vec<usize> {
    debug_assert_eq!(src.len(), w * h);
    // Horizontal pass: best column per (y, x), earliest column on ties.
    let mut best_val = vec![0.0; w * h];
    let mut best_col = vec![0usize; w * h];
    let mut dq: VecDeque<usize> = VecDeque::new();
    for y in 0..h {
        dq.clear();
        let row = &src[y * w..(y + 1) * w];
        for j in 0..w + radius {
            if j < w {
                // Strict pop keeps the earliest index among equal maxima.
                while let Some(&back) = dq.back() {
                    if row[back] < row[j] {
                        dq.pop_back();
                    } else {
                        break;
                    }
                }
                dq.push_back(j);
            }
            if j >= radius {
                let i = j - radius;
                while *dq.front().unwrap() + radius < i {
                    dq.pop_front();
                }
                let c = *dq.front().unwrap();
                best_val[y * w + i] = row[c];
                best_col[y * w + i] = c;
            }
        }
    }

    // Vertical pass over the row maxima, earliest row on ties.
    let mut out = vec![0usize; w * h];
    let mut col_val = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col_val[y] = best_val[y * w + x];
        }
        dq.clear();
        for j in 0..h + radius {
            if j < h {
                while let Some(&back) = dq.back() {
                    if col_val[back] < col_val[j] {
                        dq.pop_back();
                    } else {
                        break;
                    }
                }
                dq.push_back(j);
            }
            if j >= radius {
                let i = j - radius;
                while *dq.front().unwrap() + radius < i {
                    dq.pop_front();
                }
                let best_row = *dq.front().unwrap();
                out[i * w + x] = best_row * w + best_col[best_row * w + x];
            }
        }
    }
    out
}
