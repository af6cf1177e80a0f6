//! Brute-force reference implementations for every windowed kernel, checked
//! against the fast paths on randomized inputs. The references stay naive on
//! purpose: double loops over clipped windows, full sorts, direct per-window
//! statistics.

use nighthaze::color::{eta_lower_bound, IncidentLightColor};
use nighthaze::config::PipelineConfig;
use nighthaze::dehaze::{dark_channel, estimate_env_light, estimate_transmission, recover};
use nighthaze::dehaze::{EnvironmentalLight, Transmission};
use nighthaze::filter::{box_mean, guided_filter, window_max, window_min, FilterParams};
use nighthaze::illum::stretch;
use nighthaze::image::{percentile, percentile_of, value_channel, PlanarImage};
use nighthaze::metrics::{psnr, rmse, ssim};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> PlanarImage {
    let data = (0..w * h * c).map(|_| rng.random::<f64>()).collect();
    PlanarImage::new(w, h, c, data).unwrap()
}

mod reference {
    use super::PlanarImage;

    pub fn clipped(center: usize, radius: usize, len: usize) -> std::ops::RangeInclusive<usize> {
        center.saturating_sub(radius)..=(center + radius).min(len - 1)
    }

    pub fn box_mean_naive(img: &PlanarImage, r: usize) -> Vec<f64> {
        let (w, h) = (img.width(), img.height());
        let p = img.plane(0);
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut sum = 0.0;
                let mut count = 0.0;
                for yy in clipped(y, r, h) {
                    for xx in clipped(x, r, w) {
                        sum += p[yy * w + xx];
                        count += 1.0;
                    }
                }
                out[y * w + x] = sum / count;
            }
        }
        out
    }

    pub fn extremum_naive(img: &PlanarImage, r: usize, min: bool) -> Vec<f64> {
        let (w, h) = (img.width(), img.height());
        let p = img.plane(0);
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut best = if min { f64::INFINITY } else { f64::NEG_INFINITY };
                for yy in clipped(y, r, h) {
                    for xx in clipped(x, r, w) {
                        let v = p[yy * w + xx];
                        best = if min { best.min(v) } else { best.max(v) };
                    }
                }
                out[y * w + x] = best;
            }
        }
        out
    }

    /// Direct guided filter: every a_k, b_k from explicit window statistics,
    /// then the second averaging as an explicit loop over covering windows.
    pub fn guided_filter_naive(p: &PlanarImage, g: &PlanarImage, r: usize, eps: f64) -> Vec<f64> {
        let (w, h) = (p.width(), p.height());
        let (pp, gg) = (p.plane(0), g.plane(0));
        let mut a = vec![0.0; w * h];
        let mut b = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut sum_g = 0.0;
                let mut sum_p = 0.0;
                let mut sum_gg = 0.0;
                let mut sum_gp = 0.0;
                let mut count = 0.0;
                for yy in clipped(y, r, h) {
                    for xx in clipped(x, r, w) {
                        let i = yy * w + xx;
                        sum_g += gg[i];
                        sum_p += pp[i];
                        sum_gg += gg[i] * gg[i];
                        sum_gp += gg[i] * pp[i];
                        count += 1.0;
                    }
                }
                let mean_g = sum_g / count;
                let mean_p = sum_p / count;
                let var = sum_gg / count - mean_g * mean_g;
                let cov = sum_gp / count - mean_g * mean_p;
                let k = y * w + x;
                a[k] = cov / (var + eps);
                b[k] = mean_p - a[k] * mean_g;
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                let mut count = 0.0;
                for yy in clipped(y, r, h) {
                    for xx in clipped(x, r, w) {
                        let k = yy * w + xx;
                        acc += a[k] * gg[y * w + x] + b[k];
                        count += 1.0;
                    }
                }
                out[y * w + x] = acc / count;
            }
        }
        out
    }

    pub fn dark_channel_naive(img: &PlanarImage, r: usize) -> Vec<f64> {
        let (w, h) = (img.width(), img.height());
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut best = f64::INFINITY;
                for yy in clipped(y, r, h) {
                    for xx in clipped(x, r, w) {
                        for c in 0..3 {
                            best = best.min(img.get(c, xx, yy));
                        }
                    }
                }
                out[y * w + x] = best;
            }
        }
        out
    }
}

fn assert_close(fast: &[f64], naive: &[f64], tol: f64, what: &str) {
    assert_eq!(fast.len(), naive.len());
    for (i, (a, b)) in fast.iter().zip(naive).enumerate() {
        assert!(
            (a - b).abs() <= tol,
            "{what}: sample {i}: fast {a} vs naive {b}"
        );
    }
}

#[test]
fn box_mean_matches_naive_on_random_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..40 {
        let w = rng.random_range(4..28);
        let h = rng.random_range(4..28);
        let r = rng.random_range(1..5);
        let img = random_image(&mut rng, w, h, 1);
        let fast = box_mean(&img, r).unwrap();
        let naive = reference::box_mean_naive(&img, r);
        assert_close(fast.plane(0), &naive, 1e-6, "box_mean");
    }
    // The stated 16x16 r=3 case.
    let img = random_image(&mut rng, 16, 16, 1);
    let fast = box_mean(&img, 3).unwrap();
    assert_close(fast.plane(0), &reference::box_mean_naive(&img, 3), 1e-6, "box_mean 16x16");
}

#[test]
fn window_extrema_match_naive_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..40 {
        let w = rng.random_range(3..26);
        let h = rng.random_range(3..26);
        let r = rng.random_range(1..6);
        let img = random_image(&mut rng, w, h, 1);
        let min_fast = window_min(&img, r).unwrap();
        let max_fast = window_max(&img, r).unwrap();
        assert_eq!(min_fast.plane(0), &reference::extremum_naive(&img, r, true)[..]);
        assert_eq!(max_fast.plane(0), &reference::extremum_naive(&img, r, false)[..]);
    }
}

#[test]
fn guided_filter_matches_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    // The stated 8x8 r=2 eps=0.01 case plus randomized shapes.
    for trial in 0..25 {
        let (w, h, r) = if trial == 0 {
            (8, 8, 2)
        } else {
            (rng.random_range(5..20), rng.random_range(5..20), rng.random_range(1..4))
        };
        let p = random_image(&mut rng, w, h, 1);
        let g = random_image(&mut rng, w, h, 1);
        let fast = guided_filter(&p, &g, FilterParams::new(r, 0.01).unwrap()).unwrap();
        let naive = reference::guided_filter_naive(&p, &g, r, 0.01);
        assert_close(fast.plane(0), &naive, 1e-5, "guided_filter");
    }
}

#[test]
fn dark_channel_matches_naive_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for trial in 0..30 {
        let (w, h, r) = if trial == 0 {
            (8, 8, 2)
        } else {
            (rng.random_range(4..20), rng.random_range(4..20), rng.random_range(1..5))
        };
        let img = random_image(&mut rng, w, h, 3);
        let fast = dark_channel(&img, r).unwrap();
        assert_eq!(fast.plane(0), &reference::dark_channel_naive(&img, r)[..]);
    }
}

#[test]
fn percentile_matches_full_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let values: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
    let img = PlanarImage::new(100, 10, 1, values.clone()).unwrap();

    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let full_sort = |rank: f64| {
        let idx = ((rank / 100.0 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        sorted[idx - 1]
    };

    assert_eq!(percentile(&img, 95.0).unwrap(), full_sort(95.0));
    for _ in 0..50 {
        let rank = rng.random_range(0.0..100.0);
        assert_eq!(percentile(&img, rank).unwrap(), full_sort(rank), "rank {rank}");
    }
    assert_eq!(percentile(&img, 100.0).unwrap(), *sorted.last().unwrap());
}

#[test]
fn eta_lower_bound_matches_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let cfg = PipelineConfig::default();
    for _ in 0..10 {
        let (w, h) = (16, 16);
        let i_hat = random_image(&mut rng, w, h, 3);
        let l = random_image(&mut rng, w, h, 1).map(|v| 0.05 + 0.95 * v);
        let fast = eta_lower_bound(&i_hat, &l, &cfg).unwrap();
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    let mut max_i = f64::NEG_INFINITY;
                    let mut max_l = f64::NEG_INFINITY;
                    for yy in reference::clipped(y, cfg.patch_radius, h) {
                        for xx in reference::clipped(x, cfg.patch_radius, w) {
                            max_i = max_i.max(i_hat.get(c, xx, yy));
                            max_l = max_l.max(l.get(0, xx, yy).powf(cfg.gamma));
                        }
                    }
                    let expect =
                        (max_i / max_l.max(cfg.log_floor)).clamp(cfg.log_floor, 1.0);
                    assert_eq!(fast.get(c, x, y), expect, "at ({x},{y}) channel {c}");
                }
            }
        }
    }
}

#[test]
fn transmission_matches_composed_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let cfg = PipelineConfig::default();
    let (w, h) = (8, 8);
    let i_tilde = random_image(&mut rng, w, h, 3).map(|v| 0.1 + 0.9 * v);
    let a = random_image(&mut rng, w, h, 3).map(|v| 0.3 + 0.7 * v);
    let env = EnvironmentalLight { a: a.clone() };
    let fast = estimate_transmission(&i_tilde, &env, &cfg).unwrap();

    // Scalar reference: channelwise ratio, naive dark channel, naive guided
    // refinement with the V-channel guide, then the clamp.
    let ratio = i_tilde.zip_map(&a, |i, av| i / av).unwrap();
    let dc = reference::dark_channel_naive(&ratio, cfg.patch_radius);
    let raw: Vec<f64> = dc.iter().map(|d| 1.0 - cfg.omega * d).collect();
    let raw_img = PlanarImage::new(w, h, 1, raw).unwrap();
    let guide = value_channel(&i_tilde).unwrap();
    let refined = reference::guided_filter_naive(&raw_img, &guide, cfg.gf_radius, cfg.gf_epsilon);
    let expect: Vec<f64> = refined.iter().map(|v| v.clamp(cfg.t_floor, 1.0)).collect();
    assert_close(fast.t.plane(0), &expect, 1e-6, "transmission");
}

#[test]
fn env_light_smoothing_matches_composed_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(717);
    let cfg = PipelineConfig::default();
    let (w, h) = (12, 12);
    let i_tilde = random_image(&mut rng, w, h, 3);
    let fast = estimate_env_light(&i_tilde, &cfg).unwrap();

    // Reference: naive argmax of the naive dark channel per patch, then the
    // naive guided filter per channel.
    let dc = reference::dark_channel_naive(&i_tilde, cfg.patch_radius);
    let guide = value_channel(&i_tilde).unwrap();
    for c in 0..3 {
        let mut raw = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut best = (f64::NEG_INFINITY, 0usize);
                for yy in reference::clipped(y, cfg.patch_radius, h) {
                    for xx in reference::clipped(x, cfg.patch_radius, w) {
                        let v = dc[yy * w + xx];
                        if v > best.0 {
                            best = (v, yy * w + xx);
                        }
                    }
                }
                raw[y * w + x] = i_tilde.plane(c)[best.1];
            }
        }
        let raw_img = PlanarImage::new(w, h, 1, raw).unwrap();
        let smoothed =
            reference::guided_filter_naive(&raw_img, &guide, cfg.gf_radius, cfg.gf_epsilon);
        let expect: Vec<f64> = smoothed
            .iter()
            .map(|v| v.clamp(cfg.log_floor, 1.0))
            .collect();
        assert_close(fast.a.plane(c), &expect, 1e-6, "env_light");
    }
}

#[test]
fn recover_round_trip_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for _ in 0..100 {
        let (w, h) = (rng.random_range(4..16), rng.random_range(4..16));
        let j0 = random_image(&mut rng, w, h, 3).map(|v| 0.02 + 0.96 * v);
        let a = random_image(&mut rng, w, h, 3).map(|v| 0.05 + 0.9 * v);
        let t = random_image(&mut rng, w, h, 1).map(|v| 0.1 + 0.9 * v);

        // Forward scattering composition.
        let mut hazy = j0.clone();
        for c in 0..3 {
            let n = w * h;
            for i in 0..n {
                let tv = t.plane(0)[i];
                let v = j0.plane(c)[i] * tv + a.plane(c)[i] * (1.0 - tv);
                hazy.plane_mut(c)[i] = v;
            }
        }
        let out = recover(
            &hazy,
            &EnvironmentalLight { a },
            &Transmission { t },
        )
        .unwrap();
        let mut worst = 0.0f64;
        for (x, y) in out.data().iter().zip(j0.data()) {
            worst = worst.max((x - y).abs());
        }
        assert!(worst <= 1e-6, "round-trip error {worst}");
    }
}

#[test]
fn ssim_matches_direct_window_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for _ in 0..5 {
        let (w, h) = (rng.random_range(12..30), rng.random_range(12..30));
        let a = random_image(&mut rng, w, h, 3);
        let b = random_image(&mut rng, w, h, 3);
        let fast = ssim(&a, &b).unwrap();
        let naive = ssim_naive(&a, &b);
        assert!((fast - naive).abs() < 1e-6, "{fast} vs {naive}");
    }
}

/// Direct per-window SSIM: no separable convolution, plain weighted loops.
fn ssim_naive(a: &PlanarImage, b: &PlanarImage) -> f64 {
    let (w, h) = (a.width(), a.height());
    let lum = |img: &PlanarImage| -> Vec<f64> {
        let n = img.pixel_count();
        (0..n)
            .map(|i| 255.0 * (img.plane(0)[i] + img.plane(1)[i] + img.plane(2)[i]) / 3.0)
            .collect()
    };
    let x = lum(a);
    let y = lum(b);
    let window = 11usize;
    let sigma = 1.5f64;
    let r = window / 2;
    let mut kernel = vec![0.0; window * window];
    let mut sum = 0.0;
    for i in 0..window {
        for j in 0..window {
            let (di, dj) = (i as f64 - r as f64, j as f64 - r as f64);
            let v = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            kernel[i * window + j] = v;
            sum += v;
        }
    }
    for v in &mut kernel {
        *v /= sum;
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut acc = 0.0;
    let mut count = 0usize;
    for yc in r..h - r {
        for xc in r..w - r {
            let mut mx = 0.0;
            let mut my = 0.0;
            let mut mxx = 0.0;
            let mut myy = 0.0;
            let mut mxy = 0.0;
            for i in 0..window {
                for j in 0..window {
                    let k = kernel[i * window + j];
                    let px = x[(yc + i - r) * w + (xc + j - r)];
                    let py = y[(yc + i - r) * w + (xc + j - r)];
                    mx += k * px;
                    my += k * py;
                    mxx += k * px * px;
                    myy += k * py * py;
                    mxy += k * px * py;
                }
            }
            let var_x = mxx - mx * mx;
            let var_y = myy - my * my;
            let cov = mxy - mx * my;
            acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (var_x + var_y + c2));
            count += 1;
        }
    }
    acc / count as f64
}

#[test]
fn psnr_and_rmse_match_scalar_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let (w, h) = (17, 13);
    let a = random_image(&mut rng, w, h, 3);
    let b = random_image(&mut rng, w, h, 3);

    let mut se = 0.0;
    for c in 0..3 {
        for y in 0..h {
            for x in 0..w {
                let d = 255.0 * (a.get(c, x, y) - b.get(c, x, y));
                se += d * d;
            }
        }
    }
    let mse = se / (w * h * 3) as f64;
    let psnr_ref = 20.0 * (255.0 / mse.sqrt()).log10();
    assert!((psnr(&a, &b).unwrap() - psnr_ref).abs() < 1e-9);

    let rmse_ref = (mse / (255.0 * 255.0)).sqrt();
    assert!((rmse(&a, &b).unwrap() - rmse_ref).abs() < 1e-12);
}

#[test]
fn stretch_anchors_map_to_bounds_on_random_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let n = 900usize;
    let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let img = PlanarImage::from_fn(30, 30, 3, |_, x, y| values[y * 30 + x]).unwrap();
    let out = stretch(&img, 5.0, 95.0).unwrap();

    let lo = percentile_of(&values, 5.0).unwrap();
    let hi = percentile_of(&values, 95.0).unwrap();
    let lo_pos = values.iter().position(|&v| v == lo).unwrap();
    let hi_pos = values.iter().position(|&v| v == hi).unwrap();
    assert_eq!(out.plane(0)[lo_pos], 0.0);
    assert_eq!(out.plane(0)[hi_pos], 1.0);

    let interior = out
        .plane(0)
        .iter()
        .filter(|&&v| v > 0.0 && v < 1.0)
        .count();
    assert!(
        interior as f64 >= 0.88 * n as f64,
        "only {interior} of {n} strictly inside (0,1)"
    );

    // Idempotent once the anchors sit at 0 and 1.
    let again = stretch(&out, 5.0, 95.0).unwrap();
    for (p, q) in again.data().iter().zip(out.data()) {
        assert!((p - q).abs() < 1e-6);
    }
}

#[test]
fn refine_eta_beats_raw_on_smoothness() {
    // Mean absolute Laplacian of the refined estimate must not exceed the
    // raw patchwork's.
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let cfg = PipelineConfig::default();
    let (w, h) = (48, 40);
    let i_hat = random_image(&mut rng, w, h, 3).map(|v| 0.2 + 0.7 * v);
    let l = random_image(&mut rng, w, h, 1).map(|v| 0.2 + 0.7 * v);
    let raw = eta_lower_bound(&i_hat, &l, &cfg).unwrap();
    let guide = value_channel(&i_hat).unwrap();
    let refined = nighthaze::color::refine_eta(&raw, &guide, &cfg).unwrap();

    let laplacian = |img: &PlanarImage| -> f64 {
        let mut acc = 0.0;
        let mut count = 0usize;
        for c in 0..img.channels() {
            let p = img.plane(c);
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    let i = y * w + x;
                    acc += (4.0 * p[i] - p[i - 1] - p[i + 1] - p[i - w] - p[i + w]).abs();
                    count += 1;
                }
            }
        }
        acc / count as f64
    };
    let (l_raw, l_refined) = (laplacian(&raw), laplacian(&refined.eta));
    assert!(
        l_refined <= l_raw,
        "refined {l_refined} vs raw {l_raw}"
    );
    let _: &IncidentLightColor = &refined;
}
