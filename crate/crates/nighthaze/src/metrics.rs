//! Quantitative evaluation: patch-statistics visual measure, PSNR, SSIM and
//! RMSE, plus the serializable report used by batch evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// Patch-statistics quality proxy: mean of tile means (8-bit scale), mean of
/// tile standard deviations, and their product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisualMeasure {
    pub mean_of_means: f64,
    pub mean_of_stds: f64,
    pub product: f64,
}

/// Luminance on the 0..255 scale: channel mean for color images.
fn luminance_255(img: &PlanarImage) -> Vec<f64> {
    let n = img.pixel_count();
    match img.channels() {
        1 => img.plane(0).iter().map(|&v| 255.0 * v).collect(),
        _ => {
            let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
            (0..n).map(|i| 255.0 * (r[i] + g[i] + b[i]) / 3.0).collect()
        }
    }
}

/// Tile statistics over non-overlapping patch x patch tiles; right/bottom
/// remainders are discarded. Standard deviations are population deviations.
pub fn visual_measure(img: &PlanarImage, patch: usize) -> Result<VisualMeasure> {
    if patch == 0 {
        return Err(Error::InvalidParam("patch size must be >= 1".into()));
    }
    let (w, h) = (img.width(), img.height());
    if w < patch || h < patch {
        return Err(Error::ImageTooSmall(format!(
            "{w}x{h} is smaller than one {patch}x{patch} tile"
        )));
    }
    let lum = luminance_255(img);
    let (tiles_x, tiles_y) = (w / patch, h / patch);
    let mut sum_means = 0.0;
    let mut sum_stds = 0.0;
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for y in ty * patch..(ty + 1) * patch {
                for x in tx * patch..(tx + 1) * patch {
                    let v = lum[y * w + x];
                    sum += v;
                    sum_sq += v * v;
                }
            }
            let count = (patch * patch) as f64;
            let mean = sum / count;
            let var = (sum_sq / count - mean * mean).max(0.0);
            sum_means += mean;
            sum_stds += var.sqrt();
        }
    }
    let tiles = (tiles_x * tiles_y) as f64;
    let mean_of_means = sum_means / tiles;
    let mean_of_stds = sum_stds / tiles;
    Ok(VisualMeasure {
        mean_of_means,
        mean_of_stds,
        product: mean_of_means * mean_of_stds,
    })
}

/// True when the measure falls in the empirically good band:
/// mean in [100, 200] and deviation in [40, 80].
pub fn visually_good(vm: &VisualMeasure) -> bool {
    (100.0..=200.0).contains(&vm.mean_of_means) && (40.0..=80.0).contains(&vm.mean_of_stds)
}

fn require_comparable(a: &PlanarImage, b: &PlanarImage) -> Result<()> {
    a.require_same_dims(b)?;
    if a.channels() != b.channels() {
        return Err(Error::ChannelMismatch {
            expected: a.channels(),
            got: b.channels(),
        });
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB on the 0..255 scale over all channels.
/// Identical images return +infinity.
pub fn psnr(a: &PlanarImage, b: &PlanarImage) -> Result<f64> {
    require_comparable(a, b)?;
    let mse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = 255.0 * (x - y);
            d * d
        })
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (255.0 / mse.sqrt()).log10())
}

/// Root-mean-square error on the [0, 1] scale.
pub fn rmse(a: &PlanarImage, b: &PlanarImage) -> Result<f64> {
    require_comparable(a, b)?;
    let mse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    Ok(mse.sqrt())
}

pub(crate) const SSIM_WINDOW: usize = 11;
pub(crate) const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

pub(crate) fn ssim_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian convolution; only outputs with full kernel support are
/// meaningful and the valid margin is handled by the caller.
fn gaussian_blur_valid(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = kernel.len() / 2;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in r..w - r {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * src[y * w + x + k - r];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in r..h - r {
        for x in r..w - r {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * tmp[(y + k - r) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Mean structural similarity on luminance with an 11x11 Gaussian window
/// (sigma 1.5), stabilizers K1 = 0.01 and K2 = 0.03, dynamic range 255.
/// Averaged over windows with full support.
pub fn ssim(a: &PlanarImage, b: &PlanarImage) -> Result<f64> {
    require_comparable(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall(format!(
            "{w}x{h} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let x = luminance_255(a);
    let y = luminance_255(b);
    let kernel = ssim_kernel();
    let r = SSIM_WINDOW / 2;

    let xx: Vec<f64> = x.iter().map(|&v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|&v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(&p, &q)| p * q).collect();

    let mu_x = gaussian_blur_valid(&x, w, h, &kernel);
    let mu_y = gaussian_blur_valid(&y, w, h, &kernel);
    let e_xx = gaussian_blur_valid(&xx, w, h, &kernel);
    let e_yy = gaussian_blur_valid(&yy, w, h, &kernel);
    let e_xy = gaussian_blur_valid(&xy, w, h, &kernel);

    let c1 = (SSIM_K1 * 255.0) * (SSIM_K1 * 255.0);
    let c2 = (SSIM_K2 * 255.0) * (SSIM_K2 * 255.0);
    let mut sum = 0.0;
    let mut count = 0usize;
    for yi in r..h - r {
        for xi in r..w - r {
            let i = yi * w + xi;
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            let value = ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (var_x + var_y + c2));
            sum += value;
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

/// One metric value; infinities survive serialization as strings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue(pub f64);

impl Serialize for MetricValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }
}

impl<'de> Deserialize<'de> for MetricValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let v = match Raw::deserialize(d)? {
            Raw::Num(v) => v,
            Raw::Text(t) => t
                .parse::<f64>()
                .map_err(|_| serde::de::Error::custom(format!("bad metric value {t:?}")))?,
        };
        Ok(MetricValue(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub metric: String,
    pub value: MetricValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub name: String,
    pub metrics: Vec<MetricEntry>,
}

/// Per-image metric values plus aggregate means, serializable as CSV and JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvalReport {
    pub images: Vec<ImageEntry>,
    pub aggregate: Vec<MetricEntry>,
}

impl EvalReport {
    pub fn push(&mut self, name: &str, metrics: Vec<(String, f64)>) {
        self.images.push(ImageEntry {
            name: name.to_string(),
            metrics: metrics
                .into_iter()
                .map(|(metric, value)| MetricEntry {
                    metric,
                    value: MetricValue(value),
                })
                .collect(),
        });
    }

    /// Recomputes aggregate rows: the mean over every image carrying each
    /// metric, in first-seen order.
    pub fn finalize(&mut self) {
        let mut order: Vec<String> = Vec::new();
        for img in &self.images {
            for m in &img.metrics {
                if !order.contains(&m.metric) {
                    order.push(m.metric.clone());
                }
            }
        }
        self.aggregate = order
            .into_iter()
            .map(|metric| {
                let values: Vec<f64> = self
                    .images
                    .iter()
                    .flat_map(|img| &img.metrics)
                    .filter(|m| m.metric == metric)
                    .map(|m| m.value.0)
                    .collect();
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                MetricEntry {
                    metric,
                    value: MetricValue(mean),
                }
            })
            .collect();
    }

    /// CSV with one `image,metric,value` row per entry; aggregates use the
    /// image name `aggregate`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image,metric,value\n");
        let mut row = |name: &str, metric: &str, value: f64| {
            out.push_str(&csv_field(name));
            out.push(',');
            out.push_str(&csv_field(metric));
            out.push(',');
            out.push_str(&format!("{value}"));
            out.push('\n');
        };
        for img in &self.images {
            for m in &img.metrics {
                row(&img.name, &m.metric, m.value.0);
            }
        }
        for m in &self.aggregate {
            row("aggregate", &m.metric, m.value.0);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut report = EvalReport::default();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 || line.is_empty() {
                continue;
            }
            let fields = parse_csv_line(line)
                .ok_or_else(|| Error::MalformedReport(format!("line {}", lineno + 1)))?;
            if fields.len() != 3 {
                return Err(Error::MalformedReport(format!(
                    "line {}: expected 3 fields",
                    lineno + 1
                )));
            }
            let value: f64 = fields[2]
                .parse()
                .map_err(|_| Error::MalformedReport(format!("line {}: bad value", lineno + 1)))?;
            if fields[0] == "aggregate" {
                report.aggregate.push(MetricEntry {
                    metric: fields[1].clone(),
                    value: MetricValue(value),
                });
            } else {
                if report.images.last().map(|i| i.name.as_str()) != Some(fields[0].as_str()) {
                    report.images.push(ImageEntry {
                        name: fields[0].clone(),
                        metrics: Vec::new(),
                    });
                }
                report.images.last_mut().unwrap().metrics.push(MetricEntry {
                    metric: fields[1].clone(),
                    value: MetricValue(value),
                });
            }
        }
        Ok(report)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedReport(e.to_string()))
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn parse_csv_line(line: &str) -> Option<Vec<String>> {
    let mut fields = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        let mut field = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            loop {
                match chars.next()? {
                    '"' => {
                        if chars.peek() == Some(&'"') {
                            chars.next();
                            field.push('"');
                        } else {
                            break;
                        }
                    }
                    c => field.push(c),
                }
            }
            // Consume the separator, if any.
            match chars.next() {
                None => {
                    fields.push(field);
                    return Some(fields);
                }
                Some(',') => fields.push(field),
                Some(_) => return None,
            }
        } else {
            let mut terminated = false;
            for c in chars.by_ref() {
                if c == ',' {
                    terminated = true;
                    break;
                }
                field.push(c);
            }
            fields.push(field);
            if !terminated {
                return Some(fields);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visual_measure_constant_image() {
        let img = PlanarImage::constant(100, 100, 1, 128.0 / 255.0).unwrap();
        let vm = visual_measure(&img, 50).unwrap();
        assert!((vm.mean_of_means - 128.0).abs() < 1e-9);
        assert!(vm.mean_of_stds.abs() < 1e-6);
        assert!(vm.product.abs() < 1e-3);
    }

    #[test]
    fn visual_measure_alternating_flat_tiles() {
        // Tiles internally constant at 0 or 255: all variance is between
        // tiles, none inside them.
        let img = PlanarImage::from_fn(100, 100, 1, |_, x, y| {
            if (x / 50 + y / 50) % 2 == 0 { 0.0 } else { 1.0 }
        })
        .unwrap();
        let vm = visual_measure(&img, 50).unwrap();
        assert!((vm.mean_of_means - 127.5).abs() < 1e-9);
        assert!(vm.mean_of_stds.abs() < 1e-6);
    }

    #[test]
    fn visual_measure_checkerboard_exact() {
        let img = PlanarImage::from_fn(100, 100, 1, |_, x, y| ((x + y) % 2) as f64).unwrap();
        let vm = visual_measure(&img, 50).unwrap();
        assert_eq!(vm.mean_of_means, 127.5);
        assert_eq!(vm.mean_of_stds, 127.5);
        assert_eq!(vm.product, 16256.25);
    }

    #[test]
    fn visual_measure_maximized_by_intra_tile_variance() {
        // Same tile means; the checkerboard concentrates variance inside
        // tiles and must win.
        let flat = PlanarImage::from_fn(100, 50, 1, |_, x, _| if x < 50 { 0.0 } else { 1.0 }).unwrap();
        let checker = PlanarImage::from_fn(100, 50, 1, |_, x, y| ((x + y) % 2) as f64).unwrap();
        let vm_flat = visual_measure(&flat, 50).unwrap();
        let vm_checker = visual_measure(&checker, 50).unwrap();
        assert!((vm_flat.mean_of_means - vm_checker.mean_of_means).abs() < 1e-9);
        assert!(vm_checker.product > vm_flat.product);
    }

    #[test]
    fn visual_measure_too_small() {
        let img = PlanarImage::constant(49, 100, 1, 0.5).unwrap();
        assert!(matches!(
            visual_measure(&img, 50),
            Err(Error::ImageTooSmall(_))
        ));
    }

    #[test]
    fn visually_good_band() {
        assert!(visually_good(&VisualMeasure {
            mean_of_means: 110.0,
            mean_of_stds: 45.0,
            product: 4950.0
        }));
        assert!(!visually_good(&VisualMeasure {
            mean_of_means: 90.0,
            mean_of_stds: 45.0,
            product: 4050.0
        }));
        assert!(!visually_good(&VisualMeasure {
            mean_of_means: 110.0,
            mean_of_stds: 90.0,
            product: 9900.0
        }));
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let img = PlanarImage::constant(8, 8, 3, 0.5).unwrap();
        assert_eq!(psnr(&img, &img).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_uniform_one_step() {
        let a = PlanarImage::constant(16, 16, 3, 100.0 / 255.0).unwrap();
        let b = PlanarImage::constant(16, 16, 3, 101.0 / 255.0).unwrap();
        let v = psnr(&a, &b).unwrap();
        assert!((v - 48.13).abs() < 0.01, "{v}");
    }

    #[test]
    fn psnr_rejects_mismatch() {
        let a = PlanarImage::constant(8, 8, 3, 0.5).unwrap();
        let b = PlanarImage::constant(8, 9, 3, 0.5).unwrap();
        assert!(psnr(&a, &b).is_err());
        let c = PlanarImage::constant(8, 8, 1, 0.5).unwrap();
        assert!(psnr(&a, &c).is_err());
    }

    #[test]
    fn rmse_uniform_difference() {
        let a = PlanarImage::constant(8, 8, 3, 0.5).unwrap();
        let b = PlanarImage::constant(8, 8, 3, 0.6).unwrap();
        assert!((rmse(&a, &b).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn ssim_self_is_one() {
        let img = PlanarImage::from_fn(32, 24, 3, |c, x, y| {
            (((c * 31 + x * 7 + y * 13) % 29) as f64) / 29.0
        })
        .unwrap();
        assert_eq!(ssim(&img, &img).unwrap(), 1.0);
    }

    #[test]
    fn ssim_constant_offset_closed_form() {
        let c1 = (0.01f64 * 255.0).powi(2);
        let a = PlanarImage::constant(32, 32, 1, 100.0 / 255.0).unwrap();
        let b = PlanarImage::constant(32, 32, 1, 110.0 / 255.0).unwrap();
        let (m1, m2) = (100.0, 110.0);
        let expect = (2.0 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
        let got = ssim(&a, &b).unwrap();
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
    }

    #[test]
    fn ssim_too_small() {
        let img = PlanarImage::constant(10, 10, 1, 0.5).unwrap();
        assert!(matches!(ssim(&img, &img), Err(Error::ImageTooSmall(_))));
    }

    #[test]
    fn report_round_trips_csv_and_json() {
        let mut report = EvalReport::default();
        report.push(
            "a, weird \"name\".png",
            vec![("psnr".into(), f64::INFINITY), ("ssim".into(), 0.95)],
        );
        report.push("b.png", vec![("psnr".into(), 30.25), ("ssim".into(), 0.5)]);
        report.finalize();

        let csv = report.to_csv();
        assert_eq!(EvalReport::from_csv(&csv).unwrap(), report);
        let json = report.to_json();
        assert_eq!(EvalReport::from_json(&json).unwrap(), report);
        // Bit-stable given identical inputs.
        assert_eq!(report.to_csv(), csv);
        assert_eq!(report.to_json(), json);
    }

    #[test]
    fn aggregate_is_mean_of_rows() {
        let mut report = EvalReport::default();
        report.push("a", vec![("rmse".into(), 0.1)]);
        report.push("b", vec![("rmse".into(), 0.3)]);
        report.finalize();
        assert_eq!(report.aggregate.len(), 1);
        assert!((report.aggregate[0].value.0 - 0.2).abs() < 1e-12);
    }
}
