//! The pixel container shared by every stage of the pipeline.
//!
//! A [`PlanarImage`] stores 1 or 3 channels of `f64` intensities in
//! channel-planar, row-major order. Values are nominally in `[0, 1]`;
//! log-domain intermediates step outside that range but every exported
//! operation returns finite values.

use crate::error::{Error, Result};

/// H x W x C image of real intensities, channel-planar, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl PlanarImage {
    /// Wraps raw planar data. `data.len()` must equal `width * height * channels`
    /// and `channels` must be 1 or 3.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyInput);
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParam(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidParam(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image filled with a single value.
    pub fn constant(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image by evaluating `f(channel, x, y)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of pixels (not samples).
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// One channel plane, row-major.
    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.pixel_count();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [f64] {
        let n = self.pixel_count();
        &mut self.data[channel * n..(channel + 1) * n]
    }

    pub fn get(&self, channel: usize, x: usize, y: usize) -> f64 {
        self.data[channel * self.pixel_count() + y * self.width + x]
    }

    pub fn set(&mut self, channel: usize, x: usize, y: usize, value: f64) {
        let idx = channel * self.pixel_count() + y * self.width + x;
        self.data[idx] = value;
    }

    /// Errors unless the image has exactly `n` channels.
    pub fn require_channels(&self, n: usize) -> Result<()> {
        if self.channels != n {
            return Err(Error::ChannelMismatch {
                expected: n,
                got: self.channels,
            });
        }
        Ok(())
    }

    /// Errors unless `other` has the same width and height.
    pub fn require_same_dims(&self, other: &PlanarImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                expected_width: self.width,
                expected_height: self.height,
                width: other.width,
                height: other.height,
            });
        }
        Ok(())
    }

    /// New image with every sample transformed by `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Samplewise combination of two images of identical shape.
    pub fn zip_map(&self, other: &PlanarImage, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.require_same_dims(other)?;
        if self.channels != other.channels {
            return Err(Error::ChannelMismatch {
                expected: self.channels,
                got: other.channels,
            });
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Combines a multi-channel image with a single-channel map, applying
    /// `f(sample, map_value)` with the map broadcast across channels.
    pub fn zip_broadcast(&self, map: &PlanarImage, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.require_same_dims(map)?;
        map.require_channels(1)?;
        let n = self.pixel_count();
        let m = map.plane(0);
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.channels {
            let plane = self.plane(c);
            for i in 0..n {
                data.push(f(plane[i], m[i]));
            }
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data,
        })
    }

    /// Extracts a single channel as a 1-channel image.
    pub fn extract_channel(&self, channel: usize) -> Self {
        Self {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.plane(channel).to_vec(),
        }
    }

    /// Stacks three 1-channel planes into a 3-channel image.
    pub fn from_planes(planes: [PlanarImage; 3]) -> Result<Self> {
        planes[0].require_same_dims(&planes[1])?;
        planes[0].require_same_dims(&planes[2])?;
        for p in &planes {
            p.require_channels(1)?;
        }
        let (w, h) = (planes[0].width, planes[0].height);
        let mut data = Vec::with_capacity(w * h * 3);
        for p in planes {
            data.extend_from_slice(&p.data);
        }
        Self::new(w, h, 3, data)
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Per-pixel maximum over RGB: the V channel of HSV.
pub fn value_channel(img: &PlanarImage) -> Result<PlanarImage> {
    img.require_channels(3)?;
    let n = img.pixel_count();
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = (0..n).map(|i| r[i].max(g[i]).max(b[i])).collect();
    PlanarImage::new(img.width(), img.height(), 1, data)
}

/// Nearest-rank percentile of a 1-channel image.
///
/// Sort ascending, index = ceil(rank/100 * N) clamped to [1, N].
pub fn percentile(img: &PlanarImage, rank: f64) -> Result<f64> {
    img.require_channels(1)?;
    percentile_of(img.plane(0), rank)
}

/// Nearest-rank percentile of a sample slice.
pub fn percentile_of(values: &[f64], rank: f64) -> Result<f64> {
    let mut copy = values.to_vec();
    percentile_in_place(&mut copy, rank)
}

/// Two nearest-rank percentiles from a single working copy.
pub fn percentile_pair(values: &[f64], lo_rank: f64, hi_rank: f64) -> Result<(f64, f64)> {
    let mut copy = values.to_vec();
    let lo = percentile_in_place(&mut copy, lo_rank)?;
    let hi = percentile_in_place(&mut copy, hi_rank)?;
    Ok((lo, hi))
}

fn percentile_in_place(values: &mut [f64], rank: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=100.0).contains(&rank) {
        return Err(Error::InvalidParam(format!(
            "percentile rank must be in [0, 100], got {rank}"
        )));
    }
    let n = values.len();
    let idx = ((rank / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    let (_, nth, _) = values.select_nth_unstable_by(idx - 1, |a, b| a.total_cmp(b));
    Ok(*nth)
}
