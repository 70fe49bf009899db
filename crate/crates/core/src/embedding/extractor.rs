//! Deterministic stand-in for a frozen backbone.
//!
//! Recipe, applied to an `H x W x 3` raster of bytes:
//!
//! 1. Area-average the image onto a 16x16 grid (exact fractional pixel
//!    overlap), scale by 1/255, and lay it out row-major as `(row, col, channel)`.
//! 2. Append one 32-bin histogram per channel (`bin = value >> 3`), each
//!    normalised by `H * W`. Channel 0 bins first.
//! 3. Multiply the 864-long feature by a `dim x 864` projection whose entries
//!    are drawn row-major from [`SeededRng`] as `(2u - 1) * sqrt(3 / 864)`,
//!    then apply `tanh` elementwise.
//!
//! All arithmetic is f64; the output is rounded to f32 once at the end.

use super::{EmbeddingError, EmbeddingVector};
use crate::rng::SeededRng;

pub const GRID: usize = 16;
pub const HIST_BINS: usize = 32;
pub const CHANNELS: usize = 3;
pub const FEATURE_LEN: usize = GRID * GRID * CHANNELS + HIST_BINS * CHANNELS;
pub const MIN_SIDE: usize = 8;

/// A decoded image, interleaved bytes in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self, EmbeddingError> {
        if data.len() != width * height * channels {
            return Err(EmbeddingError::RasterShape {
                expected: width * height * channels,
                found: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            channels: 3,
            data,
        }
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    fn at(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }
}

impl From<image::RgbImage> for Raster {
    fn from(img: image::RgbImage) -> Self {
        let (w, h) = img.dimensions();
        Self {
            width: w as usize,
            height: h as usize,
            channels: 3,
            data: img.into_raw(),
        }
    }
}

/// `(source index, weight)` lists for each of the `GRID` output cells along
/// an axis of length `len`.
fn area_weights(len: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = len as f64 / GRID as f64;
    (0..GRID)
        .map(|cell| {
            let lo = cell as f64 * scale;
            let hi = (cell + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(len);
            (first..last)
                .filter_map(|i| {
                    let w = hi.min(i as f64 + 1.0) - lo.max(i as f64);
                    (w > 0.0).then_some((i, w))
                })
                .collect()
        })
        .collect()
}

/// The 864-long pre-projection feature.
pub fn raw_features(image: &Raster) -> Result<Vec<f64>, EmbeddingError> {
    if image.channels != CHANNELS {
        return Err(EmbeddingError::ChannelCount(image.channels));
    }
    if image.width < MIN_SIDE || image.height < MIN_SIDE {
        return Err(EmbeddingError::ImageTooSmall {
            width: image.width,
            height: image.height,
        });
    }

    let mut feature = vec![0.0; FEATURE_LEN];
    let rows = area_weights(image.height);
    let cols = area_weights(image.width);
    let cell_area = (image.height as f64 / GRID as f64) * (image.width as f64 / GRID as f64);
    for (r, row_w) in rows.iter().enumerate() {
        for (c, col_w) in cols.iter().enumerate() {
            let mut acc = [0.0f64; CHANNELS];
            for &(y, wy) in row_w {
                for &(x, wx) in col_w {
                    let w = wy * wx;
                    for (ch, a) in acc.iter_mut().enumerate() {
                        *a += w * f64::from(image.at(x, y, ch));
                    }
                }
            }
            for (ch, a) in acc.iter().enumerate() {
                feature[(r * GRID + c) * CHANNELS + ch] = a / cell_area / 255.0;
            }
        }
    }

    let hist = &mut feature[GRID * GRID * CHANNELS..];
    for px in image.data.chunks_exact(CHANNELS) {
        for (ch, &v) in px.iter().enumerate() {
            hist[ch * HIST_BINS + (v >> 3) as usize] += 1.0;
        }
    }
    let pixels = (image.width * image.height) as f64;
    hist.iter_mut().for_each(|h| *h /= pixels);
    Ok(feature)
}

/// Seeded random projection plus the feature recipe above.
#[derive(Debug, Clone)]
pub struct BuiltinExtractor {
    dim: usize,
    seed: u64,
    projection: Vec<f64>,
}

impl BuiltinExtractor {
    pub fn new(dim: usize, seed: u64) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::InvalidConfig("dim must be at least 1".into()));
        }
        let mut rng = SeededRng::new(seed);
        let scale = (3.0 / FEATURE_LEN as f64).sqrt();
        let projection = (0..dim * FEATURE_LEN)
            .map(|_| (2.0 * rng.next_f64() - 1.0) * scale)
            .collect();
        Ok(Self {
            dim,
            seed,
            projection,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Projects an arbitrary 864-long feature and squashes it with tanh.
    pub fn project(&self, feature: &[f64]) -> EmbeddingVector {
        assert_eq!(feature.len(), FEATURE_LEN);
        let values = self
            .projection
            .chunks_exact(FEATURE_LEN)
            .map(|row| {
                let dot: f64 = row.iter().zip(feature).map(|(p, f)| p * f).sum();
                dot.tanh() as f32
            })
            .collect();
        EmbeddingVector::new(values)
    }

    pub fn extract(&self, image: &Raster) -> Result<EmbeddingVector, EmbeddingError> {
        Ok(self.project(&raw_features(image)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_weights_cover_axis_exactly() {
        for len in [8usize, 13, 16, 31, 100] {
            let w = area_weights(len);
            let total: f64 = w.iter().flatten().map(|(_, w)| w).sum();
            assert!((total - len as f64).abs() < 1e-9);
            for cell in &w {
                let s: f64 = cell.iter().map(|(_, w)| w).sum();
                assert!((s - len as f64 / GRID as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn black_image_feature_is_forced() {
        let img = Raster::from_fn(10, 12, |_, _| [0, 0, 0]);
        let f = raw_features(&img).unwrap();
        let grid = GRID * GRID * CHANNELS;
        assert!(f[..grid].iter().all(|&v| v == 0.0));
        for ch in 0..CHANNELS {
            let h = &f[grid + ch * HIST_BINS..grid + (ch + 1) * HIST_BINS];
            assert_eq!(h[0], 1.0);
            assert!(h[1..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn black_image_output_is_tanh_of_projected_histogram_mass() {
        let ex = BuiltinExtractor::new(12, 4).unwrap();
        let img = Raster::from_fn(8, 8, |_, _| [0, 0, 0]);
        let mut fixed = vec![0.0; FEATURE_LEN];
        for ch in 0..CHANNELS {
            fixed[GRID * GRID * CHANNELS + ch * HIST_BINS] = 1.0;
        }
        let out = ex.extract(&img).unwrap();
        assert_eq!(out, ex.project(&fixed));
        assert_eq!(out, ex.extract(&img).unwrap());
    }

    #[test]
    fn uniform_image_grid_equals_pixel_value() {
        let img = Raster::from_fn(23, 9, |_, _| [51, 102, 255]);
        let f = raw_features(&img).unwrap();
        for cell in f[..GRID * GRID * CHANNELS].chunks_exact(3) {
            assert!((cell[0] - 0.2).abs() < 1e-12);
            assert!((cell[1] - 0.4).abs() < 1e-12);
            assert!((cell[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_small_and_wrong_channel_images() {
        let small = Raster::from_fn(7, 20, |_, _| [1, 2, 3]);
        assert!(matches!(raw_features(&small), Err(EmbeddingError::ImageTooSmall { .. })));
        let gray = Raster::new(8, 8, 1, vec![0; 64]).unwrap();
        assert!(matches!(raw_features(&gray), Err(EmbeddingError::ChannelCount(1))));
        assert!(Raster::new(8, 8, 3, vec![0; 10]).is_err());
    }

    #[test]
    fn outputs_are_bounded() {
        let ex = BuiltinExtractor::new(64, 11).unwrap();
        let img = Raster::from_fn(40, 30, |x, y| [(x * 7) as u8, (y * 13) as u8, ((x ^ y) * 5) as u8]);
        let v = ex.extract(&img).unwrap();
        assert_eq!(v.len(), 64);
        assert!(v.iter().all(|x| x.is_finite() && *x > -1.0 && *x < 1.0));
    }
}
