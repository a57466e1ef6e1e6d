use crate::error::{Error, Result};

/// Row-major linear RGB image with channel values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("image", format!("empty image {width}x{height}")));
        }
        if data.len() != width * height * 3 {
            return Err(Error::shape(
                "image",
                format!("{}x{}x3 needs {} values, got {}", width, height, width * height * 3, data.len()),
            ));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain("image", format!("channel value {bad} outside [0,1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self::new(width, height, data)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend(f(x, y).iter().map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Bilinear sample at continuous coordinates (pixel centers at index + 0.5),
    /// clamping both axes to the image border.
    pub fn sample_clamped(&self, x: f64, y: f64) -> [f64; 3] {
        let (x0, x1, tx) = clamp_taps(x, self.width);
        let (y0, y1, ty) = clamp_taps(y, self.height);
        self.blend(x0, x1, tx, y0, y1, ty)
    }

    /// Bilinear sample with the horizontal axis wrapping around and the
    /// vertical axis clamped.
    pub fn sample_wrap_x(&self, x: f64, y: f64) -> [f64; 3] {
        let fx = x - 0.5;
        let fl = fx.floor();
        let tx = fx - fl;
        let w = self.width as i64;
        let x0 = (fl as i64).rem_euclid(w) as usize;
        let x1 = (fl as i64 + 1).rem_euclid(w) as usize;
        let (y0, y1, ty) = clamp_taps(y, self.height);
        self.blend(x0, x1, tx, y0, y1, ty)
    }

    #[inline]
    fn blend(&self, x0: usize, x1: usize, tx: f64, y0: usize, y1: usize, ty: f64) -> [f64; 3] {
        let p00 = self.pixel(x0, y0);
        let p10 = self.pixel(x1, y0);
        let p01 = self.pixel(x0, y1);
        let p11 = self.pixel(x1, y1);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let top = p00[c] + (p10[c] - p00[c]) * tx;
            let bottom = p01[c] + (p11[c] - p01[c]) * tx;
            out[c] = (top + (bottom - top) * ty).clamp(0.0, 1.0);
        }
        out
    }

    /// Copy of the rectangle starting at (x, y).
    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Result<Image> {
        if width == 0 || height == 0 || x + width > self.width || y + height > self.height {
            return Err(Error::domain(
                "crop",
                format!("{width}x{height}+{x}+{y} outside {}x{}", self.width, self.height),
            ));
        }
        let mut data = Vec::with_capacity(width * height * 3);
        for row in y..y + height {
            let start = (row * self.width + x) * 3;
            data.extend_from_slice(&self.data[start..start + width * 3]);
        }
        Ok(Image { width, height, data })
    }

    /// Area-weighted resampling to an arbitrary size. Every output pixel is the
    /// coverage-weighted mean of the source pixels under its footprint, which
    /// makes downscaling alias-free and upscaling piecewise constant.
    pub fn resize(&self, width: usize, height: usize) -> Result<Image> {
        if width == 0 || height == 0 {
            return Err(Error::domain("resize", format!("target {width}x{height}")));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let xs = footprints(self.width, width);
        let ys = footprints(self.height, height);
        let mut data = vec![0.0; width * height * 3];
        for (oy, yf) in ys.iter().enumerate() {
            for (ox, xf) in xs.iter().enumerate() {
                let mut acc = [0.0; 3];
                let mut total = 0.0;
                for &(sy, wy) in yf {
                    for &(sx, wx) in xf {
                        let w = wx * wy;
                        let p = self.pixel(sx, sy);
                        for c in 0..3 {
                            acc[c] += w * p[c];
                        }
                        total += w;
                    }
                }
                let i = (oy * width + ox) * 3;
                for c in 0..3 {
                    data[i + c] = (acc[c] / total).clamp(0.0, 1.0);
                }
            }
        }
        Ok(Image { width, height, data })
    }
}

fn clamp_taps(p: f64, n: usize) -> (usize, usize, f64) {
    let f = p - 0.5;
    let fl = f.floor();
    let t = f - fl;
    let max = n as i64 - 1;
    let i0 = (fl as i64).clamp(0, max) as usize;
    let i1 = (fl as i64 + 1).clamp(0, max) as usize;
    (i0, i1, t)
}

/// For each destination index, the source indices it overlaps with their
/// overlap lengths.
fn footprints(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last.max(first + 1))
                .filter_map(|s| {
                    let overlap = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                    (overlap > 0.0).then_some((s.min(src - 1), overlap))
                })
                .collect()
        })
        .collect()
}

/// A full-sphere panorama: an [`Image`] whose width is exactly twice its height.
#[derive(Debug, Clone, PartialEq)]
pub struct EquirectImage(Image);

impl EquirectImage {
    pub fn new(image: Image) -> Result<Self> {
        check_aspect(image.width(), image.height())?;
        Ok(Self(image))
    }

    pub fn image(&self) -> &Image {
        &self.0
    }

    pub fn into_image(self) -> Image {
        self.0
    }
}

impl std::ops::Deref for EquirectImage {
    type Target = Image;

    fn deref(&self) -> &Image {
        &self.0
    }
}

pub(crate) fn check_aspect(width: usize, height: usize) -> Result<()> {
    if height == 0 || width != 2 * height {
        return Err(Error::Aspect { width, height });
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB over rows `[row_lo, row_hi)` for signals in [0,1].
pub fn psnr_rows(a: &Image, b: &Image, row_lo: usize, row_hi: usize) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::shape("psnr", "image sizes differ"));
    }
    if row_lo >= row_hi || row_hi > a.height() {
        return Err(Error::domain("psnr", format!("row range {row_lo}..{row_hi}")));
    }
    let w = a.width() * 3;
    let (sa, sb) = (&a.data()[row_lo * w..row_hi * w], &b.data()[row_lo * w..row_hi * w]);
    let mse = sa.iter().zip(sb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / sa.len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}
