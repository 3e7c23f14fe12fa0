use super::{ImageBuffer, ImageError, Result, Threshold};

/// Normalized 1-D Gaussian taps `exp(-i²/2σ²)` for `i` in `-(ksize/2)..=ksize/2`.
pub fn gaussian_kernel(sigma: f64, ksize: usize) -> Result<Vec<f64>> {
    if ksize == 0 || ksize.is_multiple_of(2) {
        return Err(ImageError::Argument(format!("kernel size must be odd and positive, got {ksize}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(ImageError::Argument(format!("sigma must be positive, got {sigma}")));
    }
    let radius = (ksize / 2) as i64;
    let mut taps: Vec<f64> = (-radius..=radius).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(taps)
}

/// Separable Gaussian blur with clamp-to-edge borders, applied per channel.
pub fn gaussian_blur(img: &ImageBuffer, sigma: f64, ksize: usize) -> Result<ImageBuffer> {
    let taps = gaussian_kernel(sigma, ksize)?;
    if ksize == 1 {
        return Ok(img.clone());
    }
    let taps: Vec<f32> = taps.into_iter().map(|t| t as f32).collect();
    let radius = (ksize / 2) as isize;
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let src = img.data();

    let mut horizontal = vec![0f32; src.len()];
    for y in 0..h {
        let row = &src[y * w * ch..(y + 1) * w * ch];
        let out = &mut horizontal[y * w * ch..(y + 1) * w * ch];
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0f32;
                for (k, tap) in taps.iter().enumerate() {
                    let sx = (x as isize + k as isize - radius).clamp(0, w as isize - 1) as usize;
                    acc += tap * row[sx * ch + c] as f32;
                }
                out[x * ch + c] = acc;
            }
        }
    }

    let mut out = vec![0u8; src.len()];
    let mut acc = vec![0f32; w * ch];
    for y in 0..h {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (k, tap) in taps.iter().enumerate() {
            let sy = (y as isize + k as isize - radius).clamp(0, h as isize - 1) as usize;
            for (a, v) in acc.iter_mut().zip(&horizontal[sy * w * ch..(sy + 1) * w * ch]) {
                *a += tap * v;
            }
        }
        for (dst, v) in out[y * w * ch..(y + 1) * w * ch].iter_mut().zip(&acc) {
            *dst = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    ImageBuffer::from_raw(w, h, ch, out)
}

/// Lookup table of global histogram equalization for `hist`.
///
/// Maps `v` to `round((cdf(v) - cdf_min) / (N - cdf_min) * 255)`, where
/// `cdf_min` is the smallest nonzero CDF value. Returns `None` for empty or
/// single-valued histograms, which equalization leaves unchanged.
pub fn equalization_lut(hist: &[u64; 256]) -> Option<[u8; 256]> {
    let mut cdf = [0u64; 256];
    let mut running = 0u64;
    for (v, count) in hist.iter().enumerate() {
        running += count;
        cdf[v] = running;
    }
    let total = running;
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    if total == cdf_min {
        return None;
    }
    let denom = (total - cdf_min) as f64;
    let mut lut = [0u8; 256];
    for v in 0..256 {
        let num = cdf[v].saturating_sub(cdf_min) as f64;
        lut[v] = (num / denom * 255.0).round() as u8;
    }
    Some(lut)
}

/// Global histogram equalization of a grayscale image, see [`equalization_lut`].
pub fn equalize_histogram(img: &ImageBuffer) -> Result<ImageBuffer> {
    require_gray(img, "equalize_histogram")?;
    let Some(lut) = equalization_lut(&img.histogram()) else {
        return Ok(img.clone());
    };
    let data = img.data().iter().map(|&v| lut[v as usize]).collect();
    ImageBuffer::from_raw(img.width(), img.height(), 1, data)
}

/// Otsu's threshold over a 256-bin histogram.
///
/// Class 0 is `v <= t`, class 1 is `v > t`; returns the smallest `t`
/// maximizing between-class variance.
pub fn otsu_threshold(hist: &[u64; 256]) -> u8 {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return 0;
    }
    let sum_all: f64 = hist.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum();
    let mut best_t = 0u8;
    let mut best_var = -1.0f64;
    let mut n0 = 0u64;
    let mut s0 = 0f64;
    for t in 0..256usize {
        n0 += hist[t];
        s0 += t as f64 * hist[t] as f64;
        let n1 = total - n0;
        let var = if n0 == 0 || n1 == 0 {
            0.0
        } else {
            let mu0 = s0 / n0 as f64;
            let mu1 = (sum_all - s0) / n1 as f64;
            let (w0, w1) = (n0 as f64 / total as f64, n1 as f64 / total as f64);
            w0 * w1 * (mu0 - mu1) * (mu0 - mu1)
        };
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    best_t
}

/// Binarizes a grayscale image: samples above `t.value` become 255, the rest 0.
pub fn threshold_binary(img: &ImageBuffer, t: Threshold) -> Result<ImageBuffer> {
    require_gray(img, "threshold_binary")?;
    let data = img.data().iter().map(|&v| if v > t.value { 255 } else { 0 }).collect();
    ImageBuffer::from_raw(img.width(), img.height(), 1, data)
}

fn require_gray(img: &ImageBuffer, op: &str) -> Result<()> {
    if img.channels() != 1 {
        return Err(ImageError::Argument(format!("{op} needs a grayscale image, got {} channels", img.channels())));
    }
    Ok(())
}
