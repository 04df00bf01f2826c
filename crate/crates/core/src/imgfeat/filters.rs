//! Pixel-level building blocks. Every 3x3 operation replicates edge pixels and
//! produces an output at every pixel, so responses have the image's shape.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::corpus::ImageGray;

pub type Kernel3 = [[f64; 3]; 3];

pub const SOBEL_X: Kernel3 = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
pub const SOBEL_Y: Kernel3 = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
pub const LAPLACIAN_4: Kernel3 = [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]];

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Fetches the 3x3 neighbourhood around (x, y) with replicated borders.
#[inline]
fn neighbourhood(img: &ImageGray, x: usize, y: usize) -> [[f64; 3]; 3] {
    let (w, h) = (img.width(), img.height());
    let mut out = [[0.0; 3]; 3];
    for (dy, row) in out.iter_mut().enumerate() {
        let yy = clamp_index(y as isize + dy as isize - 1, h);
        for (dx, v) in row.iter_mut().enumerate() {
            let xx = clamp_index(x as isize + dx as isize - 1, w);
            *v = img.get(xx, yy) as f64;
        }
    }
    out
}

/// 3x3 correlation with edge replication.
pub fn correlate3(img: &ImageGray, k: &Kernel3) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let n = neighbourhood(img, x, y);
            let mut acc = 0.0;
            for r in 0..3 {
                for c in 0..3 {
                    acc += k[r][c] * n[r][c];
                }
            }
            out.push(acc);
        }
    }
    out
}

pub fn median3(img: &ImageGray) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let n = neighbourhood(img, x, y);
            let mut vals: [f64; 9] = std::array::from_fn(|i| n[i / 3][i % 3]);
            vals.sort_by(f64::total_cmp);
            out.push(vals[4]);
        }
    }
    out
}

/// Mean of the 3x3 neighbourhood of `values` (same shape as the image).
pub fn box3(values: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -1..=1isize {
                let yy = clamp_index(y as isize + dy, h);
                for dx in -1..=1isize {
                    let xx = clamp_index(x as isize + dx, w);
                    acc += values[yy * w + xx];
                }
            }
            out.push(acc / 9.0);
        }
    }
    out
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divides by n).
pub fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    variance(values).sqrt()
}

pub fn intensities(img: &ImageGray) -> Vec<f64> {
    img.pixels().iter().map(|&p| p as f64).collect()
}

pub fn mean_intensity(img: &ImageGray) -> f64 {
    img.pixels().iter().map(|&p| p as u64).sum::<u64>() as f64 / img.pixels().len() as f64
}

pub fn laplacian_variance(img: &ImageGray) -> f64 {
    variance(&correlate3(img, &LAPLACIAN_4))
}

/// Normalized 256-bin histogram.
pub fn histogram(img: &ImageGray) -> [f64; 256] {
    let mut counts = [0u64; 256];
    for &p in img.pixels() {
        counts[p as usize] += 1;
    }
    let n = img.pixels().len() as f64;
    counts.map(|c| c as f64 / n)
}

/// Shannon entropy in nats; empty bins contribute nothing.
pub fn entropy(hist: &[f64; 256]) -> f64 {
    -hist.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>() + 0.0
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Unnormalized forward 2-D DFT magnitudes in natural (unshifted) order.
pub fn fft_magnitude(img: &ImageGray) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);
    let mut data: Vec<Complex<f64>> = img.pixels().iter().map(|&p| Complex::new(p as f64, 0.0)).collect();
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
    data.iter().map(|c| c.norm()).collect()
}

/// Signed offset of frequency index `u` from the center of a shifted spectrum
/// of length `n` (DC moves to index n/2).
#[inline]
pub fn centered_offset(u: usize, n: usize) -> f64 {
    ((u + n / 2) % n) as f64 - (n / 2) as f64
}
