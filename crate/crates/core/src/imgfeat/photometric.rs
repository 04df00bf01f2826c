use super::filters::{self, SOBEL_X, SOBEL_Y};
use super::VALUE_CLIP;
use crate::corpus::ImageGray;

const DARK_THRESHOLD: u8 = 50;
const BRIGHT_THRESHOLD: u8 = 200;

/// `[mean, std, entropy, dark_ratio, bright_ratio, laplacian_var]`
pub fn lighting_features(img: &ImageGray) -> [f64; 6] {
    let vals = filters::intensities(img);
    let n = vals.len() as f64;
    let hist = filters::histogram(img);
    let dark = img.pixels().iter().filter(|&&p| p < DARK_THRESHOLD).count() as f64 / n;
    let bright = img.pixels().iter().filter(|&&p| p > BRIGHT_THRESHOLD).count() as f64 / n;
    [
        filters::mean(&vals),
        filters::std_dev(&vals),
        filters::entropy(&hist),
        dark,
        bright,
        filters::laplacian_variance(img),
    ]
}

/// `[local_contrast, global_contrast, dynamic_range, brightness_entropy,
///   michelson, rms_contrast, std]`
pub fn quality_features(img: &ImageGray) -> [f64; 7] {
    let vals = filters::intensities(img);
    let gx = filters::correlate3(img, &SOBEL_X);
    let gy = filters::correlate3(img, &SOBEL_Y);
    let combined: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.abs() + b.abs()).collect();
    let local_contrast = filters::variance(&combined);

    let hist = filters::histogram(img);
    let mu = filters::mean(&vals);
    let global_contrast = hist
        .iter()
        .enumerate()
        .map(|(i, h)| (i as f64 - mu).powi(2) * h)
        .sum::<f64>()
        .sqrt();

    let mut sorted = vals.clone();
    sorted.sort_by(f64::total_cmp);
    let dynamic_range = filters::percentile(&sorted, 95.0) - filters::percentile(&sorted, 5.0);

    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let michelson = if hi + lo == 0.0 { 0.0 } else { (hi - lo) / (hi + lo) };

    let rms = (vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();

    [
        local_contrast,
        global_contrast,
        dynamic_range,
        filters::entropy(&hist),
        michelson,
        rms,
        filters::std_dev(&vals),
    ]
}

/// `[sigma, snr_db, noise_to_signal, residual_std, residual_mean_abs]`
pub fn noise_features(img: &ImageGray) -> [f64; 5] {
    let (w, h) = (img.width(), img.height());
    let mut diag = Vec::with_capacity((w - 1) * (h - 1));
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            diag.push(img.get(x, y) as f64 - img.get(x + 1, y + 1) as f64);
        }
    }
    let sigma = filters::std_dev(&diag);
    let vals = filters::intensities(img);
    let signal = vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64;
    let noise = sigma * sigma;

    // σ = 0 wins over a zero signal: a noiseless image reports the top clip
    let snr = if noise == 0.0 {
        VALUE_CLIP
    } else if signal == 0.0 {
        -VALUE_CLIP
    } else {
        (10.0 * (signal / noise).log10()).clamp(-VALUE_CLIP, VALUE_CLIP)
    };
    let nsr = if signal == 0.0 { 0.0 } else { noise / signal };

    let med = filters::median3(img);
    let residual: Vec<f64> = vals.iter().zip(&med).map(|(v, m)| v - m).collect();
    let mad = residual.iter().map(|r| r.abs()).sum::<f64>() / residual.len() as f64;
    [sigma, snr, nsr, filters::std_dev(&residual), mad]
}
