use super::filters::{self, SOBEL_X, SOBEL_Y};
use crate::corpus::ImageGray;

/// `[gradient_mean, gradient_std, laplacian_var, highfreq_energy,
///   log_spectrum_mean, laplacian_var]`. The last entry repeats the third.
pub fn sharpness_features(img: &ImageGray) -> [f64; 6] {
    let gx = filters::correlate3(img, &SOBEL_X);
    let gy = filters::correlate3(img, &SOBEL_Y);
    let magnitude: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let lap_var = filters::laplacian_variance(img);
    let (highfreq, log_mean) = spectrum_stats(img);
    [
        filters::mean(&magnitude),
        filters::std_dev(&magnitude),
        lap_var,
        highfreq,
        log_mean,
        lap_var,
    ]
}

/// Mean magnitude outside the central disc of radius min(h, w)/4 of the
/// centered spectrum, and the mean of ln(1 + |F|) over the whole spectrum.
fn spectrum_stats(img: &ImageGray) -> (f64, f64) {
    let (w, h) = (img.width(), img.height());
    let mag = filters::fft_magnitude(img);
    let radius = w.min(h) as f64 / 4.0;
    let (mut high_sum, mut high_n) = (0.0, 0usize);
    let mut log_sum = 0.0;
    for v in 0..h {
        let dy = filters::centered_offset(v, h);
        for u in 0..w {
            let dx = filters::centered_offset(u, w);
            let m = mag[v * w + u];
            if (dx * dx + dy * dy).sqrt() >= radius {
                high_sum += m;
                high_n += 1;
            }
            log_sum += m.ln_1p();
        }
    }
    let high = if high_n == 0 { 0.0 } else { high_sum / high_n as f64 };
    (high, log_sum / mag.len() as f64)
}
