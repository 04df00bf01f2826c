use super::filters::{self, SOBEL_X, SOBEL_Y};
use crate::corpus::ImageGray;

pub const CANNY_LOW: f64 = 50.0;
pub const CANNY_HIGH: f64 = 150.0;

/// `[mean_local_variance, edge_density]`
pub fn texture_features(img: &ImageGray) -> [f64; 2] {
    let (w, h) = (img.width(), img.height());
    let vals = filters::intensities(img);
    let squares: Vec<f64> = vals.iter().map(|v| v * v).collect();
    let m1 = filters::box3(&vals, w, h);
    let m2 = filters::box3(&squares, w, h);
    let local_var: Vec<f64> = m2.iter().zip(&m1).map(|(s, m)| s - m * m).collect();

    let edges = canny(img, CANNY_LOW, CANNY_HIGH);
    let density = edges.iter().filter(|&&e| e).count() as f64 / edges.len() as f64;
    [filters::mean(&local_var), density]
}

/// Canny edge map without pre-smoothing: 3x3 Sobel gradients (replicated
/// borders), L1 magnitude, 4-direction non-maximum suppression and 8-connected
/// hysteresis. Magnitudes outside the image count as zero during suppression.
/// On a two-pixel-wide gradient plateau the first pixel along the gradient
/// direction is kept, so a step edge yields a single-pixel line.
pub fn canny(img: &ImageGray, low: f64, high: f64) -> Vec<bool> {
    let (w, h) = (img.width(), img.height());
    let gx = filters::correlate3(img, &SOBEL_X);
    let gy = filters::correlate3(img, &SOBEL_Y);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.abs() + b.abs()).collect();
    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    // tan(22.5°)
    const TAN_22_5: f64 = 0.414_213_562_373_095_03;
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        None,
        Weak,
        Strong,
    }
    let mut marks = vec![Mark::None; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m <= low {
                continue;
            }
            let (ax, ay) = (gx[i].abs(), gy[i].abs());
            let (xi, yi) = (x as isize, y as isize);
            let is_max = if ay < TAN_22_5 * ax {
                m > at(xi - 1, yi) && m >= at(xi + 1, yi)
            } else if ay * TAN_22_5 > ax {
                m > at(xi, yi - 1) && m >= at(xi, yi + 1)
            } else {
                // gradient along a diagonal; same-sign components point down-right
                let s: isize = if (gx[i] < 0.0) != (gy[i] < 0.0) { -1 } else { 1 };
                m > at(xi - s, yi - 1) && m > at(xi + s, yi + 1)
            };
            if is_max {
                marks[i] = if m > high { Mark::Strong } else { Mark::Weak };
            }
        }
    }

    let mut edges = vec![false; w * h];
    let mut stack: Vec<usize> = (0..w * h).filter(|&i| marks[i] == Mark::Strong).collect();
    for &i in &stack {
        edges[i] = true;
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !edges[j] && marks[j] == Mark::Weak {
                    edges[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    edges
}
