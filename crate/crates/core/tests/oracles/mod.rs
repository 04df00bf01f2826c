//! Direct-formula reference implementations of the classical features, written
//! independently of the library: explicit neighbourhood loops, a naive 2-D
//! DFT, an angle-quantized Canny with sweep-based hysteresis. The `check_*`
//! functions panic on the first mismatch.
#![allow(dead_code)]

use std::f64::consts::PI;

use lineup_core::corpus::{ImageGray, LandmarkSet};
use lineup_core::imgfeat::{
    classical_features, eye_aspect_ratio, geometry_features, lighting_features, mouth_aspect_ratio, noise_features,
    quality_features, sharpness_features, texture_features, CLASSICAL_FEATURE_NAMES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Img {
    pub w: usize,
    pub h: usize,
    pub p: Vec<f64>,
}

impl Img {
    pub fn from(img: &ImageGray) -> Img {
        Img {
            w: img.width(),
            h: img.height(),
            p: img.pixels().iter().map(|&v| v as f64).collect(),
        }
    }

    /// Pixel with replicated borders.
    pub fn at(&self, x: i64, y: i64) -> f64 {
        let x = x.clamp(0, self.w as i64 - 1) as usize;
        let y = y.clamp(0, self.h as i64 - 1) as usize;
        self.p[y * self.w + x]
    }

    pub fn map(&self, f: impl Fn(i64, i64) -> f64) -> Vec<f64> {
        let mut out = Vec::new();
        for y in 0..self.h as i64 {
            for x in 0..self.w as i64 {
                out.push(f(x, y));
            }
        }
        out
    }

    pub fn sobel_x(&self, x: i64, y: i64) -> f64 {
        (self.at(x + 1, y - 1) + 2.0 * self.at(x + 1, y) + self.at(x + 1, y + 1))
            - (self.at(x - 1, y - 1) + 2.0 * self.at(x - 1, y) + self.at(x - 1, y + 1))
    }

    pub fn sobel_y(&self, x: i64, y: i64) -> f64 {
        (self.at(x - 1, y + 1) + 2.0 * self.at(x, y + 1) + self.at(x + 1, y + 1))
            - (self.at(x - 1, y - 1) + 2.0 * self.at(x, y - 1) + self.at(x + 1, y - 1))
    }

    pub fn laplacian(&self, x: i64, y: i64) -> f64 {
        self.at(x - 1, y) + self.at(x + 1, y) + self.at(x, y - 1) + self.at(x, y + 1) - 4.0 * self.at(x, y)
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn pvar(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

pub fn entropy(img: &Img) -> f64 {
    let mut counts = [0usize; 256];
    for &p in &img.p {
        counts[p as usize] += 1;
    }
    let n = img.p.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            -q * q.ln()
        })
        .sum()
}

pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (s.len() - 1) as f64;
    let i = pos as usize;
    if i + 1 >= s.len() {
        return s[s.len() - 1];
    }
    s[i] * (1.0 - (pos - i as f64)) + s[i + 1] * (pos - i as f64)
}

pub fn oracle_lighting(img: &Img) -> Vec<f64> {
    let n = img.p.len() as f64;
    vec![
        mean(&img.p),
        pvar(&img.p).sqrt(),
        entropy(img),
        img.p.iter().filter(|&&p| p < 50.0).count() as f64 / n,
        img.p.iter().filter(|&&p| p > 200.0).count() as f64 / n,
        pvar(&img.map(|x, y| img.laplacian(x, y))),
    ]
}

pub fn oracle_quality(img: &Img) -> Vec<f64> {
    let combined = img.map(|x, y| img.sobel_x(x, y).abs() + img.sobel_y(x, y).abs());
    let mu = mean(&img.p);
    let n = img.p.len() as f64;
    let mut counts = [0usize; 256];
    for &p in &img.p {
        counts[p as usize] += 1;
    }
    let global = (0..256)
        .map(|i| (i as f64 - mu).powi(2) * counts[i] as f64 / n)
        .sum::<f64>()
        .sqrt();
    let max = img.p.iter().cloned().fold(f64::MIN, f64::max);
    let min = img.p.iter().cloned().fold(f64::MAX, f64::min);
    let michelson = if max + min == 0.0 {
        0.0
    } else {
        (max - min) / (max + min)
    };
    vec![
        pvar(&combined),
        global,
        percentile(&img.p, 0.95) - percentile(&img.p, 0.05),
        entropy(img),
        michelson,
        (img.p.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt(),
        pvar(&img.p).sqrt(),
    ]
}

pub fn oracle_noise(img: &Img) -> Vec<f64> {
    let mut diff = Vec::new();
    for y in 0..img.h as i64 - 1 {
        for x in 0..img.w as i64 - 1 {
            diff.push(img.at(x, y) - img.at(x + 1, y + 1));
        }
    }
    let sigma = pvar(&diff).sqrt();
    let power = img.p.iter().map(|v| v * v).sum::<f64>() / img.p.len() as f64;
    let snr = if sigma == 0.0 {
        1e6
    } else if power == 0.0 {
        -1e6
    } else {
        (10.0 * (power / (sigma * sigma)).log10()).clamp(-1e6, 1e6)
    };
    let nsr = if power == 0.0 { 0.0 } else { sigma * sigma / power };
    let residual = img.map(|x, y| {
        let mut win = Vec::new();
        for dy in -1..=1 {
            for dx in -1..=1 {
                win.push(img.at(x + dx, y + dy));
            }
        }
        win.sort_by(|a, b| a.partial_cmp(b).unwrap());
        img.at(x, y) - win[4]
    });
    vec![
        sigma,
        snr,
        nsr,
        pvar(&residual).sqrt(),
        residual.iter().map(|r| r.abs()).sum::<f64>() / residual.len() as f64,
    ]
}

/// Naive 2-D DFT magnitude, already shifted so that DC sits at (h/2, w/2).
pub fn shifted_dft_magnitude(img: &Img) -> Vec<Vec<f64>> {
    let (w, h) = (img.w, img.h);
    let mut out = vec![vec![0.0; w]; h];
    for v in 0..h {
        for u in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let phase = -2.0 * PI * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                    re += img.p[y * w + x] * phase.cos();
                    im += img.p[y * w + x] * phase.sin();
                }
            }
            out[(v + h / 2) % h][(u + w / 2) % w] = re.hypot(im);
        }
    }
    out
}

pub fn oracle_sharpness(img: &Img) -> Vec<f64> {
    let mag = img.map(|x, y| img.sobel_x(x, y).hypot(img.sobel_y(x, y)));
    let lap = pvar(&img.map(|x, y| img.laplacian(x, y)));
    let spec = shifted_dft_magnitude(img);
    let (cy, cx) = ((img.h / 2) as f64, (img.w / 2) as f64);
    let radius = img.w.min(img.h) as f64 / 4.0;
    let mut high = Vec::new();
    let mut logs = Vec::new();
    for (i, row) in spec.iter().enumerate() {
        for (j, &m) in row.iter().enumerate() {
            if ((i as f64 - cy).powi(2) + (j as f64 - cx).powi(2)).sqrt() >= radius {
                high.push(m);
            }
            logs.push((1.0 + m).ln());
        }
    }
    vec![mean(&mag), pvar(&mag).sqrt(), lap, mean(&high), mean(&logs), lap]
}

/// Canny with angle quantization and repeated hysteresis sweeps.
pub fn oracle_canny(img: &Img, low: f64, high: f64) -> Vec<bool> {
    let (w, h) = (img.w as i64, img.h as i64);
    let gx = img.map(|x, y| img.sobel_x(x, y));
    let gy = img.map(|x, y| img.sobel_y(x, y));
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.abs() + b.abs()).collect();
    let m = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            mag[(y * w + x) as usize]
        }
    };
    // 0 none, 1 weak, 2 strong
    let mut state = vec![0u8; mag.len()];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if mag[i] <= low {
                continue;
            }
            let mut angle = gy[i].atan2(gx[i]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let c = mag[i];
            let keep = if angle < 22.5 || angle > 157.5 {
                c > m(x - 1, y) && c >= m(x + 1, y)
            } else if angle > 67.5 && angle < 112.5 {
                c > m(x, y - 1) && c >= m(x, y + 1)
            } else if angle <= 67.5 {
                // gradient toward +x,+y in image coordinates
                c > m(x - 1, y - 1) && c > m(x + 1, y + 1)
            } else {
                c > m(x + 1, y - 1) && c > m(x - 1, y + 1)
            };
            if keep {
                state[i] = if c > high { 2 } else { 1 };
            }
        }
    }
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                let i = (y * w + x) as usize;
                if state[i] != 1 {
                    continue;
                }
                let touches_strong = (-1..=1).any(|dy| {
                    (-1..=1).any(|dx| {
                        let (nx, ny) = (x + dx, y + dy);
                        nx >= 0 && ny >= 0 && nx < w && ny < h && state[(ny * w + nx) as usize] == 2
                    })
                });
                if touches_strong {
                    state[i] = 2;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    state.iter().map(|&s| s == 2).collect()
}

pub fn oracle_texture(img: &Img) -> Vec<f64> {
    let local = img.map(|x, y| {
        let (mut s1, mut s2) = (0.0, 0.0);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let v = img.at(x + dx, y + dy);
                s1 += v;
                s2 += v * v;
            }
        }
        s2 / 9.0 - (s1 / 9.0).powi(2)
    });
    let edges = oracle_canny(img, 50.0, 150.0);
    vec![
        mean(&local),
        edges.iter().filter(|&&e| e).count() as f64 / edges.len() as f64,
    ]
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImageGray {
    let kind = rng.gen_range(0..3);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(0.0..w as f64),
                rng.gen_range(0.0..h as f64),
                rng.gen_range(2.0..8.0),
                rng.gen_range(-150.0..150.0),
            )
        })
        .collect();
    let base = rng.gen_range(20.0..200.0);
    let noise: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let amp = rng.gen_range(0.0..40.0);
    ImageGray::from_fn(w, h, |x, y| {
        let v = match kind {
            0 => (noise[y * w + x] + 1.0) * 127.5,
            _ => {
                let b: f64 = blobs
                    .iter()
                    .map(|&(cx, cy, r, a)| {
                        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                        if kind == 1 {
                            a * (-d2 / (2.0 * r * r)).exp()
                        } else if d2 < r * r {
                            a
                        } else {
                            0.0
                        }
                    })
                    .sum();
                base + b + amp * noise[y * w + x]
            }
        };
        v.round().clamp(0.0, 255.0) as u8
    })
    .unwrap()
}

pub fn assert_close(name: &str, got: f64, want: f64, rel: f64) {
    let diff = (got - want).abs();
    assert!(
        diff <= rel * want.abs() || diff <= 1e-12,
        "{name}: got {got}, oracle {want} (diff {diff})"
    );
}
// ---- geometry ----

pub type Pt = [f64; 2];

/// A frontal 68-point face in a 200x200 frame: jaw arc, brows, nose,
/// almond eyes and lips, symmetric about x = 100.
pub fn template_face() -> Vec<Pt> {
    let mut p = vec![[0.0; 2]; 68];
    for i in 0..17 {
        let t = PI * i as f64 / 16.0;
        p[i] = [100.0 - 60.0 * t.cos(), 90.0 + 60.0 * t.sin()];
    }
    for i in 0..5 {
        p[17 + i] = [55.0 + 8.0 * i as f64, 70.0 - 3.0 * (i as f64 - 2.0).abs()];
        p[26 - i] = [145.0 - 8.0 * i as f64, 70.0 - 3.0 * (i as f64 - 2.0).abs()];
    }
    for i in 0..4 {
        p[27 + i] = [100.0, 80.0 + 8.0 * i as f64];
    }
    for i in 0..5 {
        p[31 + i] = [92.0 + 4.0 * i as f64, 116.0 + (i as f64 - 2.0).abs()];
    }
    let eye = |cx: f64| -> [Pt; 6] {
        [
            [cx - 12.0, 85.0],
            [cx - 5.0, 80.0],
            [cx + 5.0, 80.0],
            [cx + 12.0, 85.0],
            [cx + 5.0, 89.0],
            [cx - 5.0, 89.0],
        ]
    };
    p[36..42].copy_from_slice(&eye(75.0));
    p[42..48].copy_from_slice(&eye(125.0));
    let outer = [
        [80.0, 135.0],
        [87.0, 130.0],
        [94.0, 128.0],
        [100.0, 129.0],
        [106.0, 128.0],
        [113.0, 130.0],
        [120.0, 135.0],
        [113.0, 141.0],
        [106.0, 144.0],
        [100.0, 145.0],
        [94.0, 144.0],
        [87.0, 141.0],
    ];
    p[48..60].copy_from_slice(&outer);
    let inner = [
        [85.0, 135.0],
        [93.0, 133.0],
        [100.0, 133.0],
        [107.0, 133.0],
        [115.0, 135.0],
        [107.0, 139.0],
        [100.0, 139.0],
        [93.0, 139.0],
    ];
    p[60..68].copy_from_slice(&inner);
    p
}

pub fn jitter(rng: &mut ChaCha8Rng, pts: &[Pt], amount: f64) -> Vec<Pt> {
    pts.iter()
        .map(|p| {
            [
                p[0] + rng.gen_range(-amount..amount),
                p[1] + rng.gen_range(-amount..amount),
            ]
        })
        .collect()
}

pub fn similarity(pts: &[Pt], angle: f64, scale: f64, t: Pt) -> Vec<Pt> {
    let (s, c) = angle.sin_cos();
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    pts.iter()
        .map(|p| {
            let (x, y) = (p[0] - cx, p[1] - cy);
            [cx + t[0] + scale * (c * x - s * y), cy + t[1] + scale * (s * x + c * y)]
        })
        .collect()
}

pub fn d(a: Pt, b: Pt) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn oracle_ear(p: &[Pt], first: usize) -> f64 {
    let e = |k: usize| p[first + k];
    (d(e(1), e(5)) + d(e(2), e(4))) / (2.0 * d(e(0), e(3)))
}

pub fn oracle_geometry(p: &[Pt], faces: u32, w: f64, h: f64) -> Vec<f64> {
    let xs: Vec<f64> = p.iter().map(|q| q[0]).collect();
    let ys: Vec<f64> = p.iter().map(|q| q[1]).collect();
    let (minx, maxx) = (
        xs.iter().cloned().fold(f64::MAX, f64::min),
        xs.iter().cloned().fold(f64::MIN, f64::max),
    );
    let (miny, maxy) = (
        ys.iter().cloned().fold(f64::MAX, f64::min),
        ys.iter().cloned().fold(f64::MIN, f64::max),
    );
    let left = oracle_ear(p, 36);
    let right = oracle_ear(p, 42);
    let mar = (d(p[61], p[67]) + d(p[63], p[65])) / (2.0 * d(p[60], p[64]));
    let centre = |a: usize| {
        let s = (a..a + 6).fold([0.0, 0.0], |acc, i| [acc[0] + p[i][0], acc[1] + p[i][1]]);
        [s[0] / 6.0, s[1] / 6.0]
    };
    let (lc, rc) = (centre(36), centre(42));
    let iod = d(lc, rc);
    let mirrored: Vec<(usize, usize)> = (0..8)
        .map(|i| (i, 16 - i))
        .chain((0..5).map(|i| (17 + i, 26 - i)))
        .chain([(36, 45), (37, 44), (38, 43), (39, 42), (41, 46), (40, 47)])
        .chain([(48, 54), (49, 53), (50, 52), (59, 55)])
        .collect();
    assert_eq!(mirrored.len(), 23);
    let gap = mirrored
        .iter()
        .map(|&(a, b)| (d(p[a], p[27]) - d(p[b], p[27])).abs())
        .sum::<f64>()
        / 23.0;
    let mouth_y = (60..68).map(|i| p[i][1]).sum::<f64>() / 8.0;
    vec![
        1.0,
        faces as f64,
        (maxx - minx) * (maxy - miny) / (w * h),
        ((minx + maxx) / 2.0 - w / 2.0) / w,
        ((miny + maxy) / 2.0 - h / 2.0) / h,
        left,
        right,
        (left + right) / 2.0,
        (left - right).abs(),
        mar,
        (1.0 - gap / iod).clamp(0.0, 1.0),
        (rc[1] - lc[1]).atan2(rc[0] - lc[0]) * 180.0 / PI,
        (p[30][0] - (lc[0] + rc[0]) / 2.0) / iod,
        (mouth_y - p[30][1]) / (maxy - miny),
        (maxx - minx) / w,
        (maxy - miny) / h,
    ]
}

/// The 26 photometric features of `images` random 32x32 images.
pub fn check_random_images(images: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edge_positive = 0;
    for case in 0..images {
        let g = random_image(&mut rng, 32, 32);
        let img = Img::from(&g);
        let got: Vec<f64> = [
            lighting_features(&g).to_vec(),
            quality_features(&g).to_vec(),
            noise_features(&g).to_vec(),
            sharpness_features(&g).to_vec(),
            texture_features(&g).to_vec(),
        ]
        .concat();
        let want: Vec<f64> = [
            oracle_lighting(&img),
            oracle_quality(&img),
            oracle_noise(&img),
            oracle_sharpness(&img),
            oracle_texture(&img),
        ]
        .concat();
        assert_eq!(got.len(), 26);
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            // spectrum-based values (high-frequency energy, log magnitude) use the looser tolerance
            let rel = if i == 21 || i == 22 { 1e-5 } else { 1e-6 };
            assert_close(&format!("case {case} {}", CLASSICAL_FEATURE_NAMES[i]), *g, *w, rel);
        }
        if got[25] > 0.0 {
            edge_positive += 1;
        }
    }
    assert!(
        edge_positive > 10,
        "edge density exercised on only {edge_positive} images"
    );
}

/// Every intensity-variation feature of a constant image is exactly zero.
pub fn check_constant_column() {
    for c in [0u8, 1, 10, 128, 254, 255] {
        let g = ImageGray::filled(17, 13, c).unwrap();
        let f = classical_features(&g, None);
        for (i, name) in CLASSICAL_FEATURE_NAMES.iter().enumerate() {
            let expected = match i {
                0 => c as f64,
                3 => (c < 50) as u8 as f64,
                4 => (c > 200) as u8 as f64,
                14 => 1e6,
                // spectrum values: DC only, checked separately below
                21 | 22 => continue,
                _ => 0.0,
            };
            assert_eq!(f[i], expected, "constant {c}: {name}");
        }
        let dc = 17.0 * 13.0 * c as f64;
        assert!(
            f[21].abs() < 1e-9 * dc.max(1.0),
            "constant {c}: high-frequency {}",
            f[21]
        );
        let log_mean = (1.0 + dc).ln() / (17.0 * 13.0);
        assert!((f[22] - log_mean).abs() < 1e-9, "constant {c}: log magnitude {}", f[22]);
    }
}

pub fn check_geometry(cases: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let pts = jitter(&mut rng, &template_face(), 4.0);
        let pts = similarity(
            &pts,
            rng.gen_range(-0.6..0.6),
            rng.gen_range(0.5..1.2),
            [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)],
        );
        let faces = rng.gen_range(1..3);
        let lm = LandmarkSet::new("f".into(), pts.clone(), faces).unwrap();
        let (w, h) = (rng.gen_range(150..260), rng.gen_range(150..260));
        let got = geometry_features(Some(&lm), w, h);
        let want = oracle_geometry(&pts, faces, w as f64, h as f64);
        for (i, (g, o)) in got.iter().zip(&want).enumerate() {
            assert_close(
                &format!("case {case} {}", CLASSICAL_FEATURE_NAMES[26 + i]),
                *g,
                *o,
                1e-9,
            );
        }
    }
}

/// EAR and MAR are unchanged by rotation, uniform scaling and translation.
pub fn check_similarity_invariance(transforms: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = jitter(&mut rng, &template_face(), 2.0);
    let ratios = |p: &[Pt]| {
        let e = |a: usize| std::array::from_fn::<Pt, 6, _>(|k| p[a + k]);
        let m = std::array::from_fn::<Pt, 8, _>(|k| p[60 + k]);
        [
            eye_aspect_ratio(&e(36)),
            eye_aspect_ratio(&e(42)),
            mouth_aspect_ratio(&m),
        ]
    };
    let reference = ratios(&base);
    for _ in 0..transforms {
        let angle = rng.gen_range(-PI..PI);
        let moved = similarity(
            &base,
            angle,
            rng.gen_range(0.2..5.0),
            [rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0)],
        );
        for (a, b) in ratios(&moved).iter().zip(&reference) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
