//! Face-geometry features from 68-point landmarks (iBUG 300-W indexing).

use crate::corpus::LandmarkSet;

type Pt = [f64; 2];

pub const LEFT_EYE: [usize; 6] = [36, 37, 38, 39, 40, 41];
pub const RIGHT_EYE: [usize; 6] = [42, 43, 44, 45, 46, 47];
pub const INNER_LIP: [usize; 8] = [60, 61, 62, 63, 64, 65, 66, 67];
pub const NOSE_BRIDGE: usize = 27;
pub const NOSE_TIP: usize = 30;

/// Mirrored landmark pairs: 8 jaw, 5 brow, 6 eye, 4 outer-lip.
pub const MIRROR_PAIRS: [(usize, usize); 23] = [
    (0, 16),
    (1, 15),
    (2, 14),
    (3, 13),
    (4, 12),
    (5, 11),
    (6, 10),
    (7, 9),
    (17, 26),
    (18, 25),
    (19, 24),
    (20, 23),
    (21, 22),
    (36, 45),
    (37, 44),
    (38, 43),
    (39, 42),
    (41, 46),
    (40, 47),
    (48, 54),
    (49, 53),
    (50, 52),
    (59, 55),
];

fn dist(a: Pt, b: Pt) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn centroid(points: impl IntoIterator<Item = Pt>) -> Pt {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for p in points {
        sx += p[0];
        sy += p[1];
        n += 1.0;
    }
    [sx / n, sy / n]
}

/// (|p2 - p6| + |p3 - p5|) / (2 |p1 - p4|); 0 for a degenerate eye.
pub fn eye_aspect_ratio(p: &[Pt; 6]) -> f64 {
    let c = dist(p[0], p[3]);
    if c == 0.0 {
        return 0.0;
    }
    (dist(p[1], p[5]) + dist(p[2], p[4])) / (2.0 * c)
}

/// Inner-lip ratio with the eye scheme: corners 60/64 give the horizontal
/// span, 61-67 and 63-65 the two vertical gaps.
pub fn mouth_aspect_ratio(p: &[Pt; 8]) -> f64 {
    let c = dist(p[0], p[4]);
    if c == 0.0 {
        return 0.0;
    }
    (dist(p[1], p[7]) + dist(p[3], p[5])) / (2.0 * c)
}

/// Sixteen values:
/// `[detected, face_count, area_ratio, offset_x, offset_y, ear_left,
///   ear_right, ear_mean, ear_diff, mar, symmetry, roll_deg, yaw, pitch,
///   width_ratio, height_ratio]`. Without landmarks every value is 0.
pub fn geometry_features(landmarks: Option<&LandmarkSet>, width: usize, height: usize) -> [f64; 16] {
    let Some(lm) = landmarks else {
        return [0.0; 16];
    };
    let pts = &lm.points;
    let (w, h) = (width as f64, height as f64);

    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let (bw, bh) = (x1 - x0, y1 - y0);
    let area_ratio = bw * bh / (w * h);
    let offset_x = ((x0 + x1) / 2.0 - w / 2.0) / w;
    let offset_y = ((y0 + y1) / 2.0 - h / 2.0) / h;

    let pick6 = |idx: [usize; 6]| idx.map(|i| pts[i]);
    let ear_l = eye_aspect_ratio(&pick6(LEFT_EYE));
    let ear_r = eye_aspect_ratio(&pick6(RIGHT_EYE));
    let mar = mouth_aspect_ratio(&INNER_LIP.map(|i| pts[i]));

    let left_center = centroid(LEFT_EYE.map(|i| pts[i]));
    let right_center = centroid(RIGHT_EYE.map(|i| pts[i]));
    let iod = dist(left_center, right_center);

    let bridge = pts[NOSE_BRIDGE];
    let symmetry = if iod == 0.0 {
        0.0
    } else {
        let mean_gap = MIRROR_PAIRS
            .iter()
            .map(|&(l, r)| (dist(pts[l], bridge) - dist(pts[r], bridge)).abs())
            .sum::<f64>()
            / MIRROR_PAIRS.len() as f64;
        (1.0 - mean_gap / iod).clamp(0.0, 1.0)
    };

    let roll = (right_center[1] - left_center[1])
        .atan2(right_center[0] - left_center[0])
        .to_degrees();
    let nose = pts[NOSE_TIP];
    let eye_mid_x = (left_center[0] + right_center[0]) / 2.0;
    let yaw = if iod == 0.0 { 0.0 } else { (nose[0] - eye_mid_x) / iod };
    let mouth = centroid(INNER_LIP.map(|i| pts[i]));
    let pitch = if bh == 0.0 { 0.0 } else { (mouth[1] - nose[1]) / bh };

    [
        1.0,
        lm.face_count as f64,
        area_ratio,
        offset_x,
        offset_y,
        ear_l,
        ear_r,
        (ear_l + ear_r) / 2.0,
        (ear_l - ear_r).abs(),
        mar,
        symmetry,
        roll,
        yaw,
        pitch,
        bw / w,
        bh / h,
    ]
}
