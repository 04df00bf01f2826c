use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{load_grayscale_image, CorpusHandle, ImageId, LandmarkTable};
use crate::imgfeat::filters;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    /// Mean intensity strictly below this is too dark.
    pub dark_mean: f64,
    /// Mean intensity strictly above this is too bright.
    pub bright_mean: f64,
    /// Laplacian variance strictly below this is too blurry.
    pub blur_laplacian_var: f64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            dark_mean: 30.0,
            bright_mean: 225.0,
            blur_laplacian_var: 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RemovalReason {
    NoImage,
    NoFace,
    TooDark,
    TooBright,
    TooBlurry,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurationReport {
    pub input: usize,
    pub retained: usize,
    /// Removed images in corpus order, one reason each.
    pub removed: Vec<(ImageId, RemovalReason)>,
    pub reason_counts: BTreeMap<RemovalReason, usize>,
}

/// Applies the mechanical curation rules in a fixed order (image present, face
/// present, darkness, brightness, blur); the first failing rule is the reason.
/// Images are read from `<images>/<image_id>.pgm`.
pub fn curate(
    corpus: &CorpusHandle,
    landmarks: &LandmarkTable,
    images: &Path,
    rules: &CurationConfig,
) -> (CurationReport, CorpusHandle) {
    let mut removed = Vec::new();
    for rec in corpus.records() {
        if let Some(reason) = check(&rec.image_id, landmarks, images, rules) {
            removed.push((rec.image_id.clone(), reason));
        }
    }
    let removed_ids: std::collections::HashSet<&ImageId> = removed.iter().map(|(id, _)| id).collect();
    let kept = corpus.filter(|r| !removed_ids.contains(&r.image_id));
    let mut reason_counts = BTreeMap::new();
    for (_, reason) in &removed {
        *reason_counts.entry(*reason).or_insert(0) += 1;
    }
    let report = CurationReport {
        input: corpus.len(),
        retained: kept.len(),
        removed,
        reason_counts,
    };
    (report, kept)
}

fn check(id: &ImageId, landmarks: &LandmarkTable, images: &Path, rules: &CurationConfig) -> Option<RemovalReason> {
    let img = match load_grayscale_image(images.join(format!("{id}.pgm"))) {
        Ok(img) => img,
        Err(_) => return Some(RemovalReason::NoImage),
    };
    if landmarks.get(id).is_none() {
        return Some(RemovalReason::NoFace);
    }
    let mean = filters::mean_intensity(&img);
    if mean < rules.dark_mean {
        return Some(RemovalReason::TooDark);
    }
    if mean > rules.bright_mean {
        return Some(RemovalReason::TooBright);
    }
    if filters::laplacian_variance(&img) < rules.blur_laplacian_var {
        return Some(RemovalReason::TooBlurry);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{write_pgm, EmbeddingRecord, ImageGray, LandmarkSet};

    fn landmarks_for(ids: &[&str]) -> LandmarkTable {
        let mut t = LandmarkTable::default();
        for id in ids {
            let pts = (0..68).map(|i| [i as f64, i as f64]).collect();
            t.insert(LandmarkSet::new((*id).into(), pts, 1).unwrap());
        }
        t
    }

    fn checker(cell: usize) -> ImageGray {
        ImageGray::from_fn(16, 16, |x, y| if (x / cell + y / cell).is_multiple_of(2) { 60 } else { 190 }).unwrap()
    }

    #[test]
    fn rules_assign_single_reasons() {
        let dir = tempfile::tempdir().unwrap();
        write_pgm(dir.path().join("dark.pgm"), &ImageGray::filled(8, 8, 10).unwrap()).unwrap();
        write_pgm(dir.path().join("bright.pgm"), &ImageGray::filled(8, 8, 240).unwrap()).unwrap();
        write_pgm(dir.path().join("flat.pgm"), &ImageGray::filled(8, 8, 128).unwrap()).unwrap();
        write_pgm(dir.path().join("sharp.pgm"), &checker(1)).unwrap();
        write_pgm(dir.path().join("noface.pgm"), &checker(1)).unwrap();

        let recs = ["dark", "bright", "flat", "sharp", "noface", "missing"]
            .iter()
            .map(|id| EmbeddingRecord::new(*id, "p", vec![1.0]))
            .collect();
        let corpus = CorpusHandle::from_records(recs, None, vec![]).unwrap();
        let lm = landmarks_for(&["dark", "bright", "flat", "sharp", "missing"]);
        let (report, kept) = curate(&corpus, &lm, dir.path(), &CurationConfig::default());

        let reasons: BTreeMap<_, _> = report.removed.iter().map(|(id, r)| (id.as_str(), *r)).collect();
        assert_eq!(reasons["dark"], RemovalReason::TooDark);
        assert_eq!(reasons["bright"], RemovalReason::TooBright);
        assert_eq!(reasons["flat"], RemovalReason::TooBlurry);
        assert_eq!(reasons["noface"], RemovalReason::NoFace);
        assert_eq!(reasons["missing"], RemovalReason::NoImage);
        assert_eq!(kept.len(), 1);
        assert!(kept.contains(&"sharp".into()));
        assert_eq!(report.retained + report.removed.len(), report.input);

        let (again, kept2) = curate(&kept, &lm, dir.path(), &CurationConfig::default());
        assert!(again.removed.is_empty());
        assert_eq!(kept2.len(), kept.len());
    }
}
