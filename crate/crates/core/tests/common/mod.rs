#![allow(dead_code)]

use std::path::{Path, PathBuf};

use lineup_core::corpus::{write_jsonl, write_pgm, EmbeddingRecord, ImageGray};
use lineup_core::failpred::{
    BaseClassifierConfig, Classifier, CohortMember, EnsembleModel, Family, Objective, RebalanceSpec,
};
use lineup_core::imgfeat::{fit_standardizer, CLASSICAL_FEATURE_COUNT};
use lineup_core::pipeline::PipelineConfig;
use lineup_core::simindex::ExclusionRule;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Twelve images in four identities. A, B and C are tight clusters on their
/// own axes; D's three images sit 120° apart in a plane orthogonal to the
/// others, so every D lineup fails (probe similarity -0.5 against fillers at 0)
/// and every other lineup succeeds. Accuracy is 9/12.
pub fn twelve_image_records() -> Vec<EmbeddingRecord> {
    let s = 3f32.sqrt() / 2.0;
    let mut recs = Vec::new();
    for (ident, axis) in [("A", 0), ("B", 1), ("C", 2)] {
        for j in 0..3 {
            let mut v = vec![0.0f32; 5];
            v[axis] = 1.0;
            v[(axis + 1) % 3] = 0.01 * (j as f32 + 1.0);
            recs.push(EmbeddingRecord::new(
                format!("{}{}", ident.to_lowercase(), j + 1).as_str(),
                ident,
                v,
            ));
        }
    }
    recs.push(EmbeddingRecord::new("d1", "D", vec![0.0, 0.0, 0.0, 1.0, 0.0]));
    recs.push(EmbeddingRecord::new("d2", "D", vec![0.0, 0.0, 0.0, -0.5, s]));
    recs.push(EmbeddingRecord::new("d3", "D", vec![0.0, 0.0, 0.0, -0.5, -s]));
    recs
}

/// Deterministic textured 32x32 image per id.
pub fn image_for(id: &str) -> ImageGray {
    let seed = id.bytes().fold(17u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: u8 = rng.gen_range(60..180);
    let noise: Vec<u8> = (0..32 * 32).map(|_| rng.gen_range(0..60)).collect();
    ImageGray::from_fn(32, 32, |x, y| {
        let stripe = if (x / 4 + y / 8) % 2 == 0 { 20 } else { 0 };
        base.saturating_add(stripe).saturating_add(noise[y * 32 + x] / 2)
    })
    .unwrap()
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub embeddings: PathBuf,
    pub images: PathBuf,
    pub output: PathBuf,
    pub dim: usize,
}

impl Fixture {
    pub fn new(records: &[EmbeddingRecord]) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let embeddings = dir.path().join("embeddings.jsonl");
        write_jsonl(&embeddings, records).unwrap();
        let images = dir.path().join("images");
        std::fs::create_dir_all(&images).unwrap();
        for r in records {
            write_pgm(
                images.join(format!("{}.pgm", r.image_id)),
                &image_for(r.image_id.as_str()),
            )
            .unwrap();
        }
        let output = dir.path().join("out");
        Fixture {
            embeddings,
            images,
            output,
            dim: records[0].vector.len(),
            dir,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn config(&self) -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.paths.embeddings = Some(self.embeddings.clone());
        cfg.paths.images = Some(self.images.clone());
        cfg.paths.output = Some(self.output.clone());
        cfg
    }

    /// A model whose every member outputs `p`, saved next to the fixture.
    pub fn constant_model(&self, p: f64, threshold: f64) -> PathBuf {
        let d = self.dim + CLASSICAL_FEATURE_COUNT;
        let s = fit_standardizer(&[vec![0.0; d], vec![1.0; d]]).unwrap();
        let member = |objective| CohortMember {
            spec: RebalanceSpec {
                ratio: Objective::ratio_range(objective).0,
                seed: 0,
                objective,
            },
            config: BaseClassifierConfig::for_cohort(Family::Logistic, objective, 0),
            classifier: Classifier::Constant { probability: p },
        };
        let model = EnsembleModel::from_members(
            s,
            vec![member(Objective::Precision)],
            vec![member(Objective::Recall)],
            threshold,
        )
        .unwrap();
        let path = self.path("model.json");
        model.save(&path).unwrap();
        path
    }
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// `n` Gaussian records of dimension `d` spread over identities of one to four
/// images, inserted in shuffled id order. About one vector in ten copies an
/// earlier one so that exact score ties occur.
pub fn random_records(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<EmbeddingRecord> {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let mut recs: Vec<EmbeddingRecord> = Vec::with_capacity(n);
    let mut identity = 0;
    let mut left_in_identity = 0;
    for id in ids {
        if left_in_identity == 0 {
            identity += 1;
            left_in_identity = rng.gen_range(1..=4);
        }
        left_in_identity -= 1;
        let vector = if !recs.is_empty() && rng.gen_bool(0.1) {
            recs[rng.gen_range(0..recs.len())].vector.clone()
        } else {
            (0..d).map(|_| gaussian(rng) as f32).collect()
        };
        recs.push(EmbeddingRecord::new(
            format!("img{id:05}").as_str(),
            format!("person{identity:04}"),
            vector,
        ));
    }
    recs
}

/// Unit vector in the stored f32 representation.
pub fn unit(v: &[f32]) -> Vec<f32> {
    let norm = v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    v.iter().map(|&x| (x as f64 / norm) as f32).collect()
}

pub fn naive_dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Full scan, full sort by descending score then ascending id.
pub fn naive_topk(
    records: &[EmbeddingRecord],
    query: &[f32],
    query_id: &str,
    query_identity: &str,
    k: usize,
    rule: ExclusionRule,
) -> Vec<(String, f64)> {
    let q = unit(query);
    let mut scored: Vec<(String, f64)> = records
        .iter()
        .filter(|r| match rule {
            ExclusionRule::None => true,
            ExclusionRule::SelfId => r.image_id.as_str() != query_id,
            ExclusionRule::Identity => r.identity_id != query_identity,
        })
        .map(|r| (r.image_id.to_string(), naive_dot(&q, &unit(&r.vector))))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}
