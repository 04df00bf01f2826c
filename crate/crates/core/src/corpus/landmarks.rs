use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ImageId;
use crate::error::{Error, Result};

pub const LANDMARK_COUNT: usize = 68;

/// 68-point facial landmarks for one image (iBUG 300-W ordering).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub image_id: ImageId,
    pub points: Vec<[f64; 2]>,
    pub face_count: u32,
}

impl LandmarkSet {
    pub fn new(image_id: ImageId, points: Vec<[f64; 2]>, face_count: u32) -> Result<Self> {
        if points.len() != LANDMARK_COUNT {
            return Err(Error::LandmarkCount {
                id: image_id.to_string(),
                found: points.len(),
            });
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(image_id.to_string()));
        }
        Ok(LandmarkSet {
            image_id,
            points,
            face_count,
        })
    }

    #[inline]
    pub fn point(&self, i: usize) -> [f64; 2] {
        self.points[i]
    }
}

/// Image id -> first landmark set seen for that image. Images absent from the
/// table had no face detected.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LandmarkTable {
    sets: BTreeMap<ImageId, LandmarkSet>,
}

impl LandmarkTable {
    pub fn get(&self, id: &ImageId) -> Option<&LandmarkSet> {
        self.sets.get(id)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Adds a set; a repeated image keeps its first set and bumps the face count.
    pub fn insert(&mut self, set: LandmarkSet) {
        match self.sets.get_mut(&set.image_id) {
            Some(existing) => {
                existing.face_count = (existing.face_count + 1).max(set.face_count);
            }
            None => {
                let mut set = set;
                set.face_count = set.face_count.max(1);
                self.sets.insert(set.image_id.clone(), set);
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &LandmarkSet> {
        self.sets.values()
    }
}

#[derive(Deserialize)]
struct RawLandmarks {
    image_id: String,
    points: Vec<Vec<f64>>,
    #[serde(default = "one")]
    face_count: u32,
}

fn one() -> u32 {
    1
}

pub fn ingest_landmarks(path: impl AsRef<Path>) -> Result<LandmarkTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut table = LandmarkTable::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawLandmarks =
            serde_json::from_str(&line).map_err(|e| Error::malformed(path, i + 1, e.to_string()))?;
        let id = ImageId::new(raw.image_id).map_err(|e| Error::malformed(path, i + 1, e.to_string()))?;
        let mut points = Vec::with_capacity(raw.points.len());
        for p in &raw.points {
            if p.len() != 2 {
                return Err(Error::malformed(
                    path,
                    i + 1,
                    format!("{id}: point with {} coordinates", p.len()),
                ));
            }
            points.push([p[0], p[1]]);
        }
        table.insert(LandmarkSet::new(id, points, raw.face_count)?);
    }
    Ok(table)
}
