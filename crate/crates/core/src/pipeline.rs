//! Image-to-feature pipeline: decode, crop, resize, encode, histogram.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleRecord;
use crate::descriptor::{encode_map, DescriptorKind, QuestConfig};
use crate::features::{extract_feature_vector, FeatureMatrix, FeatureVector, RegionGrid};
use crate::imageio::{crop, decode_image, resize_bilinear, BoundingBox, GrayImage};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub descriptor: DescriptorKind,
    pub quest: QuestConfig,
    /// Side of the square the region of interest is resized to.
    pub size: usize,
    pub grid: RegionGrid,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            descriptor: DescriptorKind::Quest,
            quest: QuestConfig::default(),
            size: 128,
            grid: RegionGrid::default(),
        }
    }
}

impl PipelineConfig {
    pub fn with_descriptor(self, descriptor: DescriptorKind) -> Self {
        PipelineConfig { descriptor, ..self }
    }
}

/// Feature vector of one decoded image.
pub fn image_features(img: &GrayImage, bbox: Option<&BoundingBox>, cfg: &PipelineConfig) -> Result<FeatureVector> {
    let roi = match bbox {
        Some(b) => crop(img, b)?,
        None => img.clone(),
    };
    let normalized = resize_bilinear(&roi, cfg.size, cfg.size)?;
    let map = encode_map(&normalized, cfg.descriptor, &cfg.quest)?;
    extract_feature_vector(&map, &cfg.grid)
}

pub fn read_image(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Resolve a manifest path against the manifest's directory.
pub fn resolve(base_dir: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// Decode and featurize every record; rows come back in manifest order no
/// matter how many workers the current rayon pool has.
pub fn extract_records(
    records: &[SampleRecord],
    base_dir: &Path,
    configs: &[PipelineConfig],
) -> Result<Vec<FeatureMatrix>> {
    let per_record = records
        .par_iter()
        .map(|rec| {
            let wrap = |e: Error| Error::Record {
                line: rec.line,
                path: rec.path.clone(),
                source: Box::new(e),
            };
            let img = read_image(&resolve(base_dir, &rec.path)).map_err(wrap)?;
            configs
                .iter()
                .map(|cfg| image_features(&img, rec.bbox.as_ref(), cfg).map(|f| f.values))
                .collect::<Result<Vec<_>>>()
                .map_err(wrap)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![FeatureMatrix::default(); configs.len()];
    for (rec, rows) in records.iter().zip(per_record) {
        for (m, row) in out.iter_mut().zip(rows) {
            m.push(&rec.label, &rec.subject, row);
        }
    }
    Ok(out)
}
