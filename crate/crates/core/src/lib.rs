//! QUEST: a six-bit quadrilateral local descriptor for facial expression
//! recognition, together with the pieces needed to evaluate it end to end.
//!
//! The pipeline is
//! `decode -> crop -> resize -> encode -> region histograms -> one-vs-one SVM`,
//! with a classic 8-neighbour LBP encoder as the baseline and a chi-square
//! 1-NN classifier as an independent sanity check on the feature plumbing.
//!
//! ```
//! use quest::descriptor::{quest_encode_map, QuestConfig};
//! use quest::features::{extract_feature_vector, RegionGrid};
//! use quest::imageio::GrayImage;
//!
//! let img = GrayImage::new(34, 34, (0..34 * 34).map(|i| (i % 251) as u8).collect()).unwrap();
//! let map = quest_encode_map(&img, &QuestConfig::default()).unwrap();
//! let fv = extract_feature_vector(&map, &RegionGrid::default()).unwrap();
//! assert_eq!(fv.values.len(), 64 * 64);
//! ```

pub mod classifier;
pub mod cli;
pub mod dataset;
pub mod descriptor;
mod error;
pub mod features;
pub mod imageio;
pub mod pipeline;
pub mod rng;
pub mod synthetic;

pub use crate::error::{Error, Result};
