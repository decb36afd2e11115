//! Sample manifests and evaluation split plans.
//!
//! A manifest is JSON Lines, one object per sample:
//!
//! ```text
//! {"path": "s01/happy_3.pgm", "subject": "s01", "label": "happy", "bbox": [12, 20, 96, 96]}
//! ```
//!
//! `bbox` is optional. Two split protocols are supported: subject-wise k-fold
//! (person independent) and repeated random 80/20 hold-outs at record level.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::imageio::BoundingBox;
use crate::rng::SplitMix64;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub path: String,
    pub subject: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundingBox>,
    /// 1-based manifest line the record came from.
    #[serde(skip)]
    pub line: usize,
}

fn required_str(obj: &serde_json::Map<String, Value>, key: &str, line: usize) -> Result<String> {
    match obj.get(key) {
        None => Err(Error::Schema {
            line,
            reason: format!("missing required key \"{key}\""),
        }),
        Some(Value::String(s)) if !s.is_empty() => Ok(s.clone()),
        Some(Value::String(_)) => Err(Error::Schema {
            line,
            reason: format!("\"{key}\" must be non-empty"),
        }),
        Some(_) => Err(Error::Schema {
            line,
            reason: format!("\"{key}\" must be a string"),
        }),
    }
}

fn parse_bbox(v: &Value, line: usize) -> Result<Option<BoundingBox>> {
    let bad = || Error::Schema {
        line,
        reason: "\"bbox\" must be [x, y, w, h] with non-negative integers and w, h >= 1".into(),
    };
    match v {
        Value::Null => Ok(None),
        Value::Array(items) if items.len() == 4 => {
            let n: Vec<usize> = items
                .iter()
                .map(|i| i.as_u64().map(|u| u as usize).ok_or_else(bad))
                .collect::<Result<_>>()?;
            if n[2] == 0 || n[3] == 0 {
                return Err(bad());
            }
            Ok(Some(BoundingBox::new(n[0], n[1], n[2], n[3])))
        }
        _ => Err(bad()),
    }
}

/// Parse a JSON-Lines manifest. Blank lines are ignored.
pub fn load_manifest<R: BufRead>(stream: R) -> Result<Vec<SampleRecord>> {
    let mut records = Vec::new();
    for (i, line) in stream.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| Error::Schema {
            line: line_no,
            reason: "expected a JSON object".into(),
        })?;
        records.push(SampleRecord {
            path: required_str(obj, "path", line_no)?,
            subject: required_str(obj, "subject", line_no)?,
            label: required_str(obj, "label", line_no)?,
            bbox: obj
                .get("bbox")
                .map(|b| parse_bbox(b, line_no))
                .transpose()?
                .flatten(),
            line: line_no,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyInput("manifest has no records".into()));
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "subject-kfold")]
    SubjectKFold,
    #[serde(rename = "random-holdout")]
    RandomHoldout,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::SubjectKFold => "subject-kfold",
            Protocol::RandomHoldout => "random-holdout",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subject-kfold" => Ok(Protocol::SubjectKFold),
            "random-holdout" => Ok(Protocol::RandomHoldout),
            other => Err(Error::Config(format!(
                "unknown protocol '{other}' (expected subject-kfold or random-holdout)"
            ))),
        }
    }
}

/// One train/test split, as sorted record indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub protocol: Protocol,
    pub seed: u64,
    pub records: usize,
    pub splits: Vec<Split>,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Subject-disjoint k-fold plan. `subjects[i]` is the subject of record `i`.
///
/// Distinct subjects are sorted, shuffled with the seeded generator and dealt
/// round-robin into `k` groups; fold `i` tests on group `i`.
pub fn make_subject_folds<S: AsRef<str>>(subjects: &[S], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut distinct: Vec<&str> = subjects
        .iter()
        .map(AsRef::as_ref)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if distinct.len() < k {
        return Err(Error::Config(format!(
            "{} distinct subjects cannot fill {k} folds",
            distinct.len()
        )));
    }
    SplitMix64::new(seed).shuffle(&mut distinct);
    let group: BTreeMap<&str, usize> = distinct
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i % k))
        .collect();
    let splits = (0..k)
        .map(|fold| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..subjects.len()).partition(|&i| group[subjects[i].as_ref()] == fold);
            Split { train, test }
        })
        .collect();
    Ok(FoldPlan {
        protocol: Protocol::SubjectKFold,
        seed,
        records: subjects.len(),
        splits,
    })
}

/// Repeated record-level 80/20 hold-outs over `n` records.
///
/// Each repeat continues the same generator stream, shuffles `0..n` and
/// trains on the first `ceil(0.8 n)` indices.
pub fn make_random_holdouts(n: usize, repeats: usize, seed: u64) -> Result<FoldPlan> {
    if repeats == 0 {
        return Err(Error::Config("need at least 1 repeat".into()));
    }
    if n < 5 {
        return Err(Error::Size(format!(
            "random hold-out needs at least 5 records, got {n}"
        )));
    }
    let n_train = (4 * n).div_ceil(5);
    let mut rng = SplitMix64::new(seed);
    let splits = (0..repeats)
        .map(|_| {
            let mut order: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut order);
            let mut train = order[..n_train].to_vec();
            let mut test = order[n_train..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            Split { train, test }
        })
        .collect();
    Ok(FoldPlan {
        protocol: Protocol::RandomHoldout,
        seed,
        records: n,
        splits,
    })
}

/// Build a plan for `subjects` under `protocol`.
pub fn make_plan<S: AsRef<str>>(
    protocol: Protocol,
    subjects: &[S],
    folds: usize,
    repeats: usize,
    seed: u64,
) -> Result<FoldPlan> {
    match protocol {
        Protocol::SubjectKFold => make_subject_folds(subjects, folds, seed),
        Protocol::RandomHoldout => make_random_holdouts(subjects.len(), repeats, seed),
    }
}
