//! Acceptance suite. Each test checks one criterion and prints a single
//! `[PASS]` / `[FAIL]` line (visible with `--nocapture`).

mod common;

use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use quest::classifier::{
    evaluate, run_cross_validation, train_binary_svm, ClassifierConfig, ClassifierKind, CvReport,
    KnnModel, SvmParams,
};
use quest::cli::{cmd_cv, RunArgs, RunConfig};
use quest::dataset::{make_subject_folds, FoldPlan};
use quest::descriptor::{
    lbp_encode_map, quest_encode_map, quest_encode_pixel, lbp_encode_pixel, CodeMap, QuadAssignment,
    QuestConfig,
};
use quest::features::{write_feature_csv, FeatureMatrix};
use quest::imageio::GrayImage;
use quest::pipeline::{image_features, PipelineConfig};
use quest::synthetic::{generate_gratings, GratingSpec};

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    println!(
        "[{}] AC{id:02} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "AC{id:02} {name} failed: {detail}");
}

fn gray(pixels: &[Vec<u8>]) -> GrayImage {
    GrayImage::new(pixels[0].len(), pixels.len(), common::flatten(pixels)).unwrap()
}

fn as_rows(map: &CodeMap) -> Vec<Vec<u32>> {
    (0..map.height())
        .map(|y| map.row(y).iter().map(|&c| c as u32).collect())
        .collect()
}

#[test]
fn ac01_descriptor_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = common::Lcg(2024);
    let mut mismatches = 0usize;
    let mut pixels_checked = 0usize;
    for _ in 0..100 {
        let px = rng.image(32, 32, 255);
        let img = gray(&px);
        for (rule, qa) in [
            ("v3", QuadAssignment::ByThree),
            ("v4", QuadAssignment::ByFour),
            ("alt", QuadAssignment::Alternating),
        ] {
            let got = as_rows(&quest_encode_map(&img, &QuestConfig::new(qa)).unwrap());
            let want = common::naive_quest(&px, rule);
            mismatches += count_diff(&got, &want);
            pixels_checked += 30 * 30;
        }
        let got = as_rows(&lbp_encode_map(&img).unwrap());
        mismatches += count_diff(&got, &common::naive_lbp(&px));
        pixels_checked += 30 * 30;
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        "descriptor oracle equivalence",
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!("{mismatches} mismatches over {pixels_checked} codes in {elapsed:.2?} (limit 5s)"),
    );
}

fn count_diff(a: &[Vec<u32>], b: &[Vec<u32>]) -> usize {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).filter(|(x, y)| x != y).count())
        .sum()
}

#[test]
fn ac02_hand_derived_codes() {
    let patch = [[10u8, 20, 30], [40, 50, 60], [70, 80, 90]];
    let cfg = QuestConfig::default();
    let px: Vec<Vec<u8>> = patch.iter().map(|r| r.to_vec()).collect();
    let checks = [
        ("QUEST ramp patch", quest_encode_pixel(&patch, &cfg) as u32, 12),
        ("QUEST ramp oracle", common::naive_quest(&px, "v3")[0][0], 12),
        ("QUEST ramp map", quest_encode_map(&gray(&px), &cfg).unwrap().codes()[0] as u32, 12),
        ("LBP ramp patch", lbp_encode_pixel(&patch) as u32, 225),
        ("LBP ramp oracle", common::naive_lbp(&px)[0][0], 225),
        ("QUEST constant 200", quest_encode_pixel(&[[200; 3]; 3], &cfg) as u32, 15),
        ("QUEST constant 1", quest_encode_pixel(&[[1; 3]; 3], &cfg) as u32, 15),
        ("QUEST constant 0", quest_encode_pixel(&[[0; 3]; 3], &cfg) as u32, 63),
        ("LBP constant", lbp_encode_pixel(&[[77; 3]; 3]) as u32, 255),
    ];
    let failed: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| got != want)
        .map(|(n, got, want)| format!("{n}: got {got}, want {want}"))
        .collect();
    verdict(
        2,
        "hand-derived codes",
        failed.is_empty(),
        if failed.is_empty() {
            "ramp QUEST=12 LBP=225, constant QUEST=15/63 LBP=255".into()
        } else {
            failed.join("; ")
        },
    );
}

#[test]
fn ac03_multiplicative_invariance() {
    let mut rng = common::Lcg(3);
    let cfg = QuestConfig::default();
    let mut broken = 0;
    for _ in 0..50 {
        let px = rng.image(32, 32, 127);
        let doubled: Vec<Vec<u8>> = px.iter().map(|r| r.iter().map(|v| v * 2).collect()).collect();
        let a = quest_encode_map(&gray(&px), &cfg).unwrap();
        let b = quest_encode_map(&gray(&doubled), &cfg).unwrap();
        if a != b {
            broken += 1;
        }
    }
    verdict(
        3,
        "multiplicative invariance",
        broken == 0,
        format!("{broken}/50 images changed under I -> 2I"),
    );
}

#[test]
fn ac04_partial_additive_invariance() {
    let mut rng = common::Lcg(4);
    let cfg = QuestConfig::default();
    let mut changed = 0usize;
    for _ in 0..50 {
        let px = rng.image(32, 32, 245);
        let shifted: Vec<Vec<u8>> = px.iter().map(|r| r.iter().map(|v| v + 10).collect()).collect();
        let a = quest_encode_map(&gray(&px), &cfg).unwrap();
        let b = quest_encode_map(&gray(&shifted), &cfg).unwrap();
        changed += a
            .codes()
            .iter()
            .zip(b.codes())
            .filter(|(x, y)| (*x & 0b1111) != (*y & 0b1111))
            .count();
    }
    verdict(
        4,
        "partial additive invariance (bits 0-3)",
        changed == 0,
        format!("{changed} codes changed in bits 0-3 under I -> I + 10"),
    );
}

#[test]
fn ac05_feature_contract() {
    let mut rng = common::Lcg(5);
    let img = gray(&rng.image(128, 128, 255));
    let fv = image_features(&img, None, &PipelineConfig::default()).unwrap();
    let worst = (0..64)
        .map(|r| (fv.block(r).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0f64, f64::max);
    verdict(
        5,
        "feature contract",
        fv.values.len() == 4096 && worst <= 1e-9 && fv.values.iter().all(|&v| v >= 0.0),
        format!("length {} (want 4096), max |block sum - 1| = {worst:.2e}", fv.values.len()),
    );
}

struct SyntheticRun {
    features: FeatureMatrix,
    plan: FoldPlan,
    svm: CvReport,
    knn: CvReport,
    elapsed: Duration,
}

fn synthetic_features() -> FeatureMatrix {
    let samples = generate_gratings(&GratingSpec::default()).unwrap();
    let cfg = PipelineConfig::default();
    let rows: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|s| image_features(&s.image, None, &cfg).unwrap().values)
        .collect();
    let mut m = FeatureMatrix::default();
    for (s, row) in samples.iter().zip(rows) {
        m.push(&s.label, &s.subject, row);
    }
    m
}

fn synthetic_run() -> &'static SyntheticRun {
    static RUN: OnceLock<SyntheticRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let features = synthetic_features();
        let plan = make_subject_folds(&features.subjects, 5, 42).unwrap();
        let mut cfg = ClassifierConfig {
            kind: ClassifierKind::Svm,
            svm: SvmParams::default(),
            seed: 42,
        };
        let svm = run_cross_validation(&plan, &features, &cfg).unwrap();
        cfg.kind = ClassifierKind::Knn;
        let knn = run_cross_validation(&plan, &features, &cfg).unwrap();
        SyntheticRun {
            features,
            plan,
            svm,
            knn,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn ac06_accuracy_confusion_consistency() {
    let run = synthetic_run();
    let mut problems = Vec::new();
    let mut evaluations = 0;
    for report in [&run.svm, &run.knn] {
        for (fold, split) in report.folds.iter().zip(&run.plan.splits) {
            let m = &fold.confusion;
            if fold.accuracy != 100.0 * m.trace() as f64 / m.total() as f64 {
                problems.push(format!("fold {} accuracy {} != trace/total", fold.fold, fold.accuracy));
            }
            let eval = fold.evaluation.as_ref().unwrap();
            let correct = split
                .test
                .iter()
                .zip(&eval.predictions)
                .filter(|(&i, p)| &run.features.labels[i] == *p)
                .count();
            if fold.accuracy != 100.0 * correct as f64 / split.test.len() as f64 {
                problems.push(format!("fold {} accuracy disagrees with prediction count", fold.fold));
            }
            let expected: Vec<u64> = m
                .labels
                .iter()
                .map(|l| split.test.iter().filter(|&&i| &run.features.labels[i] == l).count() as u64)
                .collect();
            if m.row_sums() != expected {
                problems.push(format!("fold {} row sums {:?} != {:?}", fold.fold, m.row_sums(), expected));
            }
            evaluations += 1;
        }
        let p = &report.pooled;
        if p.accuracy() != 100.0 * p.trace() as f64 / p.total() as f64 {
            problems.push("pooled accuracy".into());
        }
        evaluations += 1;
    }
    // Direct evaluate() call on a held-out split as well.
    let split = &run.plan.splits[0];
    let train_rows: Vec<Vec<f64>> = split.train.iter().map(|&i| run.features.rows[i].clone()).collect();
    let train_labels: Vec<String> = split.train.iter().map(|&i| run.features.labels[i].clone()).collect();
    let knn = KnnModel::new(train_rows, train_labels).unwrap();
    let rows: Vec<&[f64]> = split.test.iter().map(|&i| run.features.rows[i].as_slice()).collect();
    let truth: Vec<&str> = split.test.iter().map(|&i| run.features.labels[i].as_str()).collect();
    let e = evaluate(&knn, &rows, &truth, &run.features.classes()).unwrap();
    if e.accuracy != 100.0 * e.confusion.trace() as f64 / e.confusion.total() as f64 {
        problems.push("direct evaluate accuracy".into());
    }
    evaluations += 1;
    verdict(
        6,
        "accuracy = 100 trace/total, row sums = class counts",
        problems.is_empty(),
        if problems.is_empty() {
            format!("{evaluations} evaluations consistent")
        } else {
            problems.join("; ")
        },
    );
}

#[test]
fn ac07_synthetic_end_to_end() {
    let run = synthetic_run();
    let mut agree = 0usize;
    let mut total = 0usize;
    for (s, k) in run.svm.folds.iter().zip(&run.knn.folds) {
        let (sp, kp) = (
            &s.evaluation.as_ref().unwrap().predictions,
            &k.evaluation.as_ref().unwrap().predictions,
        );
        agree += sp.iter().zip(kp).filter(|(a, b)| a == b).count();
        total += sp.len();
    }
    let agreement = 100.0 * agree as f64 / total as f64;
    let pass = run.svm.mean_accuracy >= 90.0 && agreement >= 95.0 && run.elapsed < Duration::from_secs(60);
    verdict(
        7,
        "synthetic end-to-end",
        pass,
        format!(
            "SVM mean {:.2}% (>= 90), k-NN mean {:.2}%, agreement {agreement:.2}% (>= 95), {} samples, {:.1?} (< 60s)",
            run.svm.mean_accuracy,
            run.knn.mean_accuracy,
            run.features.len(),
            run.elapsed
        ),
    );
}

fn write_synthetic_csv(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("features.csv");
    let file = std::fs::File::create(&path).unwrap();
    write_feature_csv(std::io::BufWriter::new(file), &synthetic_run().features).unwrap();
    path
}

fn cv_in_pool(threads: usize, csv: &Path, out: &Path) -> CvReport {
    let config = RunConfig::from_args(&RunArgs::default()).unwrap();
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| cmd_cv(csv, &config, out))
        .unwrap()
}

#[test]
fn ac08_determinism_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_synthetic_csv(dir.path());
    let (a, b) = (dir.path().join("t1"), dir.path().join("t8"));
    cv_in_pool(1, &csv, &a);
    cv_in_pool(8, &csv, &b);
    let mut files: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    let differing: Vec<&String> = files
        .iter()
        .filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap_or_default())
        .collect();
    verdict(
        8,
        "determinism threads=1 vs threads=8",
        differing.is_empty() && files.len() >= 5,
        format!("{} report files compared, differing: {:?}", files.len(), differing),
    );
}

#[test]
fn ac09_svm_sanity() {
    let separable: Vec<([f64; 2], i8)> = vec![
        ([2.0, 1.0], 1),
        ([1.5, -0.5], 1),
        ([3.0, 0.2], 1),
        ([1.0, 2.0], 1),
        ([-1.0, 0.5], -1),
        ([-2.0, -1.0], -1),
        ([-1.5, 1.5], -1),
        ([-0.5, -2.0], -1),
    ];
    let xor: Vec<([f64; 2], i8)> = vec![([0.0, 0.0], -1), ([1.0, 1.0], -1), ([0.0, 1.0], 1), ([1.0, 0.0], 1)];
    let train_acc = |pts: &[([f64; 2], i8)], c: f64| {
        let rows: Vec<&[f64]> = pts.iter().map(|(p, _)| p.as_slice()).collect();
        let ys: Vec<i8> = pts.iter().map(|(_, y)| *y).collect();
        let m = train_binary_svm(&rows, &ys, &SvmParams { c, epochs: 50 }, 9).unwrap().machine;
        let ok = pts
            .iter()
            .filter(|(p, y)| (m.decision_value(p) >= 0.0) == (*y == 1))
            .count();
        ok as f64 / pts.len() as f64
    };
    let sep = train_acc(&separable, 1.0);
    let xor_best_possible = common::best_linear_accuracy(&xor);
    let xor_accs: Vec<f64> = [0.01, 1.0, 100.0].iter().map(|&c| train_acc(&xor, c)).collect();
    let pass = sep == 1.0 && xor_best_possible == 0.75 && xor_accs.iter().all(|&a| a <= 0.75);
    verdict(
        9,
        "SVM sanity",
        pass,
        format!(
            "separable training accuracy {:.0}%, XOR accuracies {:?} (brute-force linear optimum {:.0}%)",
            sep * 100.0,
            xor_accs,
            xor_best_possible * 100.0
        ),
    );
}

#[test]
fn ac10_confusion_table_golden() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_synthetic_csv(dir.path());
    let out = dir.path().join("report");
    cv_in_pool(4, &csv, &out);
    let table = std::fs::read_to_string(out.join("confusion.txt")).unwrap();
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/synthetic_confusion.txt");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden_path, &table).unwrap();
    }
    let golden = std::fs::read_to_string(&golden_path).unwrap_or_default();
    let layout_ok = table.lines().skip(1).take(6).all(|l| {
        let cells: Vec<&str> = l.split('\t').collect();
        cells.len() == 7 && cells[1..].iter().all(|c| c.len() == 4 && c.as_bytes()[1] == b'.')
    });
    verdict(
        10,
        "confusion table golden file",
        table == golden && layout_ok,
        format!(
            "{} bytes, matches golden: {}, 2-decimal layout: {layout_ok}",
            table.len(),
            table == golden
        ),
    );
}
