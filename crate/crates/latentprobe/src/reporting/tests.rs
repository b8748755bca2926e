use std::collections::BTreeMap;

use super::*;
use crate::factoraxis::{GlossAxisModel, LayerImportance, LayerImportanceTable};
use crate::genmetrics::RankProduct;
use crate::infotheory::{CorrectedMi, LayerMi, MiConfig, MiProfile};
use crate::nprimaging::ImageMetrics;

fn mi_section(id: &str, layers: usize) -> ReportSection {
    let profile = MiProfile {
        target: "gloss".into(),
        conditioning: vec!["style".into()],
        config: MiConfig::default(),
        layers: (0..layers)
            .map(|l| LayerMi {
                layer: l,
                mi: CorrectedMi {
                    raw_bits: 0.1 * l as f64,
                    perm_mean_bits: 0.05,
                    perm_std_bits: 0.01,
                    corrected_bits: 0.1 * l as f64 - 0.05,
                    dropped_strata: 0,
                    dropped_samples: 0,
                },
            })
            .collect(),
    };
    ReportSection {
        id: id.into(),
        title: "Gloss information by layer".into(),
        config: serde_json::json!({ "seed": 7, "folds": 5 }),
        body: SectionBody::MiProfile { profile },
    }
}

fn gloss_section() -> ReportSection {
    let model = GlossAxisModel {
        layer: 6,
        lambda: 1.0,
        weights: vec![0.25, -0.5, 0.125],
        intercept: 3.0,
        feature_mean: vec![0.0, 0.1, -0.2],
        feature_scale: vec![1.0, 2.0, 0.5],
        cv_mse_mean: 0.4,
        cv_mse_std: 0.05,
        spearman_rho: 0.93,
        fold_assignment: vec![],
    };
    let projections = (0..40)
        .map(|i| GlossPoint {
            projection: i as f64 * 0.17 - 3.0,
            gloss: (i % 7) as u32,
        })
        .collect();
    ReportSection {
        id: "gloss-axis".into(),
        title: "Gloss axis projection".into(),
        config: serde_json::json!({ "layer": 6, "lambda": 1.0, "folds": 5 }),
        body: SectionBody::GlossAxis { model, projections },
    }
}

fn importance_section() -> ReportSection {
    let table = LayerImportanceTable {
        r2_full: 0.91,
        repetitions: 5,
        layers: (0..16)
            .map(|l| LayerImportance {
                layer: l,
                delta_r2_mean: if l == 6 { 0.4 } else { 0.01 },
                delta_r2_std: 0.002,
            })
            .collect(),
    };
    ReportSection {
        id: "layer-importance".into(),
        title: "Unique variance by layer".into(),
        config: serde_json::json!({ "lambda": 1.0, "repetitions": 5, "seed": 11 }),
        body: SectionBody::LayerImportance { table },
    }
}

fn tsne_section() -> ReportSection {
    let points = (0..60)
        .map(|i| EmbeddingPoint {
            x: (i as f64 * 0.7).sin() * 4.0,
            y: (i as f64 * 0.3).cos() * 4.0,
            label: Some((i % 3) as u32),
        })
        .collect();
    ReportSection {
        id: "embedding".into(),
        title: "Layer embedding".into(),
        config: serde_json::json!({ "perplexity": 30.0, "seed": 0 }),
        body: SectionBody::Tsne {
            points,
            kl_checkpoints: vec![1.9, 1.4, 1.1],
        },
    }
}

fn image_section() -> ReportSection {
    ReportSection {
        id: "compare".into(),
        title: "Reconstruction quality".into(),
        config: serde_json::json!({ "reference": "a.png", "test": "b.png" }),
        body: SectionBody::ImageComparison {
            metrics: ImageMetrics {
                mse: 0.003,
                mae: 0.027,
                psnr_db: Some(25.51),
                psnr_infinite: false,
                ssim: 0.801,
            },
        },
    }
}

fn scalars_section() -> ReportSection {
    let mut values = BTreeMap::new();
    values.insert("reg".to_string(), 18.4);
    values.insert("ppl".to_string(), 54.03);
    ReportSection {
        id: "latent-metrics".into(),
        title: "Latent space metrics".into(),
        config: serde_json::json!({ "pairs": 10000, "epsilon": 1e-4, "seed": 3 }),
        body: SectionBody::Scalars { values },
    }
}

fn study_section() -> ReportSection {
    let mut preferences = BTreeMap::new();
    preferences.insert("palette-swap".to_string(), 97.73);
    ReportSection {
        id: "study".into(),
        title: "User study".into(),
        config: serde_json::json!({ "ranks": "ranks.csv" }),
        body: SectionBody::Study {
            rank_products: vec![RankProduct {
                method: "latent-edit".into(),
                value: 1.172,
            }],
            preferences,
        },
    }
}

fn full_report() -> AnalysisReport {
    let mut timings = BTreeMap::new();
    timings.insert("analyze".to_string(), 123u64);
    assemble_report(
        vec![
            mi_section("mi-gloss", 16),
            gloss_section(),
            importance_section(),
            tsne_section(),
            image_section(),
            scalars_section(),
            study_section(),
        ],
        digest_bytes(b"corpus bytes"),
        timings,
    )
    .unwrap()
}

#[test]
fn assembly_stamps_metadata() {
    let report = full_report();
    assert_eq!(report.schema, REPORT_SCHEMA);
    assert_eq!(report.tool_version, env!("CARGO_PKG_VERSION"));
    assert!(report.input_digest.starts_with("sha256:"));
    assert_eq!(report.run_meta.timings_ms.get("analyze"), Some(&123));
    assert_eq!(report.sections.len(), 7);
    assert!(!report.run_meta.created_at.is_empty());
}

#[test]
fn assembly_rejects_bad_section_sets() {
    assert!(matches!(
        assemble_report(vec![], "sha256:0".into(), BTreeMap::new()),
        Err(ReportError::Empty)
    ));
    let dup = vec![mi_section("same", 4), mi_section("same", 4)];
    assert!(matches!(
        assemble_report(dup, "sha256:0".into(), BTreeMap::new()),
        Err(ReportError::DuplicateSection(id)) if id == "same"
    ));
    let bad = vec![mi_section("Bad Id!", 4)];
    assert!(matches!(
        assemble_report(bad, "sha256:0".into(), BTreeMap::new()),
        Err(ReportError::BadSectionId(_))
    ));
}

#[test]
fn reports_round_trip_through_json() {
    let report = full_report();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    write_report(&report, &path).unwrap();
    let loaded = load_report(&path).unwrap();
    assert_eq!(loaded, report);
}

#[test]
fn serialization_is_deterministic_outside_run_meta() {
    let a = full_report();
    let b = full_report();
    assert_eq!(report_json(&a).unwrap(), report_json(&a).unwrap());

    let mask = |r: &AnalysisReport| {
        let mut value: serde_json::Value =
            serde_json::from_str(&report_json(r).unwrap()).unwrap();
        value["run_meta"] = serde_json::Value::Null;
        serde_json::to_string_pretty(&value).unwrap()
    };
    assert_eq!(mask(&a), mask(&b));
}

#[test]
fn mi_chart_draws_one_bar_per_layer() {
    let report = assemble_report(
        vec![mi_section("mi-gloss", 16)],
        "sha256:0".into(),
        BTreeMap::new(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_plots(&report, dir.path()).unwrap();
    assert_eq!(files, vec![dir.path().join("mi-gloss.svg")]);
    let svg = std::fs::read_to_string(&files[0]).unwrap();
    assert_eq!(svg.matches("class=\"bar\"").count(), 16);
    assert!(svg.starts_with("<svg"));
}

#[test]
fn scatter_charts_draw_every_point() {
    let report = assemble_report(
        vec![tsne_section(), gloss_section()],
        "sha256:0".into(),
        BTreeMap::new(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_plots(&report, dir.path()).unwrap();
    assert_eq!(files.len(), 2);
    let tsne_svg = std::fs::read_to_string(&files[0]).unwrap();
    assert_eq!(tsne_svg.matches("class=\"pt\"").count(), 60);
    let gloss_svg = std::fs::read_to_string(&files[1]).unwrap();
    assert_eq!(gloss_svg.matches("class=\"pt\"").count(), 40);
}

#[test]
fn unplottable_sections_emit_no_files() {
    let report = assemble_report(
        vec![image_section(), scalars_section(), study_section()],
        "sha256:0".into(),
        BTreeMap::new(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_plots(&report, dir.path()).unwrap();
    assert!(files.is_empty());
}

#[test]
fn plot_emission_is_a_pure_function_of_the_report() {
    let report = full_report();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let files_a = emit_plots(&report, dir_a.path()).unwrap();
    let files_b = emit_plots(&report, dir_b.path()).unwrap();
    assert_eq!(files_a.len(), files_b.len());
    for (a, b) in files_a.iter().zip(files_b.iter()) {
        assert_eq!(a.file_name(), b.file_name());
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}

#[test]
fn digests_are_stable_and_prefixed() {
    assert_eq!(
        digest_bytes(b""),
        "sha256:e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("input.bin");
    std::fs::write(&path, b"corpus bytes").unwrap();
    assert_eq!(digest_file(&path).unwrap(), digest_bytes(b"corpus bytes"));
}
