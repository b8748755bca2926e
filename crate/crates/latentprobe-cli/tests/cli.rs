//! Behavior of the command-line surface: exit codes, flag and config
//! precedence, side files, and stdout contracts.

mod common;

use std::fs;

use common::{exit_code, run, run_in, stdout_text, write_spec};
use latentprobe::nprimaging::ImageBuffer;
use latentprobe::reporting::{load_report, SectionBody};
use latentprobe::seeding::task_rng;
use ndarray::Array3;
use rand::Rng as _;
use tempfile::TempDir;

#[test]
fn help_and_version_exit_zero() {
    let dir = TempDir::new().unwrap();
    assert_eq!(exit_code(&run(dir.path(), &["--help"])), 0);
    assert_eq!(exit_code(&run(dir.path(), &["--version"])), 0);
    assert_eq!(exit_code(&run(dir.path(), &["analyze", "mi", "--help"])), 0);
}

#[test]
fn bad_invocations_exit_one() {
    let dir = TempDir::new().unwrap();
    // Unknown flag, unknown subcommand, missing required flag.
    let bad = [
        vec!["analyze", "mi", "--corpus", "c", "--target", "gloss", "--bogus"],
        vec!["frobnicate"],
        vec!["analyze", "mi", "--target", "gloss"],
    ];
    for args in bad {
        assert_eq!(exit_code(&run(dir.path(), &args)), 1, "args {args:?}");
    }
}

#[test]
fn missing_data_files_exit_two() {
    let dir = TempDir::new().unwrap();
    let mi = run(
        dir.path(),
        &["analyze", "mi", "--corpus", "nowhere", "--target", "gloss"],
    );
    assert_eq!(exit_code(&mi), 2);
    let render = run(dir.path(), &["report", "render", "--report", "nowhere.json"]);
    assert_eq!(exit_code(&render), 2);

    fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    let broken = run(dir.path(), &["report", "render", "--report", "broken.json"]);
    assert_eq!(exit_code(&broken), 2);
}

#[test]
fn unknown_factor_exits_one() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &["analyze", "mi", "--corpus", "nowhere", "--target", "shiny"],
    );
    // The factor name is rejected before any file is touched.
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn spec_value_errors_exit_one_and_syntax_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let mut spec = serde_json::to_value(write_spec(
        &dir.path().join("spec.json"),
        100,
        4,
        8,
        0.1,
        1,
        1,
        2,
    ))
    .unwrap();
    spec["n"] = serde_json::json!(0);
    fs::write(dir.path().join("zero.json"), spec.to_string()).unwrap();
    let zero = run(dir.path(), &["synth", "generate", "--spec", "zero.json"]);
    assert_eq!(exit_code(&zero), 1);

    fs::write(dir.path().join("syntax.json"), "{").unwrap();
    let syntax = run(dir.path(), &["synth", "generate", "--spec", "syntax.json"]);
    assert_eq!(exit_code(&syntax), 2);
}

#[test]
fn generated_corpus_localizes_gloss() {
    let dir = TempDir::new().unwrap();
    write_spec(&dir.path().join("spec.json"), 400, 6, 32, 0.05, 5, 2, 4);
    let gen = run(
        dir.path(),
        &["synth", "generate", "--spec", "spec.json", "--out", "corpus"],
    );
    assert_eq!(exit_code(&gen), 0, "{}", String::from_utf8_lossy(&gen.stderr));

    let mi = run(
        dir.path(),
        &[
            "analyze", "mi", "--corpus", "corpus", "--target", "gloss", "--out", "mi",
        ],
    );
    assert_eq!(exit_code(&mi), 0, "{}", String::from_utf8_lossy(&mi.stderr));
    assert!(stdout_text(&mi).contains("at layer 2"));

    let report = load_report(&dir.path().join("mi/report.json")).unwrap();
    let SectionBody::MiProfile { profile } = &report.sections[0].body else {
        panic!("expected an MI profile section");
    };
    assert_eq!(profile.argmax_layer(), 2);
    let csv = fs::read_to_string(dir.path().join("mi/mi_profile.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
}

#[test]
fn flags_override_config_file_values() {
    let dir = TempDir::new().unwrap();
    write_spec(&dir.path().join("spec.json"), 300, 4, 16, 0.05, 7, 2, 3);
    let gen = run(
        dir.path(),
        &["synth", "generate", "--spec", "spec.json", "--out", "corpus"],
    );
    assert_eq!(exit_code(&gen), 0);
    fs::write(
        dir.path().join("config.json"),
        r#"{ "layer": 2, "lambda": 5.0 }"#,
    )
    .unwrap();

    let from_config = run(
        dir.path(),
        &[
            "analyze",
            "gloss-axis",
            "--corpus",
            "corpus",
            "--config",
            "config.json",
            "--out",
            "a",
        ],
    );
    assert_eq!(
        exit_code(&from_config),
        0,
        "{}",
        String::from_utf8_lossy(&from_config.stderr)
    );
    let echo = common::masked_report(&dir.path().join("a/report.json"));
    assert_eq!(echo["sections"][0]["config"]["layer"], 2);
    assert_eq!(echo["sections"][0]["config"]["lambda"], 5.0);

    let overridden = run(
        dir.path(),
        &[
            "analyze",
            "gloss-axis",
            "--corpus",
            "corpus",
            "--config",
            "config.json",
            "--lambda",
            "0.5",
            "--out",
            "b",
        ],
    );
    assert_eq!(exit_code(&overridden), 0);
    let echo = common::masked_report(&dir.path().join("b/report.json"));
    assert_eq!(echo["sections"][0]["config"]["layer"], 2);
    assert_eq!(echo["sections"][0]["config"]["lambda"], 0.5);

    fs::write(dir.path().join("typo.json"), r#"{ "lamda": 5.0 }"#).unwrap();
    let typo = run(
        dir.path(),
        &[
            "analyze",
            "gloss-axis",
            "--corpus",
            "corpus",
            "--config",
            "typo.json",
            "--layer",
            "2",
        ],
    );
    assert_eq!(exit_code(&typo), 1);
}

#[test]
fn thread_cap_must_be_a_positive_integer() {
    let dir = TempDir::new().unwrap();
    let args = ["metrics", "ppl", "--pairs", "2", "--dim", "2"];
    for bad in ["zero", "0", "-1"] {
        let out = run_in(dir.path(), &args, &[("LATENTPROBE_THREADS", bad)]);
        assert_eq!(exit_code(&out), 1, "LATENTPROBE_THREADS={bad}");
    }
    let ok = run_in(dir.path(), &args, &[("LATENTPROBE_THREADS", "2")]);
    assert_eq!(exit_code(&ok), 0);
}

#[test]
fn self_comparison_prints_exact_zero_and_one() {
    let dir = TempDir::new().unwrap();
    let image = ImageBuffer::new(Array3::from_elem((32, 32, 1), 0.25)).unwrap();
    image.save_png(&dir.path().join("img.png")).unwrap();

    let out = run(
        dir.path(),
        &["image", "compare", "--ref", "img.png", "--test", "img.png"],
    );
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_text(&out);
    assert!(text.contains("mse 0\n"), "stdout: {text}");
    assert!(text.contains("ssim 1\n"), "stdout: {text}");
    assert!(text.contains("psnr_db infinite"), "stdout: {text}");
}

#[test]
fn brushmap_apply_compare_round_trip() {
    let dir = TempDir::new().unwrap();
    // A pair satisfying the extraction guards: moderate reference values
    // and a painted image that stays inside gamut and below the scale cap.
    let mut rng = task_rng(77, "cli-roundtrip", 0);
    let mut rendered = Array3::zeros((48, 48, 3));
    let mut painted = Array3::zeros((48, 48, 3));
    for y in 0..48 {
        for x in 0..48 {
            for c in 0..3 {
                let r = 0.15 + rng.gen::<f64>() * 0.8;
                let gain_hi = (0.98 / r).min(2.8);
                let gain = 0.2 + rng.gen::<f64>() * (gain_hi - 0.2);
                rendered[[y, x, c]] = r;
                painted[[y, x, c]] = r * gain;
            }
        }
    }
    ImageBuffer::new(rendered)
        .unwrap()
        .save_png(&dir.path().join("rendered.png"))
        .unwrap();
    ImageBuffer::new(painted)
        .unwrap()
        .save_png(&dir.path().join("painted.png"))
        .unwrap();

    let extract = run(
        dir.path(),
        &[
            "image", "brushmap", "--painted", "painted.png", "--ref", "rendered.png",
            "--out", "map",
        ],
    );
    assert_eq!(
        exit_code(&extract),
        0,
        "{}",
        String::from_utf8_lossy(&extract.stderr)
    );
    assert!(dir.path().join("map/brushmap.bin").exists());
    assert!(dir.path().join("map/brushmap_preview.png").exists());

    let apply = run(
        dir.path(),
        &[
            "image", "apply", "--map", "map/brushmap.bin", "--ref", "rendered.png",
            "--out", "applied",
        ],
    );
    assert_eq!(exit_code(&apply), 0);

    let compare = run(
        dir.path(),
        &[
            "image", "compare", "--ref", "painted.png", "--test", "applied/painted.png",
            "--out", "cmp",
        ],
    );
    assert_eq!(exit_code(&compare), 0);
    let report = load_report(&dir.path().join("cmp/report.json")).unwrap();
    let SectionBody::ImageComparison { metrics } = &report.sections[0].body else {
        panic!("expected an image comparison section");
    };
    // The full cycle re-quantizes through 8-bit PNG twice, so the result is
    // close but not exact.
    assert!(metrics.mse < 1e-3, "mse {}", metrics.mse);
    assert!(metrics.ssim > 0.99, "ssim {}", metrics.ssim);
}

#[test]
fn study_outputs_products_and_preferences() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("ranks.csv"),
        "question_id,method,avg_rank\n\
         q1,a,2\n\
         q2,a,8\n\
         q1,b,1\n\
         q2,b,1\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("prefs.csv"),
        "comparison,preferred\n\
         a-vs-b,1\n\
         a-vs-b,1\n\
         a-vs-b,1\n\
         a-vs-b,0\n",
    )
    .unwrap();

    let out = run(
        dir.path(),
        &[
            "study",
            "rank-product",
            "--ranks",
            "ranks.csv",
            "--preferences",
            "prefs.csv",
        ],
    );
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_text(&out);
    assert!(text.contains("preference a-vs-b: 75%"), "stdout: {text}");

    let report = load_report(&dir.path().join("report.json")).unwrap();
    let SectionBody::Study {
        rank_products,
        preferences,
    } = &report.sections[0].body
    else {
        panic!("expected a study section");
    };
    let by_method: std::collections::BTreeMap<&str, f64> = rank_products
        .iter()
        .map(|rp| (rp.method.as_str(), rp.value))
        .collect();
    assert_eq!(by_method["a"], 4.0);
    assert_eq!(by_method["b"], 1.0);
    assert_eq!(preferences["a-vs-b"], 75.0);

    let csv = fs::read_to_string(dir.path().join("rank_products.csv")).unwrap();
    assert!(csv.contains("a,4\n"), "csv: {csv}");
}

#[test]
fn render_draws_one_svg_per_plottable_section() {
    let dir = TempDir::new().unwrap();
    write_spec(&dir.path().join("spec.json"), 300, 4, 16, 0.05, 3, 1, 2);
    assert_eq!(
        exit_code(&run(
            dir.path(),
            &["synth", "generate", "--spec", "spec.json", "--out", "corpus"],
        )),
        0
    );
    assert_eq!(
        exit_code(&run(
            dir.path(),
            &[
                "analyze", "mi", "--corpus", "corpus", "--target", "gloss", "--out", "mi",
            ],
        )),
        0
    );
    let render = run(
        dir.path(),
        &["report", "render", "--report", "mi/report.json", "--out", "plots"],
    );
    assert_eq!(exit_code(&render), 0);
    assert!(dir.path().join("plots/mi-profile.svg").exists());
}
