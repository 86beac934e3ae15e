mod common;
#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::path::Path;

use common::*;
use labelcal_core::io::{format_sig17, load_prototypes};
use labelcal_core::{LabelSpace, ProbMap};

const DIR: &str = "two_maps";

/// Dyadic values so every sum and product is exact; class 2 never wins
/// (the last pixel of `b` ties classes 1 and 2).
fn two_maps() -> (ProbMap, ProbMap) {
    let a = ProbMap::new(
        2,
        2,
        3,
        vec![
            0.75, 0.25, 0.0, //
            0.5, 0.375, 0.125, //
            0.25, 0.5, 0.25, //
            0.625, 0.25, 0.125,
        ],
    )
    .unwrap();
    let b = ProbMap::new(
        3,
        1,
        3,
        vec![
            0.375, 0.5, 0.125, //
            0.5, 0.25, 0.25, //
            0.25, 0.375, 0.375,
        ],
    )
    .unwrap();
    (a, b)
}

fn space() -> LabelSpace {
    LabelSpace::new(
        vec!["road".into(), "sidewalk".into(), "building".into()],
        255,
        Default::default(),
    )
    .unwrap()
}

/// Prototype CSV written from the brute-force oracle's rows.
fn oracle_csv(maps: &[&ProbMap], names: &[String]) -> String {
    let pixels: Vec<Vec<f64>> = maps
        .iter()
        .flat_map(|m| m.pixels().map(<[f64]>::to_vec).collect::<Vec<_>>())
        .collect();
    let c = names.len();
    let (rows, observed) = oracle::prototypes(&pixels, c);
    let mut out = format!("class,{},observed,source_weight\n", names.join(","));
    for k in 0..c {
        let weight: f64 = pixels.iter().map(|p| oracle::indicator_weight(p, k)).sum();
        let values: Vec<String> = rows[k].iter().map(|&v| format_sig17(v)).collect();
        out.push_str(&format!(
            "{},{},{},{}\n",
            names[k],
            values.join(","),
            observed[k],
            format_sig17(weight)
        ));
    }
    out
}

fn fixture_manifest() -> std::path::PathBuf {
    let dir = fixture_dir().join(DIR);
    if blessing() {
        let (a, b) = two_maps();
        write_dataset(&dir, &space(), &[("a", &a, None), ("b", &b, None)]);
        let names = space().class_names().to_vec();
        std::fs::write(
            dir.join("golden_prototypes.csv"),
            oracle_csv(&[&a, &b], &names),
        )
        .unwrap();
    }
    dir.join("manifest.json")
}

#[test]
fn fit_matches_oracle_golden_csv() {
    let manifest = fixture_manifest();
    let out = tempfile::tempdir().unwrap();
    let stdout = labelcal_ok(&["fit", "--manifest", s(&manifest), "--out", s(out.path())]);
    assert!(stdout.contains("unobserved classes: building"), "{stdout}");

    let golden =
        std::fs::read_to_string(fixture_dir().join(DIR).join("golden_prototypes.csv")).unwrap();
    let got = std::fs::read_to_string(out.path().join("prototypes.csv")).unwrap();
    assert_eq!(got, golden);

    // the golden file still agrees with the oracle on the committed inputs
    let (a, b) = two_maps();
    assert_eq!(golden, oracle_csv(&[&a, &b], space().class_names()));

    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.path().join("fit_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(
        summary["unobserved_classes"],
        serde_json::json!(["building"])
    );
    assert_eq!(summary["num_pixels"], 7);
    assert_eq!(summary["classes"][2]["observed"], false);
    assert!(summary["wall_time_seconds"].as_f64().unwrap() >= 0.0);

    let json = load_prototypes(&out.path().join("prototypes.json")).unwrap();
    let csv = load_prototypes(&out.path().join("prototypes.csv")).unwrap();
    assert_eq!(json, csv);
}

#[test]
fn threaded_fit_matches_single_thread() {
    let dir = tempfile::tempdir().unwrap();
    let maps = random_maps(5, 7, 9, 6, 4);
    let entries: Vec<(String, &ProbMap)> = maps
        .iter()
        .enumerate()
        .map(|(i, m)| (format!("m{i}"), m))
        .collect();
    let listed: Vec<_> = entries
        .iter()
        .map(|(id, m)| (id.as_str(), *m, None))
        .collect();
    let manifest = write_dataset(dir.path(), &LabelSpace::numbered(4).unwrap(), &listed);

    let single = dir.path().join("one");
    let multi = dir.path().join("many");
    labelcal_ok(&["fit", "--manifest", s(&manifest), "--out", s(&single)]);
    labelcal_ok(&[
        "fit",
        "--manifest",
        s(&manifest),
        "--out",
        s(&multi),
        "--threads",
        "3",
    ]);
    let a = load_prototypes(&single.join("prototypes.json")).unwrap();
    let b = load_prototypes(&multi.join("prototypes.json")).unwrap();
    assert_eq!(a.observed(), b.observed());
    for (x, y) in a.matrix().iter().zip(b.matrix()) {
        assert!((x - y).abs() <= 1e-9);
    }
}

fn assert_no_outputs(out: &Path) {
    assert!(
        !out.exists(),
        "{} should not have been created",
        out.display()
    );
}

#[test]
fn unreadable_manifest_is_an_io_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = labelcal(&[
        "fit",
        "--manifest",
        s(&dir.path().join("missing.json")),
        "--out",
        s(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert_no_outputs(&out);
}

#[test]
fn corrupt_map_fails_fast_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let maps = random_maps(1, 2, 3, 3, 2);
    let manifest = write_dataset(
        dir.path(),
        &LabelSpace::numbered(2).unwrap(),
        &[("x", &maps[0], None), ("y", &maps[1], None)],
    );
    let bytes = std::fs::read(dir.path().join("y.pcpm")).unwrap();
    std::fs::write(dir.path().join("y.pcpm"), &bytes[..bytes.len() - 3]).unwrap();

    let out = dir.path().join("out");
    for threads in ["1", "2"] {
        let res = labelcal(&[
            "fit",
            "--manifest",
            s(&manifest),
            "--out",
            s(&out),
            "--threads",
            threads,
        ]);
        assert_eq!(res.status.code(), Some(3));
        assert!(String::from_utf8_lossy(&res.stderr).contains("\"y\""));
        assert_no_outputs(&out);
    }

    std::fs::remove_file(dir.path().join("y.pcpm")).unwrap();
    let res = labelcal(&["fit", "--manifest", s(&manifest), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert_no_outputs(&out);
}

#[test]
fn malformed_manifest_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    std::fs::write(&manifest, r#"{"label_space": "nope", "entries": []}"#).unwrap();
    let res = labelcal(&[
        "fit",
        "--manifest",
        s(&manifest),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(labelcal(&["fit"]).status.code(), Some(2));
    assert_eq!(
        labelcal(&["fit", "--manifest", "m", "--out", "o", "--threads", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(labelcal(&["frobnicate"]).status.code(), Some(2));
}
