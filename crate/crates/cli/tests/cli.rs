use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use modecause::dataset::{Codebook, CodedDataset, Variable};
use modecause::effects::EffectsTable;

fn modecause(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modecause"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = modecause(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_dataset(dir: &Path, data: &CodedDataset) {
    let mut csv = Vec::new();
    data.write_csv(&mut csv, None).unwrap();
    fs::write(dir.join("data.csv"), csv).unwrap();
    let codebook = Codebook::new(data.columns().to_vec()).unwrap();
    fs::write(dir.join("codebook.toml"), codebook.to_toml_string()).unwrap();
}

#[test]
fn simulate_then_discover_collider() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["simulate", "--preset", "collider", "--n", "20000", "--seed", "3", "--out", p(out)]);
    let data = out.join("data.csv");
    ok(&["discover", "--input", p(&data), "--alpha", "0.01", "--out", p(out)]);
    let dot = fs::read_to_string(out.join("graph.dot")).unwrap();
    assert!(dot.contains("A -> C;"), "{dot}");
    assert!(dot.contains("B -> C;"), "{dot}");
    assert!(dot.starts_with("// modecause "));
    let report = fs::read_to_string(out.join("discovery_report.txt")).unwrap();
    assert!(report.contains("[warnings]\nnone"));
}

#[test]
fn simulate_and_discover_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let files = ["data.csv", "truth.dot", "true_effects.csv", "codebook.toml", "graph.dot", "discovery_report.txt"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        ok(&["simulate", "--preset", "northlike", "--n", "1000", "--seed", "7", "--out", p(out)]);
        ok(&["discover", "--input", p(&out.join("data.csv")), "--out", p(out)]);
        runs.push(files.map(|f| fs::read(out.join(f)).unwrap()));
        for f in files {
            fs::remove_file(out.join(f)).unwrap();
        }
    }
    for (i, file) in files.iter().enumerate() {
        assert_eq!(runs[0][i], runs[1][i], "{file} differs");
    }
    assert_eq!(String::from_utf8_lossy(&runs[0][0]).lines().count(), 1002);
}

#[test]
fn independent_columns_give_empty_graph() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    for _ in 0..100 {
        for a in 0..2 {
            for b in 0..3 {
                for c in 0..2 {
                    rows.push(vec![a, b, c]);
                }
            }
        }
    }
    let data = CodedDataset::new(
        vec![
            Variable::with_codes("a", 0, 1),
            Variable::with_codes("b", 0, 2),
            Variable::with_codes("c", 0, 1),
        ],
        rows,
    )
    .unwrap();
    write_dataset(dir.path(), &data);
    ok(&["discover", "--input", p(&dir.path().join("data.csv")), "--out", p(dir.path())]);
    let dot = fs::read_to_string(dir.path().join("graph.dot")).unwrap();
    assert!(!dot.contains("->"), "{dot}");
}

#[test]
fn effects_match_truth_on_confounded_triple() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["simulate", "--preset", "confounded", "--n", "10000", "--seed", "11", "--out", p(out)]);
    ok(&[
        "effects",
        "--input",
        p(&out.join("data.csv")),
        "--graph",
        p(&out.join("truth.dot")),
        "--seed",
        "11",
        "--out",
        p(out),
    ]);
    let truth = EffectsTable::from_csv(&fs::read_to_string(out.join("true_effects.csv")).unwrap()).unwrap();
    let est = EffectsTable::from_csv(&fs::read_to_string(out.join("effects_full.csv")).unwrap()).unwrap();
    let (t, e) = (truth.get("T", "O").unwrap(), est.get("T", "O").unwrap());
    assert!((t - e).abs() <= 0.05, "true {t}, estimated {e}");
    assert_eq!(est.get("O", "T"), Some(0.0));
    let meta = fs::read_to_string(out.join("effects_meta.txt")).unwrap();
    assert!(meta.contains("adjustment: parents of the cause"));
    assert!(meta.contains("T: {Z}"));
}

#[test]
fn effects_reject_cycles_and_undirected_edges() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["simulate", "--preset", "chain", "--n", "200", "--seed", "1", "--out", p(out)]);
    let data = out.join("data.csv");

    let cyclic = out.join("cyclic.dot");
    fs::write(&cyclic, "digraph G {\n  A -> B;\n  B -> C;\n  C -> A;\n}\n").unwrap();
    let res = modecause(&["effects", "--input", p(&data), "--graph", p(&cyclic), "--seed", "1", "--out", p(out)]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.starts_with("modecause-error: effects: "), "{err}");
    assert!(err.contains("cycle"), "{err}");

    let partial = out.join("partial.dot");
    fs::write(&partial, "digraph G {\n  A -> B [dir=none];\n  B -> C;\n}\n").unwrap();
    let res = modecause(&["effects", "--input", p(&data), "--graph", p(&partial), "--seed", "1", "--out", p(out)]);
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("`A` -- `B`"), "{err}");
}

#[test]
fn errors_are_single_prefixed_lines() {
    let dir = tempfile::tempdir().unwrap();
    let res = modecause(&["simulate", "--preset", "nowhere", "--n", "5", "--seed", "1", "--out", p(dir.path())]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("modecause-error: scm: "), "{err}");

    let res = modecause(&["simulate", "--preset", "pair", "--n", "5", "--out", p(dir.path())]);
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("modecause-error: config: "));
}

#[test]
fn noiseless_target_is_learned_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<Vec<i32>> = (0..1000)
        .map(|i| {
            let a = i % 10;
            let b = (i * 7 / 10) % 10;
            vec![a, b, i32::from(a > 4)]
        })
        .collect();
    let data = CodedDataset::new(
        vec![
            Variable::with_codes("a", 0, 9),
            Variable::with_codes("b", 0, 9),
            Variable::with_labels("y", &["low", "high"]),
        ],
        rows,
    )
    .unwrap();
    write_dataset(dir.path(), &data);
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        "target = \"y\"\ncv_folds = 0\nexplain_rows = 20\n[mlp]\nlearning_rate = 0.01\nmax_epochs = 300\npatience = 30\n",
    )
    .unwrap();
    ok(&[
        "train-explain",
        "--config",
        p(&config),
        "--input",
        p(&dir.path().join("data.csv")),
        "--seed",
        "5",
        "--out",
        p(dir.path()),
    ]);
    let metrics = fs::read_to_string(dir.path().join("metrics.txt")).unwrap();
    assert!(metrics.contains("test_accuracy: 100.00"), "{metrics}");
    let shap = fs::read_to_string(dir.path().join("shap_mean_abs.csv")).unwrap();
    for class in ["low", "high"] {
        let rows: Vec<&str> = shap.lines().filter(|l| l.starts_with(&format!("{class},"))).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].contains(",1,a,"), "{shap}");
    }
}

#[test]
fn full_pipeline_on_northlike() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let config = out.join("run.toml");
    fs::write(&config, "cv_folds = 0\nexplain_rows = 50\nbackground_rows = 50\n[dml]\ngb_stages = 30\n").unwrap();
    let c = p(&config);
    ok(&["simulate", "--config", c, "--preset", "northlike", "--n", "4000", "--seed", "2", "--out", p(out)]);
    let data = out.join("data.csv");
    let data = p(&data);
    ok(&["discover", "--config", c, "--input", data, "--out", p(out)]);
    ok(&[
        "effects",
        "--config",
        c,
        "--input",
        data,
        "--graph",
        p(&out.join("truth.dot")),
        "--seed",
        "2",
        "--out",
        p(out),
    ]);
    ok(&["train-explain", "--config", c, "--input", data, "--seed", "2", "--out", p(out)]);
    ok(&["compare", "--config", c, "--out", p(out)]);
    let report = fs::read_to_string(out.join("comparison.txt")).unwrap();
    for class in ["[Car]", "[Public]", "[Walk]"] {
        assert!(report.contains(class), "{report}");
    }
    assert!(report.contains("spearman(|effect|, mean_abs_shap): "));
    let sex: Vec<&str> = report.lines().filter(|l| l.starts_with("sex,")).collect();
    assert_eq!(sex.len(), 3);
    for line in sex {
        assert!(line.starts_with("sex,0.0000,"), "{line}");
        assert!(line.ends_with(",zero-effect-nonzero-shap"), "{line}");
    }
}
