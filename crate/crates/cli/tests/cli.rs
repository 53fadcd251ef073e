use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn mgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgeo"))
        .args(args)
        .output()
        .expect("spawn mgeo")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Synthetic data plus a config with a few cheap scenarios.
fn setup(assets: &str, extra: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = mgeo(&[
        "synth",
        "--out",
        p(&data),
        "--assets",
        assets,
        "--start",
        "2001-01-01",
        "--end",
        "2003-06-30",
        "--seed",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let config = data.join("run.json");
    fs::write(
        &config,
        format!(
            r#"{{"panel": "prices.csv", "index": "index.csv", "seed": 5,
                 "surrogate": {{"replicas": 10}}{extra}}}"#
        ),
    )
    .unwrap();
    (dir, config)
}

fn code(out: &Output) -> Option<i32> {
    out.status.code()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn missing_panel_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(&config, r#"{"panel": "absent.csv", "seed": 1}"#).unwrap();
    let out = mgeo(&[
        "analyze",
        "--config",
        p(&config),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), Some(2));
    assert!(stderr(&out).contains("absent.csv"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn analyze_writes_parseable_outputs() {
    let (dir, config) = setup("8", "");
    let run = dir.path().join("run");
    let out = mgeo(&["analyze", "--config", p(&config), "--out", p(&run)]);
    assert_eq!(code(&out), Some(0), "{}", stderr(&out));

    let spectrum = fs::read_to_string(run.join("analyze/spectrum.csv")).unwrap();
    let mut lines = spectrum.lines();
    assert_eq!(lines.next(), Some("window_id,rank,eigenvalue"));
    // 2001H1 .. 2003H1 is five blocks, four periods, seven ranks each.
    assert_eq!(lines.count(), 4 * 7);

    let coords = fs::read_to_string(run.join("analyze/eigen_coords.csv")).unwrap();
    assert!(coords.starts_with("window_id,ticker,axis,coordinate\n"));
    assert_eq!(coords.lines().count(), 1 + 4 * 8 * 7);

    let dims: serde_json::Value =
        serde_json::from_slice(&fs::read(run.join("analyze/dimension.json")).unwrap()).unwrap();
    let dims = dims.as_array().unwrap();
    assert_eq!(dims.len(), 4);
    for w in dims {
        assert_eq!(w["envelope"].as_array().unwrap().len(), 7);
        assert!(w["dimension"].as_u64().unwrap() <= 6);
        assert!(w["rule"].as_str().unwrap().contains("envelope"));
    }
    let surrogates = fs::read_to_string(run.join("analyze/surrogates/window_000.csv")).unwrap();
    assert!(surrogates.starts_with("replica,rank,eigenvalue\n"));
    assert_eq!(surrogates.lines().count(), 1 + 10 * 7);
}

#[test]
fn reruns_with_the_same_seed_match_and_seed_flag_overrides() {
    let (dir, config) = setup("8", "");
    let read = |name: &str| fs::read(dir.path().join(name).join("analyze/dimension.json")).unwrap();
    for (name, seed) in [("a", None), ("b", None), ("c", Some("99"))] {
        let out_dir = dir.path().join(name);
        let mut args = vec!["analyze", "--config", p(&config), "--out", p(&out_dir)];
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        assert_eq!(code(&mgeo(&args)), Some(0));
    }
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn backtest_writes_one_directory_per_reference_scenario() {
    let (dir, config) = setup("10", r#", "estimate_dimension": false"#);
    let run = dir.path().join("run");
    let out = mgeo(&["backtest", "--config", p(&config), "--out", p(&run)]);
    assert_eq!(code(&out), Some(0), "{}", stderr(&out));
    let mut dirs: Vec<String> = fs::read_dir(run.join("backtest"))
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().into_string().unwrap())
        .collect();
    dirs.sort();
    assert_eq!(dirs.len(), 11);
    assert!(dirs.contains(&"dir2-4-5_t0.50".to_string()));
    for d in &dirs {
        let base = run.join("backtest").join(d);
        let track = fs::read_to_string(base.join("track.csv")).unwrap();
        assert!(track.starts_with("date,portfolio_value,index_value,D\n"));
        let comp = fs::read_to_string(base.join("composition.csv")).unwrap();
        assert!(comp.starts_with("window_id,subspace,ticker,f,weight,shares\n"));
        let summary: serde_json::Value =
            serde_json::from_slice(&fs::read(base.join("summary.json")).unwrap()).unwrap();
        assert!(summary["gain_factor_pct"].as_f64().unwrap() > 0.0);
        assert_eq!(summary["d_values"].as_array().unwrap().len(), 4);
    }
}

#[test]
fn empty_scenario_list_is_rejected() {
    let (dir, config) = setup("6", r#", "scenarios": []"#);
    let out = mgeo(&[
        "backtest",
        "--config",
        p(&config),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), Some(2));
    assert!(stderr(&out).contains("scenario"));
}

#[test]
fn unknown_rank_is_named() {
    let (dir, config) = setup(
        "6",
        r#", "scenarios": [{"label": "far", "directions": [2, 9], "threshold": 0.5}]"#,
    );
    let out = mgeo(&[
        "backtest",
        "--config",
        p(&config),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), Some(2));
    assert!(stderr(&out).contains('9'), "{}", stderr(&out));
}

#[test]
fn frontier_needs_backtest_outputs() {
    let (dir, config) = setup("6", "");
    let out = mgeo(&[
        "frontier",
        "--config",
        p(&config),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), Some(2));
    let out = mgeo(&[
        "frontier",
        "--config",
        p(&config),
        "--out",
        p(&dir.path().join("o2")),
        "--backtest",
        p(&dir.path().join("nothing-here")),
    ]);
    assert_eq!(code(&out), Some(2));
}

#[test]
fn two_point_frontier_and_placements_from_a_previous_run() {
    let (dir, config) = setup(
        "7",
        r#", "estimate_dimension": false, "frontier_points": 2,
           "scenarios": [{"label": "one", "directions": [1], "threshold": 0.4},
                         {"label": "mix", "directions": [1, 2], "threshold": 0.5}]"#,
    );
    let bt = dir.path().join("bt");
    assert_eq!(
        code(&mgeo(&[
            "backtest",
            "--config",
            p(&config),
            "--out",
            p(&bt)
        ])),
        Some(0)
    );

    let read_from = dir.path().join("f1");
    let out = mgeo(&[
        "frontier",
        "--config",
        p(&config),
        "--out",
        p(&read_from),
        "--backtest",
        p(&bt),
    ]);
    assert_eq!(code(&out), Some(0), "{}", stderr(&out));
    let in_run = dir.path().join("f2");
    let out = mgeo(&[
        "frontier",
        "--config",
        p(&config),
        "--out",
        p(&in_run),
        "--compute-backtest",
    ]);
    assert_eq!(code(&out), Some(0), "{}", stderr(&out));

    let frontier = fs::read_to_string(read_from.join("frontier/frontier.csv")).unwrap();
    let mut lines = frontier.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("target_mu,sigma,mu,w_S000,"));
    assert_eq!(header.split(',').count(), 3 + 7);
    assert_eq!(lines.count(), 2);

    let a = fs::read(read_from.join("frontier/placements.csv")).unwrap();
    let b = fs::read(in_run.join("frontier/placements.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3);
}

#[test]
fn output_directories_are_never_reused() {
    let (dir, config) = setup("6", r#", "estimate_dimension": false"#);
    let run = dir.path().join("run");
    fs::create_dir_all(&run).unwrap();
    fs::write(run.join("keep.txt"), "x").unwrap();
    let out = mgeo(&["analyze", "--config", p(&config), "--out", p(&run)]);
    assert_eq!(code(&out), Some(2));
    assert_eq!(fs::read_dir(&run).unwrap().count(), 1);
}

#[test]
fn bad_data_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("p.csv"),
        "date,ticker,price,market_cap\n2001-01-02,A,1.0,10\n2001-01-02,B,-2.0,10\n",
    )
    .unwrap();
    let config = dir.path().join("c.json");
    fs::write(&config, r#"{"panel": "p.csv", "seed": 1}"#).unwrap();
    let out = mgeo(&[
        "analyze",
        "--config",
        p(&config),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}
