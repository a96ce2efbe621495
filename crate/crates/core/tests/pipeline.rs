use std::fs;
use std::path::{Path, PathBuf};

use polydec_core::pipeline::{run_pipeline, Estimator, Prune, RunConfig};
use polydec_core::report::RankingReport;

fn lqr_only() -> RunConfig {
    RunConfig { estimator: Estimator::Lqr, prune: Prune::None, ..RunConfig::default() }
}

fn write_decompositions(dir: &Path, docs: &[&str]) -> Vec<PathBuf> {
    docs.iter()
        .enumerate()
        .map(|(i, d)| {
            let p = dir.join(format!("d{i}.json"));
            fs::write(&p, d).unwrap();
            p
        })
        .collect()
}

const CASCADE: &str = r#"{"kind":"cascaded","chain":[{"inputs":[1],"states":[2,3]},{"inputs":[0],"states":[0,1]}]}"#;
const SPLIT: &str = r#"{"kind":"decoupled","nodes":[{"inputs":[1],"states":[0,1]},{"inputs":[0],"states":[2,3]}]}"#;

fn assert_ranks_follow(report: &RankingReport, value: impl Fn(usize) -> Option<f64>, rank: impl Fn(usize) -> Option<usize>) {
    let rows: Vec<usize> = report.rows.iter().filter(|r| r.id != 0).map(|r| r.id).collect();
    for &a in &rows {
        assert_eq!(value(a).is_some(), rank(a).is_some(), "row {a}");
        for &b in &rows {
            if let (Some(va), Some(vb)) = (value(a), value(b)) {
                let (ra, rb) = (rank(a).unwrap(), rank(b).unwrap());
                assert_eq!(va.total_cmp(&vb), ra.cmp(&rb), "rows {a} and {b}");
            }
        }
    }
}

#[test]
fn lqr_screen_of_every_cartpole_decomposition() {
    let report = run_pipeline(&lqr_only()).unwrap();
    assert_eq!(report.rows.len(), 45);
    let base = report.row(0).unwrap();
    assert_eq!(base.err_lqr, Some(0.0));
    assert_eq!(base.time_est, Some(1.0));
    assert_eq!(base.r_lqr, None);
    assert!(!report.has_errors());
    let value = |id: usize| report.row(id).unwrap().err_lqr;
    let rank = |id: usize| report.row(id).unwrap().r_lqr;
    assert_ranks_follow(&report, value, rank);
    for row in &report.rows[1..] {
        assert!(row.err_ddp.is_none() && row.err.is_none() && row.r.is_none());
        assert!(row.time_est.unwrap() > 0.0 && row.time_est.unwrap() < 1.0);
        assert_eq!(row.lqr_bar.is_some(), row.err_lqr.unwrap().is_finite(), "row {}", row.id);
    }

    let text = report.to_csv();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "id,serialization,err_lqr,lqr_bar,err_ddp,err,time_est,time_meas,r_lqr,r_ddp,r"
    );
    assert_eq!(lines.count(), 45);
}

#[test]
fn empty_list_gives_only_the_baseline() {
    let cfg = RunConfig { decompositions: Some(Vec::new()), ..lqr_only() };
    let report = run_pipeline(&cfg).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.rows[0].id, 0);
}

#[test]
fn invalid_decomposition_becomes_an_error_row() {
    let dir = tempfile::tempdir().unwrap();
    let bad = r#"{"kind":"decoupled","nodes":[{"inputs":[0],"states":[0,1]},{"inputs":[0],"states":[2,3]}]}"#;
    let files = write_decompositions(dir.path(), &[CASCADE, bad]);
    let cfg = RunConfig { decompositions: Some(files), ..lqr_only() };
    let report = run_pipeline(&cfg).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert!(report.has_errors());
    assert!(report.row(1).unwrap().errors.is_empty());
    assert!(!report.row(2).unwrap().errors.is_empty());
    assert_eq!(report.row(2).unwrap().err_lqr, None);
}

#[test]
fn configuration_is_checked() {
    assert!(RunConfig::from_json(r#"{"system":"cartpole","bogus":1}"#).is_err());
    let cfg = RunConfig::from_json(r#"{"system":"manip2","prune":"top:3","estimator":"lqr"}"#).unwrap();
    assert_eq!(cfg.prune, Prune::Top(3));
    let cfg = RunConfig { verify: true, ..RunConfig::default() };
    assert!(cfg.validate().is_err());
    let cfg = RunConfig { system: "no-such-system".into(), ..RunConfig::default() };
    assert!(run_pipeline(&cfg).is_err());
}

#[test]
fn estimate_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let files = write_decompositions(a.path(), &[CASCADE, SPLIT]);
    let run = |out: &Path| {
        let cfg = RunConfig {
            decompositions: Some(files.clone()),
            estimator: Estimator::Both,
            prune: Prune::None,
            horizon: Some(0.5),
            dt: Some(2e-3),
            out: Some(out.to_path_buf()),
            ..RunConfig::default()
        };
        run_pipeline(&cfg).unwrap()
    };
    let ra = run(&a.path().join("out"));
    run(&b.path().join("out"));
    for name in ["report.csv", "report.json"] {
        let fa = fs::read(a.path().join("out").join(name)).unwrap();
        let fb = fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(fa, fb, "{name} differs");
    }
    assert_eq!(ra.row(0).unwrap().err_ddp, Some(0.0));
    let value = |id: usize| ra.row(id).unwrap().err_ddp;
    let rank = |id: usize| ra.row(id).unwrap().r_ddp;
    assert_ranks_follow(&ra, value, rank);
    for row in &ra.rows {
        for art in &row.artifacts {
            assert!(a.path().join("out").join(art).exists(), "{art}");
        }
    }
    let back = RankingReport::from_json(&fs::read_to_string(a.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(back.to_csv(), ra.to_csv());
}

#[test]
fn verify_writes_artifacts_and_true_errors() {
    let dir = tempfile::tempdir().unwrap();
    let files = write_decompositions(dir.path(), &[CASCADE, SPLIT]);
    let out = dir.path().join("out");
    let cfg = RunConfig {
        decompositions: Some(files),
        estimator: Estimator::Lqr,
        prune: Prune::None,
        solve: true,
        verify: true,
        grid_scale: Some(0.3),
        out: Some(out.clone()),
        ..RunConfig::default()
    };
    let report = run_pipeline(&cfg).unwrap();
    assert!(!report.has_errors(), "{:?}", report.rows.iter().map(|r| &r.errors).collect::<Vec<_>>());
    assert_eq!(report.row(0).unwrap().err, Some(0.0));
    for id in [1, 2] {
        let row = report.row(id).unwrap();
        assert!(row.err.is_some() && row.time_meas.unwrap() > 0.0);
        assert!(row.r.is_some());
        assert!(!row.artifacts.is_empty());
    }
    for row in &report.rows {
        for art in &row.artifacts {
            assert!(out.join(art).exists(), "{art}");
        }
    }
    assert!(out.join("report.csv").exists() && out.join("report.json").exists());
}
