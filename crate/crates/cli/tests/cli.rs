use std::path::Path;
use std::process::{Command, Output};

use quasistat::pointproc::{sample_pd_poisson_kingman, sample_pd_stickbreaking};
use quasistat::rng::{stream_rng, Purpose};
use quasistat_cli::ResultRecord;

fn quasistat(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasistat"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("QUASISTAT_SEED")
        .output()
        .expect("binary runs")
}

fn report(out: &Path) -> ResultRecord {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn sample_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["sample", "--alpha", "0.5", "--replicas", "10", "--trunc-n", "50", "--seed", "7"];
    assert!(quasistat(&args, &a).status.success());
    assert!(quasistat(&args, &b).status.success());
    assert_eq!(std::fs::read(a.join("samples.csv")).unwrap(), std::fs::read(b.join("samples.csv")).unwrap());
    // Reports differ only in the recorded output directory.
    let (ra, mut rb) = (report(&a), report(&b));
    rb.config.out = ra.config.out.clone();
    assert_eq!(ra, rb);
    let (header, rows) = read_csv(&a.join("samples.csv"));
    assert_eq!(header, ["xi_1", "xi_2", "xi_3", "xi_4", "xi_5"]);
    assert_eq!(rows.len(), 10);
}

#[test]
fn pp_sample_has_requested_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("pp.toml");
    std::fs::write(&cfg, "kind = \"pp\"\n").unwrap();
    let out = quasistat(
        &["sample", "--config", cfg.to_str().unwrap(), "--seed", "3", "--topk", "7", "--replicas", "20"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (gaps, rows) = read_csv(&dir.path().join("gaps.csv"));
    assert_eq!(gaps.len(), 7);
    assert_eq!(gaps[0], "gap_1");
    assert!(rows.iter().all(|r| r.len() == 7 && r.iter().all(|&g| g >= 0.0)));
    let (points, _) = read_csv(&dir.path().join("points.csv"));
    assert_eq!(points.len(), 7);
    assert_eq!(points[6], "x_7");
}

#[test]
fn leading_mass_matches_stickbreaking_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = quasistat(&["sample", "--alpha", "0.5", "--replicas", "4000", "--seed", "11"], dir.path());
    assert!(out.status.success());
    let r = report(dir.path());
    let (mean, se) = (r.statistics["mean_xi_1"], r.statistics["se_xi_1"]);
    let n = 20_000;
    let oracle: Vec<f64> = (0..n)
        .map(|i| sample_pd_stickbreaking(0.5, 1, &mut stream_rng(99, Purpose::Oracle, i)).unwrap().masses()[0])
        .collect();
    let om = oracle.iter().sum::<f64>() / n as f64;
    let ose = (oracle.iter().map(|v| (v - om).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
    assert!((mean - om).abs() <= 3.0 * (se * se + ose * ose).sqrt(), "{mean} ± {se} vs {om} ± {ose}");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // No seed anywhere.
    assert_eq!(quasistat(&["sample"], dir.path()).status.code(), Some(2));
    assert_eq!(quasistat(&["sample", "--seed", "1", "--alpha", "1.5"], dir.path()).status.code(), Some(2));
    assert_eq!(quasistat(&["--seed", "1"], dir.path()).status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "alpah = 0.2\n").unwrap();
    let out = quasistat(&["sample", "--config", bad.to_str().unwrap(), "--seed", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    // Output directory below a regular file cannot be created.
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = quasistat(&["sample", "--seed", "1", "--replicas", "2"], &blocker.join("sub"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn show_config_prints_resolved_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = quasistat(&["--show-config", "--alpha", "0.3", "--seed", "5"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg: quasistat_cli::ExperimentConfig = toml::from_str(&text).unwrap();
    assert_eq!(cfg.alpha, 0.3);
    assert_eq!(cfg.seed, Some(5));
    assert_eq!(cfg.trunc_n, 500);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_quasistat"))
        .args(["sample", "--replicas", "3", "--out"])
        .arg(dir.path())
        .env("QUASISTAT_SEED", "42")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(report(dir.path()).config.seed, Some(42));
}

#[test]
fn gen_functional_trivial_cases() {
    let dir = tempfile::tempdir().unwrap();
    for (heights, widths) in [("[]", "[]"), ("[0.0]", "[3.0]")] {
        let cfg = dir.path().join("f.toml");
        std::fs::write(&cfg, format!("step_heights = {heights}\nstep_widths = {widths}\n")).unwrap();
        let out = quasistat(
            &["gen-functional", "--config", cfg.to_str().unwrap(), "--seed", "1", "--replicas", "50"],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0));
        let r = report(dir.path());
        assert_eq!(r.statistics["mc_mean"], 1.0);
        assert_eq!(r.statistics["closed_form"], 1.0);
    }
}

#[test]
fn gen_functional_reference_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = quasistat(&["gen-functional", "--seed", "2", "--replicas", "20000", "--trunc-n", "200"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert!((r.statistics["closed_form"] - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn invariance_verdicts_for_pd_mixture_and_geometric() {
    let dir = tempfile::tempdir().unwrap();
    let out = quasistat(&["test-invariance", "--seed", "4", "--alpha", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(report(dir.path()).verdict.as_deref(), Some("consistent"));
    let (header, rows) = read_csv(&dir.path().join("after.csv"));
    assert_eq!(header.len(), 5);
    assert_eq!(rows.len(), 2000);

    for (kind, code, verdict) in [("mixture", 0, "consistent"), ("geometric", 1, "rejected")] {
        let cfg = dir.path().join(format!("{kind}.toml"));
        std::fs::write(&cfg, format!("kind = \"{kind}\"\n")).unwrap();
        let out = quasistat(&["test-invariance", "--config", cfg.to_str().unwrap(), "--seed", "4"], dir.path());
        assert_eq!(out.status.code(), Some(code), "{kind}");
        assert_eq!(report(dir.path()).verdict.as_deref(), Some(verdict), "{kind}");
    }
    let text = std::fs::read_to_string(dir.path().join("pvalues.csv")).unwrap();
    assert!(text.starts_with("test,statistic,p_value\n"));
}

#[test]
fn custom_partitions_are_read_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("parts.csv");
    let mut text = String::from("m1,m2,m3\n");
    for i in 0..1200 {
        let p = sample_pd_poisson_kingman(0.5, 500, &mut stream_rng(8, Purpose::Auxiliary, i)).unwrap();
        // Top 30 masses; the rest becomes the tail.
        let row: Vec<String> = p.masses()[..30].iter().map(|m| format!("{m:.17e}")).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(&path, text).unwrap();
    let cfg = dir.path().join("custom.toml");
    std::fs::write(&cfg, format!("kind = \"custom\"\ncustom_path = {:?}\n", path.to_str().unwrap())).unwrap();
    let out = quasistat(&["test-invariance", "--config", cfg.to_str().unwrap(), "--seed", "4"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r.statistics["n_before"], 600.0);
}

#[test]
fn lemma_at_zero_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lemma.toml");
    std::fs::write(&cfg, "law = \"gaussian\"\ntau = 0\ntrunc_n = 50\n").unwrap();
    let out = quasistat(&["verify-lemma", "--config", cfg.to_str().unwrap(), "--seed", "1", "--replicas", "200"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r.statistics["markov_violations"], 0.0);
    assert!(r.statistics["max_front_excess"] <= 0.0);
    let (header, rows) = read_csv(&dir.path().join("lemma.csv"));
    assert_eq!(header, ["replica", "min_markov_margin", "front", "jump"]);
    assert!(rows.iter().all(|r| r[2] <= 0.0));
}

#[test]
fn evolve_writes_evolved_ensembles() {
    let dir = tempfile::tempdir().unwrap();
    let out = quasistat(&["evolve", "--seed", "5", "--replicas", "20", "--tau", "3"], dir.path());
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("evolved.csv"));
    assert_eq!(header.len(), 5);
    assert!(rows.iter().all(|r| r.windows(2).all(|w| w[0] >= w[1])));

    let cfg = dir.path().join("pp.toml");
    std::fs::write(&cfg, "kind = \"pp\"\nlaw = \"gaussian\"\n").unwrap();
    let out = quasistat(&["evolve", "--config", cfg.to_str().unwrap(), "--seed", "5", "--replicas", "20"], dir.path());
    assert!(out.status.success());
    let (_, rows) = read_csv(&dir.path().join("evolved_points.csv"));
    // Leader shift puts the top point at zero.
    assert!(rows.iter().all(|r| r[0] == 0.0));
}
