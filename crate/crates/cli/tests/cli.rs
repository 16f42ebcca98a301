use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ltfade_cli::svg::render_csv;
use ltfade_cli::table::{read_csv, Row};

fn ltfade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltfade")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn rows(o: &Output) -> Vec<Row> {
    assert!(o.status.success(), "{}", stderr(o));
    read_csv(&stdout(o)).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const TWO_STATE: &str = r#"
variances = [1.0]
request_probs = [1.0]
[channel]
kind = "discrete"
states = [[1.0, 0.5], [2.0, 0.5]]
"#;

#[test]
fn strict_delay_two_state_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_STATE);
    let r = rows(&ltfade(&["strict-delay", "--config", &cfg, "--power-db", "0"]));
    assert_eq!(r.len(), 1);
    assert!((r[0].mse - 4.5 / 13.0).abs() < 1e-9);
    assert!((r[0].mu - 13.0 / 6.0).abs() < 1e-9);
}

#[test]
fn strict_delay_reference_grid() {
    let r = rows(&ltfade(&["strict-delay", "--power-db", "-inf,-5:30:5"]));
    assert_eq!(r[0].power_db, f64::NEG_INFINITY);
    assert!((r[0].mse - 3.0).abs() < 1e-9);
    assert!(r.windows(2).all(|w| w[1].mse < w[0].mse));
    assert!(r.iter().all(|x| x.blocks == 0 && x.mse_ci95 == 0.0 && x.d == 1));
}

#[test]
fn counterexample_verdict() {
    let o = ltfade(&["counterexample"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("D1 (one-to-one) = 0.337662"), "{text}");
    assert!(text.contains("D2 (repeated)   = 0.311688"), "{text}");
    assert!(text.contains("verdict: non-diagonal wins"));
    // no cross power: the two schemes coincide
    let tie = ltfade(&["counterexample", "--p11", "8", "--p12", "0", "--p21", "0"]);
    assert!(stdout(&tie).contains("verdict: tie"), "{}", stderr(&tie));
    // a split that overspends is rejected
    assert_eq!(ltfade(&["counterexample", "--p11", "8", "--p12", "1", "--p21", "1"]).status.code(), Some(2));
}

#[test]
fn bounds_at_zero_power_and_cap_warning() {
    let o = ltfade(&["bounds", "--power-db", "-inf", "--delay", "1,3", "--u-max", "4"]);
    let r = rows(&o);
    for row in &r {
        assert!((row.mse - 3.0).abs() < 1e-9, "{row:?}");
    }
    assert!(stderr(&o).contains("d=3") && stderr(&o).contains("search cap"));
    let o = ltfade(&["bounds", "--power-db", "10", "--delay", "1", "--u-max", "4"]);
    assert!(!stderr(&o).contains("search cap"));
}

#[test]
fn no_csi_loses_to_csi() {
    let csi = rows(&ltfade(&["strict-delay", "--power-db", "-10:20:10"]));
    let no = rows(&ltfade(&["no-csi", "--power-db", "-10:20:10"]));
    let no: Vec<&Row> = no.iter().filter(|r| r.strategy == "strict_no_csi").collect();
    assert_eq!(no.len(), csi.len());
    for (a, b) in csi.iter().zip(no) {
        assert!(a.mse <= b.mse + 1e-12);
    }
}

#[test]
fn simulation_is_reproducible_per_seed() {
    let args = ["simulate", "--blocks", "600", "--delay", "1,3", "--seed", "5", "--strategy", "lthm,ltsm"];
    let a = ltfade(&args);
    let b = ltfade(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let c =
        ltfade(&["simulate", "--blocks", "600", "--delay", "1,3", "--seed", "6", "--strategy", "lthm,ltsm"]);
    assert_ne!(a.stdout, c.stdout);
    let r = read_csv(&stdout(&a)).unwrap();
    assert_eq!(r.len(), 4);
    assert!(r.iter().all(|x| x.blocks == 600 && x.seed == 5 && x.mse_ci95.is_finite()));
}

#[test]
fn config_error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "variances = [1.0]\nrequest_probs = [1.0]\nspeed = 3\n");
    assert_eq!(ltfade(&["strict-delay", "--config", &unknown]).status.code(), Some(2));
    let bad_model = write_config(dir.path(), "variances = [-1.0]\nrequest_probs = [1.0]\n");
    assert_eq!(ltfade(&["strict-delay", "--config", &bad_model]).status.code(), Some(2));
    let bad_kind = write_config(dir.path(), "[strategy]\nkind = \"ltxm\"\n");
    assert_eq!(ltfade(&["simulate", "--config", &bad_kind]).status.code(), Some(2));
    assert_eq!(ltfade(&["strict-delay", "--power-db", "loud"]).status.code(), Some(2));
    assert_eq!(ltfade(&["simulate", "--delay", "0"]).status.code(), Some(2));
    assert_eq!(ltfade(&["figure", "fig8"]).status.code(), Some(2));
    assert_eq!(ltfade(&["strict-delay", "--format", "both"]).status.code(), Some(2));
}

#[test]
fn config_drives_a_strategy_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &format!(
            "{TWO_STATE}\n[strategy]\nkind = \"ltsm\"\ndelay = [1, 3]\npower_db = 0.0\nblocks = 300\nseed = 9\n[output]\ndir = \"{}\"\nformat = \"csv\"\n",
            out.display()
        ),
    );
    let o = ltfade(&["simulate", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_csv(&fs::read_to_string(out.join("simulate.csv")).unwrap()).unwrap();
    assert_eq!(
        r.iter().map(|x| (x.strategy.as_str(), x.d)).collect::<Vec<_>>(),
        vec![("ltsm", 1), ("ltsm", 3)]
    );
    assert!(r.iter().all(|x| x.seed == 9 && x.blocks == 300));
    assert!(!out.join("simulate.svg").exists());
    // flags override the file
    let o = ltfade(&["simulate", "--config", &cfg, "--seed", "10", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let r = read_csv(&fs::read_to_string(dir.path().join("simulate.csv")).unwrap()).unwrap();
    assert!(r.iter().all(|x| x.seed == 10));
}

#[test]
fn figures_write_csv_and_matching_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ltfade(&["figure", "fig6", "--blocks", "300", "--delay", "1,3,5", "--u-max", "8", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("fig6.csv")).unwrap();
    let svg = fs::read_to_string(dir.path().join("fig6.svg")).unwrap();
    assert_eq!(render_csv(&csv).unwrap(), svg);
    let r = read_csv(&csv).unwrap();
    let tlb: Vec<f64> = r.iter().filter(|x| x.strategy == "tlb_csi").map(|x| x.mse).collect();
    assert_eq!(tlb.len(), 3);
    assert!(tlb.iter().all(|v| *v == tlb[0]));
    for kind in ["lthm", "ltsm", "llb"] {
        assert_eq!(r.iter().filter(|x| x.strategy == kind).count(), 3, "{kind}");
    }
    let rendered = ltfade(&["render", dir.path().join("fig6.csv").to_str().unwrap()]);
    assert_eq!(stdout(&rendered), svg);

    let o = ltfade(&["figure", "fig7", "--out", out]);
    assert!(o.status.success());
    let r = read_csv(&fs::read_to_string(dir.path().join("fig7.csv")).unwrap()).unwrap();
    let with: Vec<&Row> = r.iter().filter(|x| x.strategy == "strict").collect();
    let without: Vec<&Row> = r.iter().filter(|x| x.strategy == "strict_no_csi").collect();
    assert_eq!(with.len(), 8);
    for (a, b) in with.iter().zip(&without) {
        assert!(a.mse <= b.mse + 1e-12);
    }
}

#[test]
fn compare_modes_reports_agreement() {
    let o = ltfade(&["validate", "--blocks", "3000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_csv(&stdout(&o)).unwrap();
    assert_eq!(r.len(), 6);
    assert_eq!(stderr(&o).matches(": agree").count(), 3);
}

#[test]
fn help_documents_the_schema() {
    let o = ltfade(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("strategy,d,power_db,mse,mse_ci95,avg_power,mu,blocks,seed"));
    assert!(text.contains("Exit codes"));
}
