use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn saddp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saddp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Small synthetic task shared by the tests.
const SMALL: &[&str] = &[
    "--n", "300", "--dim", "4", "--weights", "0.7,0.2,0.1", "--batch", "30", "--epochs", "3",
];

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend_from_slice(SMALL);
    v
}

#[test]
fn gen_data_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let o = saddp(&["gen-data", "--n", "1000", "--weights", "0.9,0.1", "--dim", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("[900, 100]"));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "f0,f1,label");
    assert_eq!(text.lines().count(), 1001);
}

#[test]
fn train_writes_outputs_and_flags_beat_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "[experiment]\nalgo = auto_s\nseeds = 0..2\n\n[privacy]\neps = 8\n").unwrap();
    let out = dir.path().join("run");
    let o = saddp(&with_small(&[
        "train", "--config", cfg.to_str().unwrap(), "--algo", "sad", "--eps", "3", "--out", out.to_str().unwrap(),
    ]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: String = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"algorithm\": \"sad\""));
    assert!(summary.contains("\"target_epsilon\": 3.0"));
    for seed in 0..2 {
        assert!(out.join(format!("metrics_seed{seed}.csv")).exists());
        let ckpt = fs::read(out.join(format!("model_seed{seed}.bin"))).unwrap();
        assert!(ckpt.starts_with(b"arch=4-0-3\n"));
    }
    assert!(!out.join("metrics_seed2.csv").exists());
}

#[test]
fn train_is_reproducible() {
    let args = with_small(&["train", "--seeds", "3"]);
    assert_eq!(stdout(&saddp(&args)), stdout(&saddp(&args)));
}

#[test]
fn sweep_table_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let o = saddp(&with_small(&[
        "sweep", "--grid", "beta=0.6,0.9", "--grid", "steps=2,3", "--seeds", "0", "--out", out.to_str().unwrap(),
    ]));
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("beta,steps,mean_acc,std_acc,mean_min_acc,eps,status,mode,privacy_caveat"));

    let bad = dir.path().join("bad");
    let o = saddp(&with_small(&["sweep", "--grid", "colour=1,2", "--out", bad.to_str().unwrap()]));
    assert_eq!(o.status.code(), Some(2));
    assert!(!Path::new(&bad).exists());

    let o = saddp(&with_small(&["sweep", "--grid", "eps=1e-9,3", "--seeds", "0"]));
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains(",failed,"));
}

#[test]
fn compare_rows_follow_eps_order() {
    let o = saddp(&with_small(&["compare", "--algo", "dpsgd,auto_s", "--eps", "8,3", "--seeds", "0", "--no-amplification"]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("eps,dpsgd,auto_s,mode,privacy_caveat"));
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("8,") || l.starts_with("3,")).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("8,") && rows[1].starts_with("3,"));
    assert!(rows[0].ends_with(",unamplified,auto_s"));
}

#[test]
fn account_reports_calibrated_spend() {
    let o = saddp(&["account", "--eps", "3", "--delta", "1e-3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let eps: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("epsilon="))
        .and_then(|l| l.split(' ').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((2.997..=3.0).contains(&eps));
    assert!(text.contains("# total=480"));

    let o = saddp(&["account", "--eps", "3", "--sigma", "1"]);
    assert_eq!(o.status.code(), Some(2));
}
