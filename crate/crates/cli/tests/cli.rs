use std::path::Path;
use std::process::{Command, Output};

fn blindcfo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blindcfo")).args(args).output().unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, "k = 2\np = 4\nn = [256, 512]\nsnr_db = 20\nn_channels = 3\nn_mc = 2\nseed = 4\n").unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn sweep_writes_csv_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let csv = dir.path().join("out.csv");
    let plot = dir.path().join("out.dat");
    let out = blindcfo(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        csv.to_str().unwrap(),
        "--plot",
        plot.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "method,K,P,N,snr_db,channel_id,mc_id,user,f_true,f_hat,mse_cfo,ber,crb_f,flags");
    assert_eq!(lines.count(), 2 * 3 * 2 * 2);
    let plot_text = std::fs::read_to_string(&plot).unwrap();
    assert_eq!(plot_text.lines().filter(|l| !l.starts_with('#')).count(), 2);
}

#[test]
fn seed_flag_overrides_config_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let a = blindcfo(&["sweep", "--config", &cfg, "--seed", "9"]);
    let b = blindcfo(&["sweep", "--config", &cfg, "--seed", "9", "--threads", "1"]);
    let c = blindcfo(&["sweep", "--config", &cfg]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn simulate_dumps_one_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = blindcfo(&["simulate", "--config", &cfg, "--channel", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["f_true", "f_hat", "crb_f", "mse_cfo", "ber", "flags"] {
        assert!(text.lines().any(|l| l.starts_with(key)), "missing {key}:\n{text}");
    }
}

#[test]
fn crb_table_has_a_row_per_channel_and_user() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = blindcfo(&["crb", "--config", &cfg]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3 * 2);
    let bound: f64 = text.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(bound > 0.0);
}

#[test]
fn bad_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "k = 2\nunknown_key = 3\n").unwrap();
    let out = blindcfo(&["sweep", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
