use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn coldrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coldrl")).args(args).env_remove("COLDRL_SOCKET").output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn small_zipf(dir: &Path, seed: &str) -> PathBuf {
    let out = dir.join(format!("zipf-{seed}.csv"));
    ok(&coldrl(&[
        "--seed",
        seed,
        "gen",
        "zipf",
        "--out",
        out.to_str().unwrap(),
        "--param",
        "n_keys=400",
        "--param",
        "n_requests=4000",
        "--param",
        "size_max=65536",
    ]));
    out
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(coldrl(&[]).status.code(), Some(2));
    assert_eq!(coldrl(&["compare", "--bogus"]).status.code(), Some(2));
    assert_eq!(coldrl(&["compare", "--trace", "/nonexistent/t.csv"]).status.code(), Some(3));
    let trace = small_zipf(dir.path(), "1");
    let t = trace.to_str().unwrap();
    assert_eq!(coldrl(&["compare", "--trace", t, "--capacities", "lots"]).status.code(), Some(2));
    assert_eq!(coldrl(&["compare", "--trace", t, "--policies", "lru,coldrl"]).status.code(), Some(2));
    let garbage = dir.path().join("garbage.crlm");
    std::fs::write(&garbage, b"not a model").unwrap();
    let out = coldrl(&["compare", "--trace", t, "--policies", "coldrl", "--model", garbage.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let out = coldrl(&["--socket", "/nonexistent/dir/s.sock", "serve", "--model", garbage.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn serve_on_unbindable_socket_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let trace = small_zipf(dir.path(), "2");
    let model = dir.path().join("m.crlm");
    ok(&coldrl(&[
        "train", "--trace", trace.to_str().unwrap(), "--capacity", "10%", "--out", model.to_str().unwrap(),
        "--iterations", "1", "--epochs", "1",
    ]));
    let out = coldrl(&["--socket", "/nonexistent/dir/s.sock", "serve", "--model", model.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn lru_only_report_has_one_row_and_no_improvement() {
    let dir = TempDir::new().unwrap();
    let trace = small_zipf(dir.path(), "3");
    let out = ok(&coldrl(&["--format", "json", "compare", "--trace", trace.to_str().unwrap(), "--policies", "lru", "--capacities", "10%"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
    assert!(v["improvements"].as_array().unwrap().is_empty());
    let table = ok(&coldrl(&["compare", "--trace", trace.to_str().unwrap(), "--policies", "lru", "--capacities", "10%"]));
    assert!(!table.contains("improvement vs best classical"));
}

#[test]
fn renderings_carry_identical_numbers() {
    let dir = TempDir::new().unwrap();
    let trace = small_zipf(dir.path(), "4");
    let t = trace.to_str().unwrap();
    let args = |fmt: &'static str| {
        vec!["--format", fmt, "compare", "--trace", t, "--policies", "lru,lfu,size", "--capacities", "5%,20%"]
    };
    let json: serde_json::Value = serde_json::from_str(&ok(&coldrl(&args("json")))).unwrap();
    let csv = ok(&coldrl(&args("csv")));
    let table = ok(&coldrl(&args("table")));
    for row in json["rows"].as_array().unwrap() {
        let (policy, cap) = (row["policy"].as_str().unwrap(), row["capacity"].as_u64().unwrap());
        let (hit, bhr) = (row["hit_ratio"].as_f64().unwrap(), row["byte_hit_ratio"].as_f64().unwrap());
        let evictions = row["evictions"].as_u64().unwrap();
        let csv_line = csv
            .lines()
            .find(|l| l.starts_with(&format!("result,{policy},{cap},")))
            .unwrap_or_else(|| panic!("no csv row for {policy} {cap}"));
        let f: Vec<&str> = csv_line.split(',').collect();
        assert_eq!(f[3].parse::<f64>().unwrap(), hit);
        assert_eq!(f[4].parse::<f64>().unwrap(), bhr);
        assert_eq!(f[5].parse::<u64>().unwrap(), evictions);
        let table_line = table
            .lines()
            .find(|l| l.split_whitespace().take(2).eq([policy, cap.to_string().as_str()]))
            .unwrap_or_else(|| panic!("no table row for {policy} {cap}"));
        let cols: Vec<&str> = table_line.split_whitespace().collect();
        assert_eq!(cols[2].parse::<f64>().unwrap(), hit);
        assert_eq!(cols[3].parse::<f64>().unwrap(), bhr);
        assert_eq!(cols[4].parse::<u64>().unwrap(), evictions);
    }
}

#[test]
fn train_refuses_capacity_without_evictions() {
    let dir = TempDir::new().unwrap();
    let trace = small_zipf(dir.path(), "5");
    let out = coldrl(&[
        "train", "--trace", trace.to_str().unwrap(), "--capacity", "10GB", "--out", dir.path().join("m.crlm").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no evictions") && err.contains("capacity"), "{err}");
    assert!(!dir.path().join("m.crlm").exists());
}

#[test]
fn pure_lru_behavior_data_still_trains_and_retrains_identically() {
    let dir = TempDir::new().unwrap();
    let trace = small_zipf(dir.path(), "6");
    let train = |name: &str| {
        let out = dir.path().join(name);
        let text = ok(&coldrl(&[
            "--seed", "9", "train", "--trace", trace.to_str().unwrap(), "--capacity", "10%", "--out",
            out.to_str().unwrap(), "--iterations", "1", "--epsilon", "1.0", "--epochs", "3",
        ]));
        assert!(text.contains("final loss"), "{text}");
        std::fs::read(out).unwrap()
    };
    let a = train("a.crlm");
    assert_eq!(a, train("b.crlm"));
    assert_eq!(&a[..4], b"CRLM");
}

#[test]
fn gen_is_deterministic_per_seed() {
    let (dir, other) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let a = std::fs::read(small_zipf(dir.path(), "7")).unwrap();
    let b = std::fs::read(small_zipf(other.path(), "7")).unwrap();
    let c = std::fs::read(small_zipf(dir.path(), "8")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn socket_precedence_flag_env_config() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("lab.conf");
    std::fs::write(&config, "# bench\nsocket = /tmp/from-config.sock\nrequests = 5\ndeadline-us = 200\n").unwrap();
    let socket_of = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_coldrl"));
        cmd.args(["--format", "json", "--config", config.to_str().unwrap()]).args(extra).arg("bench-latency");
        match env {
            Some(e) => cmd.env("COLDRL_SOCKET", e),
            None => cmd.env_remove("COLDRL_SOCKET"),
        };
        let v: serde_json::Value = serde_json::from_str(&ok(&cmd.output().unwrap())).unwrap();
        assert_eq!(v["deadline_us"], 200);
        assert_eq!(v["rows"][0]["decisions"], 5);
        assert_eq!(v["rows"][0]["fallback_rate"], 1.0);
        v["socket"].as_str().unwrap().to_string()
    };
    assert_eq!(socket_of(&[], None), "/tmp/from-config.sock");
    assert_eq!(socket_of(&[], Some("/tmp/from-env.sock")), "/tmp/from-env.sock");
    assert_eq!(socket_of(&["--socket", "/tmp/from-flag.sock"], Some("/tmp/from-env.sock")), "/tmp/from-flag.sock");
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "colour = blue\n").unwrap();
    assert_eq!(coldrl(&["--config", config.to_str().unwrap(), "bench-latency"]).status.code(), Some(2));
}
