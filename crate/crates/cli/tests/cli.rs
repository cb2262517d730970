use std::process::{Command, Output};

fn isbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isbound"))
        .args(args)
        .env_remove("ISBOUND_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn table2_csv_has_the_documented_schema() {
    let o = isbound(&["table2"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "row_label,metric,divergence,divergence_method,divergence_stderr,threshold,necessary_n_integer,epsilon,delta,seed"
    );
    assert!(out.contains("m=2,kl,2,closed_form,,5.11,6,0.1,0.1,1"));
    assert!(out.contains("m=3.5,hellinger,"));
    assert_eq!(out.lines().count(), 17);
}

#[test]
fn infinite_chi2_renders_as_dashes_and_null() {
    let csv = stdout(&isbound(&["table3", "--metric", "chi2"]));
    let row = csv.lines().find(|l| l.starts_with("sigma2=16,")).unwrap();
    assert_eq!(row, "sigma2=16,chi2,---,closed_form,,---,---,0.1,0.1,1");
    let json: serde_json::Value = serde_json::from_str(&stdout(&isbound(&["table3", "--metric", "chi2", "--format", "json"]))).unwrap();
    let rows = json["rows"].as_array().unwrap();
    let inf = rows.iter().find(|r| r["row_label"] == "sigma2=25").unwrap();
    assert!(inf["divergence"].is_null() && inf["threshold"].is_null() && inf["necessary_n_integer"].is_null());
    let fin = rows.iter().find(|r| r["row_label"] == "sigma2=1e-4").unwrap();
    assert_eq!(fin["threshold"].as_f64().unwrap(), 58.52);
    assert!((fin["threshold_exact"].as_f64().unwrap() - 58.5226).abs() < 1e-3);
    assert_eq!(json["config"]["metric"], "chi2");
    assert_eq!(json["config"]["command"], "table3");
}

#[test]
fn output_is_byte_stable() {
    let args = ["table2", "--method", "mc", "--mc-samples", "200000", "--seed", "42"];
    let a = isbound(&args);
    let b = isbound(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = isbound(&["table2", "--method", "monte-carlo", "--mc-samples", "200000", "--seed", "43"]);
    assert_ne!(a.stdout, c.stdout);
    let breakdown = ["breakdown", "--target-mean", "1", "--particles", "50", "--replicates", "200", "--seed", "5"];
    assert_eq!(isbound(&breakdown).stdout, isbound(&breakdown).stdout);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t2.csv");
    let o = isbound(&["table2", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), isbound(&["table2"]).stdout);
}

#[test]
fn config_errors_exit_two() {
    for args in [
        vec!["bounds", "--target-var", "0"],
        vec!["table2", "--eps", "-0.1"],
        vec!["table2", "--delta", "0"],
        vec!["ess", "--particles", "0"],
        vec!["breakdown", "--replicates", "0"],
        vec!["table2", "--metric", "bogus"],
        vec!["nonsense"],
        vec!["breakdown", "--target-var", "4", "--metric", "chi2"],
        vec!["table2", "--method", "mc", "--mc-samples", "1"],
    ] {
        let o = isbound(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = isbound(&["breakdown", "--target-var", "4", "--metric", "chi2"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("infinite"));
}

#[test]
fn numerical_failure_exits_one() {
    // Every particle lands where the target density underflows to zero.
    let o = isbound(&["ess", "--proposal-var", "1e300", "--particles", "5"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn seed_flag_beats_environment() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_isbound"));
        cmd.args(["ess", "--target-mean", "1"]);
        cmd.env_remove("ISBOUND_SEED");
        if let Some(e) = env {
            cmd.env("ISBOUND_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        cmd.output().unwrap().stdout
    };
    assert_eq!(run(Some("7"), None), run(None, Some("7")));
    assert_eq!(run(Some("7"), Some("9")), run(None, Some("9")));
    assert_ne!(run(Some("7"), None), run(None, None));
}

#[test]
fn breakdown_reports_threshold_comparison() {
    let out = stdout(&isbound(&[
        "breakdown",
        "--target-mean",
        "3",
        "--metric",
        "kl",
        "--particles",
        "25",
        "--replicates",
        "300",
    ]));
    let row = out.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[0], "kl");
    assert_eq!(fields[2], "49.63");
    assert_eq!(fields[4], "true");
    let frequency: f64 = fields[7].parse().unwrap();
    assert!(frequency >= 0.5);
}

#[test]
fn table1_reports_deviation() {
    let out = stdout(&isbound(&["table1", "--n-values", "1,4,10", "--eps-values", "0,0.1"]));
    assert!(out.starts_with("metric,n,epsilon,generic,symbolic,abs_deviation\n"));
    assert!(out.contains("tv,10,0.1,0.95,"));
    assert!(out.contains("hellinger,4,0.0,1.0,1.0,0.0") || out.contains("hellinger,4,0,1,1,0"));
    assert_eq!(out.lines().count(), 1 + 4 * 3 * 2);
}

#[test]
fn quadrature_and_ess_commands_run() {
    let o = isbound(&["bounds", "--target-mean", "2", "--method", "quadrature", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
    assert_eq!(json["rows"][0]["divergence_method"], "quadrature");
    let ess = stdout(&isbound(&["ess"]));
    assert_eq!(ess.lines().next().unwrap(), "n_particles,total_mass,ess_kl,ess_chi2,seed");
}
