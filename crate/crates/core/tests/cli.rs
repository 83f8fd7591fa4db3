use std::path::Path;
use std::process::Command;

fn run(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_zeroshape"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn zeros_for_published_case() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["zeros", "--fixture", "case1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = read(&dir.path().join("zeros.csv"));
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "index,sigma,lambda_re,lambda_im,z_rad_s,is_nmp,residual,oracle_z_rad_s,oracle_agrees"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let dominant = rows.iter().filter_map(|r| r[4].parse::<f64>().ok()).fold(f64::INFINITY, f64::min);
    assert!((dominant - 343.115).abs() < 0.01, "{dominant}");
    let last = rows.last().unwrap();
    assert_eq!(last[8], "true");
}

#[test]
fn droop_writes_oracle_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["zeros", "--fixture", "case3", "--droop", "1=10"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = read(&dir.path().join("zeros_droop.csv"));
    let first: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    // Droop at node 1 lifts the 342.77 rad/s zero slightly.
    assert!(first > 342.78 && first < 345.0, "{first}");
}

#[test]
fn rank_orders_case3_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["rank", "--fixture", "case3"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&read(&dir.path().join("rank.json"))).unwrap();
    assert_eq!(v["ranking"], serde_json::json!(["3", "2", "1"]));
    assert_eq!(v["passivity_gate"], serde_json::json!(true));
    assert_eq!(v["nodes"].as_array().unwrap().len(), 3);
    assert!(v["S_sys"][0].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_random_fixture_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify", "--fixture", "random-seed-42"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v: serde_json::Value = serde_json::from_str(&read(&dir.path().join("verify.json"))).unwrap();
    assert_eq!(v["passed"], serde_json::json!(true));
}

#[test]
fn verify_failure_exits_three_with_replay() {
    let dir = tempfile::tempdir().unwrap();
    // An absurd tolerance makes the route checks fail.
    let out = run(&["verify", "--fixture", "random-seed-42", "--tol-rel", "1e-30"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("random-seed-42"), "{stderr}");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        assert_eq!(run(&["zeros", "--fixture", "case2"], dir).status.code(), Some(0));
        assert_eq!(run(&["sweep", "--fixture", "didactic:z=40,kp=5,ki=50"], dir).status.code(), Some(0));
        assert_eq!(run(&["rank", "--fixture", "case2", "--format", "json"], dir).status.code(), Some(0));
    }
    for name in ["zeros.csv", "sweep.csv", "rank.json"] {
        assert_eq!(read(&a.path().join(name)), read(&b.path().join(name)), "{name}");
    }
}

#[test]
fn bound_report_for_didactic_system() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["bound", "--fixture", "didactic:z=60,kp=5,ki=50"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&read(&dir.path().join("bound.json"))).unwrap();
    for key in ["omega_c", "M_T", "bound_mimo", "bound_scalar", "lhs_integral", "rhs_integral", "truncation_est"] {
        assert!(v[key].is_number(), "{key}: {v}");
    }
}

#[test]
fn sweep_and_nyquist_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let fx = "didactic:z=40,kp=5,ki=50";
    assert_eq!(run(&["sweep", "--fixture", fx, "--grid-points", "50"], dir.path()).status.code(), Some(0));
    assert_eq!(run(&["nyquist", "--fixture", fx, "--grid-points", "50"], dir.path()).status.code(), Some(0));
    let sweep = read(&dir.path().join("sweep.csv"));
    assert_eq!(sweep.lines().next().unwrap(), "omega_rad_s,sigma_max_T,ln_sigma_over_w2");
    assert_eq!(sweep.lines().count(), 51);
    let ny = read(&dir.path().join("nyquist.csv"));
    assert_eq!(ny.lines().next().unwrap(), "omega_rad_s,locus_index,re,im");
    assert_eq!(ny.lines().count(), 101);
}

#[test]
fn reduce_from_line_data_and_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["reduce", "--fixture", "ieee9-lines", "--format", "json"], dir.path()).status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&read(&dir.path().join("B_r.json"))).unwrap();
    assert_eq!(v["node_order"], serde_json::json!(["1", "2", "3"]));

    let network = dir.path().join("net.json");
    std::fs::write(
        &network,
        r#"{"omega0_rad_s": 314.1592653589793,
            "buses": [{"id": "a", "role": "converter"}, {"id": "m", "role": "interior"}, {"id": "b", "role": "converter"}],
            "branches": [{"from": "a", "to": "m", "x_pu": 1.0}, {"from": "m", "to": "b", "x_pu": 1.0}]}"#,
    )
    .unwrap();
    let net = network.to_str().unwrap();
    assert_eq!(run(&["reduce", "--network", net], dir.path()).status.code(), Some(0));
    let csv = read(&dir.path().join("B_r.csv"));
    assert_eq!(csv.lines().nth(1).unwrap(), "a,5.0000000000000000e-1,-5.0000000000000000e-1");
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["zeros", "--fixture", "nope"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["zeros"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["rank", "--fixture", "case3", "--droop", "9=1"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--fixture", "case3"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["zeros", "--fixture", "case3", "--grid-min", "5", "--grid-max", "1"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(1));
}

#[test]
fn numerical_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // Two identical decoupled converters give a double zero: participation is undefined.
    let network = dir.path().join("net.json");
    let op = dir.path().join("op.json");
    std::fs::write(
        &network,
        r#"{"omega0_rad_s": 314.1592653589793, "buses": [], "branches": [],
            "B_r": [[1.0, 0.0], [0.0, 1.0]], "node_order": ["1", "2"]}"#,
    )
    .unwrap();
    std::fs::write(
        &op,
        r#"{"converters": [
            {"bus": "1", "U_pu": 1.0, "theta_rad": 0.0, "P_pu": 0.5, "Q_pu": 0.0},
            {"bus": "2", "U_pu": 1.0, "theta_rad": 0.0, "P_pu": 0.5, "Q_pu": 0.0}]}"#,
    )
    .unwrap();
    let out = run(&["rank", "--network", network.to_str().unwrap(), "--op", op.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn device_model_drives_network_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let device = dir.path().join("device.json");
    // Each converter: diag(100/s, 100/s) as the device Jacobian.
    let entry = |bus: &str| {
        format!(
            r#"{{"bus": "{bus}", "J": [[{{"num": [100.0], "den": [0.0, 1.0]}}, {{"num": [0.0], "den": [1.0]}}],
                                        [{{"num": [0.0], "den": [1.0]}}, {{"num": [100.0], "den": [0.0, 1.0]}}]]}}"#
        )
    };
    std::fs::write(&device, format!(r#"{{"converters": [{}, {}, {}]}}"#, entry("1"), entry("2"), entry("3"))).unwrap();
    let dev = device.to_str().unwrap();
    let out = run(&["sweep", "--fixture", "case3", "--device", dev, "--grid-min", "1", "--grid-max", "1e4", "--grid-points", "200"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&dir.path().join("sweep.csv")).lines().count(), 201);
}
