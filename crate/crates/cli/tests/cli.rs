use std::path::PathBuf;
use std::process::{Command, Output};

fn dlmnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlmnet"))
        .args(args)
        .env_remove("DLMNET_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn netlist(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "netlists", name]
        .iter()
        .collect();
    p.to_str().unwrap().to_string()
}

#[test]
fn oracle_truth_table() {
    let o = dlmnet(&["oracle", "cnot-circuit"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "qubit1,qubit2,p0,p1,p2,p3\n\
         0,0,1.000000,0.000000,0.000000,0.000000\n\
         1,0,0.000000,1.000000,0.000000,0.000000\n\
         0,1,0.000000,0.000000,0.000000,1.000000\n\
         1,1,0.000000,0.000000,1.000000,0.000000\n"
    );
}

#[test]
fn oracle_beam_splitter_quarter_turn() {
    let o = dlmnet(&["oracle", "bs", "--p0", "0.5", "--psi0", "90", "--psi1", "0"]);
    assert_eq!(
        stdout(&o).lines().nth(1).unwrap(),
        "0.500000,90.000000,0.000000,1.000000,0.000000"
    );
}

#[test]
fn line_counts() {
    let bs = dlmnet(&["bs", "--pairs", "1", "--events", "100"]);
    assert!(bs.status.success());
    assert_eq!(stdout(&bs).lines().count(), 2);
    let mzi = dlmnet(&["mzi", "--events", "100"]);
    assert_eq!(stdout(&mzi).lines().count(), 37);
    assert!(stdout(&mzi)
        .starts_with("label,phi0,phi1,psi0,n0,n1,n2,n3,f0,f1,f2,f3,p0,p1,p2,p3,deviation\n"));
}

#[test]
fn check_exit_codes() {
    let ok = dlmnet(&["cnot-circuit", "--warmup", "100", "--check", "0.01"]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    assert_eq!(stdout(&ok).lines().count(), 5);
    let bad = dlmnet(&["bs", "--pairs", "3", "--events", "100", "--check", "0"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("check failed"));
}

#[test]
fn config_errors_exit_with_2() {
    for args in [
        &["bs", "--alpha", "1.5"][..],
        &["bs", "--discard", "1"],
        &["bs", "--events", "0"],
        &["mzi", "--phi0-step", "0"],
        &["bs", "--no-such-flag"],
        &["run", "/nonexistent/net"],
        &["oracle", "bs", "--p0", "2"],
    ] {
        assert_eq!(dlmnet(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn netlist_errors_are_positioned() {
    let dir = std::env::temp_dir().join(format!("dlmnet-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.net");
    std::fs::write(
        &path,
        "source in 2\nproc bs beamsplitter\nwire in.0 -> bs.0\nwire bs.0 -> bs.0\n",
    )
    .unwrap();
    let o = dlmnet(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("line 4, column 6") && err.contains("cycle"),
        "{err}"
    );
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn run_netlist_and_out_file() {
    let net = netlist("mzi.net");
    let o = dlmnet(&["run", &net, "--events", "500"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "label,n0,f0");
    let labels: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(labels, ["n2", "n3", "n0", "n1"]);

    let dir = std::env::temp_dir().join(format!("dlmnet-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("r.csv");
    let o = dlmnet(&[
        "run",
        &net,
        "--events",
        "500",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn seed_from_environment() {
    let run = |env: Option<&str>, args: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_dlmnet"));
        c.args(["bs", "--pairs", "2", "--events", "300", "--stochastic"])
            .args(args);
        match env {
            Some(v) => c.env("DLMNET_SEED", v),
            None => c.env_remove("DLMNET_SEED"),
        };
        c.output().unwrap().stdout
    };
    let by_flag = run(None, &["--seed", "17"]);
    assert_eq!(run(Some("17"), &[]), by_flag);
    assert_eq!(run(Some("17"), &[]), run(Some("17"), &[]));
    assert_ne!(run(Some("18"), &[]), by_flag);
    assert_eq!(run(Some("18"), &["--seed", "17"]), by_flag);
}
