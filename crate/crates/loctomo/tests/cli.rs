//! End-to-end checks of the command line binary: exit codes, file round
//! trips, reproducibility, and the tiling worker contract.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_loctomo"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary spawns")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout_lines(out: &Output) -> Vec<String> {
    String::from_utf8_lossy(&out.stdout).lines().map(|s| s.to_string()).collect()
}

fn simulate(dir: &Path, seed: u64) -> Output {
    run(
        &[
            "simulate",
            "--phantom",
            "shepp-logan",
            "--n",
            "32",
            "--angles",
            "24",
            "--detectors",
            "48",
            "--supersample",
            "2",
            "--i0",
            "10000",
            "--seed",
            &seed.to_string(),
            "--out",
            dir.to_str().unwrap(),
        ],
        &[],
    )
}

#[test]
fn round_trip_simulate_filters_reconstruct_score() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let out = simulate(dir, 3);
    assert_eq!(code(&out), 0, "simulate: {}", String::from_utf8_lossy(&out.stderr));
    for f in ["phantom.ltrg", "truth.ltrg", "sino.ltsg"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }

    let bank = dir.join("bank.ltfb");
    let out = run(
        &[
            "filters",
            "--angles",
            "24",
            "--detectors",
            "48",
            "--grid",
            "32",
            "--iterations",
            "20",
            "--out",
            bank.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "filters: {}", String::from_utf8_lossy(&out.stderr));

    let sino = dir.join("sino.ltsg");
    let recon = dir.join("recon.ltrg");
    let out = run(
        &[
            "reconstruct",
            "--sino",
            sino.to_str().unwrap(),
            "--grid",
            "32",
            "--method",
            "sirt",
            "--iterations",
            "20",
            "--out",
            recon.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "reconstruct: {}", String::from_utf8_lossy(&out.stderr));

    let truth = dir.join("truth.ltrg");
    let out = run(
        &["score", "--recon", recon.to_str().unwrap(), "--truth", truth.to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&out), 0);
    let lines = stdout_lines(&out);
    assert_eq!(lines[0], "mse,ssim");
    let fields: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert!(fields[0].is_finite() && fields[0] > 0.0, "mse {}", fields[0]);
    assert!((-1.0..=1.0).contains(&fields[1]), "ssim {}", fields[1]);

    // a local solve of a sub-window, scored on the same window
    let local = dir.join("local.ltrg");
    let out = run(
        &[
            "reconstruct",
            "--sino",
            sino.to_str().unwrap(),
            "--grid",
            "32",
            "--method",
            "fista-tv",
            "--iterations",
            "20",
            "--lambda",
            "0.001",
            "--fgp-iterations",
            "20",
            "--local",
            "8,8,16",
            "--bank",
            bank.to_str().unwrap(),
            "--out",
            local.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "local: {}", String::from_utf8_lossy(&out.stderr));
    let out = run(
        &[
            "score",
            "--recon",
            local.to_str().unwrap(),
            "--truth",
            truth.to_str().unwrap(),
            "--region",
            "8,8,16",
        ],
        &[],
    );
    assert_eq!(code(&out), 0);
}

#[test]
fn tiling_workers_do_not_change_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&simulate(dir, 5)), 0);

    let bank = dir.join("bank.ltfb");
    let out = run(
        &[
            "filters",
            "--angles",
            "24",
            "--detectors",
            "48",
            "--grid",
            "32",
            "--iterations",
            "10",
            "--out",
            bank.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0);

    let sino = dir.join("sino.ltsg");
    let mut outputs = Vec::new();
    for (name, workers, envs) in [
        ("t1.ltrg", Some("1"), vec![]),
        ("t2.ltrg", Some("2"), vec![]),
        ("t3.ltrg", None, vec![("LOCTOMO_THREADS", "2")]),
    ] {
        let path = dir.join(name);
        let path_str = path.to_str().unwrap().to_string();
        let mut args: Vec<&str> = vec![
            "reconstruct",
            "--sino",
            sino.to_str().unwrap(),
            "--grid",
            "32",
            "--method",
            "sirt",
            "--iterations",
            "10",
            "--tile",
            "16",
            "--bank",
            bank.to_str().unwrap(),
            "--out",
            &path_str,
        ];
        if let Some(w) = workers {
            args.push("--workers");
            args.push(w);
        }
        let out = run(&args, &envs);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "worker count changed the output");
    assert_eq!(outputs[0], outputs[2], "env worker cap changed the output");
}

#[test]
fn pgm_export_writes_p5() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&simulate(dir, 9)), 0);
    let out = run(
        &[
            "reconstruct",
            "--sino",
            dir.join("sino.ltsg").to_str().unwrap(),
            "--grid",
            "32",
            "--method",
            "fbp",
            "--out",
            dir.join("fbp.ltrg").to_str().unwrap(),
            "--pgm",
            dir.join("fbp.pgm").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pgm = std::fs::read(dir.join("fbp.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n32 32\n65535\n"));
    assert_eq!(pgm.len(), b"P5\n32 32\n65535\n".len() + 2 * 32 * 32);
}

#[test]
fn simulate_is_seed_reproducible() {
    let t1 = tempfile::tempdir().unwrap();
    let t2 = tempfile::tempdir().unwrap();
    let t3 = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(t1.path(), 42)), 0);
    assert_eq!(code(&simulate(t2.path(), 42)), 0);
    assert_eq!(code(&simulate(t3.path(), 43)), 0);
    let a = std::fs::read(t1.path().join("sino.ltsg")).unwrap();
    let b = std::fs::read(t2.path().join("sino.ltsg")).unwrap();
    let c = std::fs::read(t3.path().join("sino.ltsg")).unwrap();
    assert_eq!(a, b, "same seed must reproduce bytes");
    assert_ne!(a, c, "different seed must change the noise");
}

#[test]
fn usage_errors_exit_with_two() {
    // missing input file, named in the message
    let out = run(
        &[
            "reconstruct",
            "--sino",
            "/nonexistent/p.ltsg",
            "--grid",
            "32",
            "--method",
            "sirt",
            "--out",
            "/tmp/x.ltrg",
        ],
        &[],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/p.ltsg"));

    // fbp cannot run tiled
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(tmp.path(), 1)), 0);
    let out = run(
        &[
            "reconstruct",
            "--sino",
            tmp.path().join("sino.ltsg").to_str().unwrap(),
            "--grid",
            "32",
            "--method",
            "fbp",
            "--tile",
            "16",
            "--out",
            "/tmp/x.ltrg",
        ],
        &[],
    );
    assert_eq!(code(&out), 2);

    // clap rejects unknown subcommands with its own usage exit
    let out = run(&["transmogrify"], &[]);
    assert_eq!(code(&out), 2);

    // validation failures inside the library surface as usage errors
    let out = run(
        &[
            "simulate",
            "--n",
            "32",
            "--angles",
            "24",
            "--detectors",
            "48",
            "--supersample",
            "0",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn runtime_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(tmp.path(), 2)), 0);
    // /dev/null is not a directory, so the write must fail after a valid solve
    let out = run(
        &[
            "reconstruct",
            "--sino",
            tmp.path().join("sino.ltsg").to_str().unwrap(),
            "--grid",
            "32",
            "--method",
            "fbp",
            "--out",
            "/dev/null/recon.ltrg",
        ],
        &[],
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn sweep_prints_one_row_per_evaluation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&simulate(dir, 8)), 0);
    let out = run(
        &[
            "sweep",
            "--sino",
            dir.join("sino.ltsg").to_str().unwrap(),
            "--truth",
            dir.join("truth.ltrg").to_str().unwrap(),
            "--grid",
            "32",
            "--method",
            "fista-tv",
            "--iterations",
            "10",
            "--fgp-iterations",
            "10",
            "--low",
            "1e-5",
            "--high",
            "1e-1",
            "--budget",
            "4",
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let lines = stdout_lines(&out);
    assert_eq!(lines[0], "lambda,mse,ssim");
    assert_eq!(lines.len(), 1 + 4 + 1, "header, one row per evaluation, best row");
    for line in &lines[1..] {
        let fields: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(fields.len(), 3);
        assert!(fields.iter().all(|v| v.is_finite()));
    }
}
