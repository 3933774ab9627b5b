//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use noisy_qae::circuit::{
    build_sum_circuit, check_circuit, random_circuit, verify_ancillary_identity,
};
use noisy_qae::fisher::QueryAccounting;
use noisy_qae::fisher::{crlb_theta, fisher_matrix_amplitudes, fisher_orthogonalized};
use noisy_qae::harness::{compare_fits, log_log_slope, ExperimentConfig, FitC};
use noisy_qae::likelihood::EstimatorConfig;
use noisy_qae::model::Schedule;
use noisy_qae::ortho::{beta_from_c, c_from_beta, ode_residual, oscillation_factors, OrthoParams};
use noisy_qae::sampling::TrueModelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Check = Box<dyn Fn() -> Outcome>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(elapsed: Duration, limit_secs: u64) -> (bool, String) {
    (
        elapsed <= Duration::from_secs(limit_secs),
        format!("{:.2}s of {limit_secs}s", elapsed.as_secs_f64()),
    )
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_noisy-qae"))
        .args(args)
        .env_remove("NOISY_QAE_THREADS")
        .output()
        .expect("binary runs")
}

struct Row {
    n_queries: f64,
    rmse: f64,
    crlb_model: f64,
    crlb_classical: f64,
}

fn read_curve(path: &Path) -> Vec<Row> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            Row {
                n_queries: f[1],
                rmse: f[2],
                crlb_model: f[3],
                crlb_classical: f[4],
            }
        })
        .collect()
}

fn campaign(name: &str, dir: &Path) -> Result<Vec<Row>, String> {
    let out = cli(&[
        "campaign",
        configs().join(name).to_str().unwrap(),
        "--output",
        dir.to_str().unwrap(),
    ]);
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    Ok(read_curve(&dir.join("error_curve.csv")))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let circuits = [
        build_sum_circuit(
            1,
            &[0.0, (std::f64::consts::PI / 10.0).sin().powi(2)],
            &[0.5, 0.5],
        )
        .unwrap(),
        random_circuit(1, 2024).unwrap(),
    ];
    let mut worst = 0.0f64;
    for circuit in &circuits {
        for lambda in [0.0, 0.01, 0.05] {
            let r = check_circuit(circuit, lambda, 16).unwrap();
            worst = worst.max(r.grover_residual).max(r.ancillary_residual);
        }
    }
    let (fast, time) = within(start.elapsed(), 5);
    Outcome {
        pass: worst < 1e-10 && fast,
        detail: format!("max |analytic - simulated| = {worst:.2e} (< 1e-10), {time}"),
    }
}

fn ancillary_identity() -> Outcome {
    let start = Instant::now();
    let circuits = [
        build_sum_circuit(
            1,
            &[0.0, (std::f64::consts::PI / 10.0).sin().powi(2)],
            &[0.5, 0.5],
        )
        .unwrap(),
        random_circuit(1, 2024).unwrap(),
        random_circuit(3, 7).unwrap(),
    ];
    let mut worst = 0.0f64;
    for circuit in &circuits {
        for m in 2..=16 {
            worst = worst.max(verify_ancillary_identity(circuit, m).unwrap());
        }
    }
    let (fast, time) = within(start.elapsed(), 5);
    Outcome {
        pass: worst < 1e-12 && fast,
        detail: format!("max residual {worst:.2e} (< 1e-12) for m = 2..16, {time}"),
    }
}

/// Random `(theta, c, schedule)` with every slot away from degenerate points.
fn draws(count: usize) -> Vec<(f64, OrthoParams, Schedule)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let theta = rng.random_range(0.02..1.55);
        let len = rng.random_range(1..=10);
        let m: Vec<u32> = (0..len).map(|_| rng.random_range(1..=64)).collect();
        let n = rng.random_range(10..=200);
        let ok = m.iter().all(|&m| {
            let f = oscillation_factors(theta, m).unwrap();
            f.a_p.min(f.a_q) > 1e-3
        });
        if !ok {
            continue;
        }
        let c: Vec<f64> = (0..len).map(|_| rng.random_range(0.02..0.98)).collect();
        out.push((
            theta,
            OrthoParams::new(c).unwrap(),
            Schedule::new(m, n, n).unwrap(),
        ));
    }
    out
}

fn orthogonality() -> Outcome {
    let points = draws(100);
    let start = Instant::now();
    let worst = points
        .iter()
        .map(|(theta, c, s)| {
            fisher_orthogonalized(*theta, c, s)
                .unwrap()
                .max_normalized_coupling()
        })
        .fold(0.0, f64::max);
    let (fast, time) = within(start.elapsed(), 1);
    Outcome {
        pass: worst < 1e-8 && fast,
        detail: format!("max normalized coupling {worst:.2e} (< 1e-8) over 100 draws, {time}"),
    }
}

fn crlb_invariance() -> Outcome {
    let (mut reparam, mut paths) = (0.0f64, 0.0f64);
    for (theta, c, s) in draws(100) {
        let beta: Vec<f64> = s
            .powers()
            .iter()
            .zip(c.as_slice())
            .map(|(&m, &ck)| beta_from_c(theta, ck, m).unwrap().beta)
            .collect();
        let j = fisher_matrix_amplitudes(theta, &beta, &s).unwrap();
        let jx = fisher_orthogonalized(theta, &c, &s).unwrap();
        let original = crlb_theta(&j).unwrap();
        let orthogonal = crlb_theta(&jx).unwrap();
        let dense = crlb_theta(&j.to_dense()).unwrap();
        reparam = reparam.max((original - orthogonal).abs() / original);
        paths = paths.max((original - dense).abs() / original);
    }
    Outcome {
        pass: reparam < 1e-8 && paths < 1e-10,
        detail: format!(
            "reparametrization {reparam:.2e} (< 1e-8), Schur vs dense {paths:.2e} (< 1e-10)"
        ),
    }
}

fn roundtrip_and_ode() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut roundtrip, mut ode) = (0.0f64, 0.0f64);
    let mut n = 0;
    while n < 1000 {
        let theta = rng.random_range(0.01..1.56);
        let m = rng.random_range(1..200);
        let c = rng.random_range(0.01..0.99);
        let f = oscillation_factors(theta, m).unwrap();
        if f.a_p + f.a_q < 1e-6 {
            continue;
        }
        let beta = beta_from_c(theta, c, m).unwrap().beta;
        roundtrip = roundtrip.max((c_from_beta(theta, beta, m).unwrap() - c).abs());
        ode = ode.max(ode_residual(theta, c, m).unwrap());
        n += 1;
    }
    Outcome {
        pass: roundtrip < 1e-10 && ode < 1e-9,
        detail: format!(
            "roundtrip {roundtrip:.2e} (< 1e-10), ODE residual {ode:.2e} (< 1e-9) at 1000 points"
        ),
    }
}

fn landscape_agreement() -> Outcome {
    let start = Instant::now();
    let case_1 =
        OrthoParams::new(vec![0.844, 0.134, 0.956, 0.238, 0.236, 0.623, 0.793, 0.324]).unwrap();
    let case_2 =
        OrthoParams::new(vec![0.571, 0.452, 0.475, 0.259, 0.107, 0.965, 0.362, 0.522]).unwrap();
    let mut good = 0;
    for seed in 0..100u64 {
        let config = ExperimentConfig {
            true_model: TrueModelSpec::depolarizing(0.35, 0.01).unwrap(),
            fit_c: FitC::Fixed(case_1.clone()),
            schedule: Schedule::exponential(8, 50, 50).unwrap(),
            trials: 1,
            master_seed: seed,
            estimator: EstimatorConfig::default(),
            query_accounting: QueryAccounting::GroverOnly,
        };
        let (a, b) = compare_fits(&config, &case_1, &case_2).unwrap()[0];
        if (a.theta_hat - b.theta_hat).abs() < 1e-3
            && (a.theta_hat - 0.35).abs() < 0.02
            && (b.theta_hat - 0.35).abs() < 0.02
        {
            good += 1;
        }
    }
    let (fast, time) = within(start.elapsed(), 120);
    Outcome {
        pass: good >= 95 && fast,
        detail: format!(
            "{good}/100 seeds agree within 1e-3 and lie within 0.02 of 0.35 (need 95), {time}"
        ),
    }
}

fn rmse_vs_crlb(dir: &Path) -> Outcome {
    let start = Instant::now();
    let rows = match campaign("depolarizing.json", dir) {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: e,
            }
        }
    };
    let last = rows.last().unwrap();
    let ratio = last.rmse / last.crlb_model.sqrt();
    let tail = &rows[rows.len() - 4..];
    let monotone = tail.windows(2).all(|w| w[1].rmse <= w[0].rmse);
    let beats = tail.iter().all(|r| r.crlb_model < r.crlb_classical);
    let (fast, time) = within(start.elapsed(), 600);
    let trend: Vec<String> = tail.iter().map(|r| format!("{:.2e}", r.rmse)).collect();
    Outcome {
        pass: (0.8..=1.5).contains(&ratio) && monotone && beats && fast,
        detail: format!(
            "RMSE/sqrt(CRLB) = {ratio:.3} (in [0.8, 1.5]), last four RMSE [{}] non-increasing: {monotone}, model CRLB below classical: {beats}, {time}",
            trend.join(", ")
        ),
    }
}

fn scaling(dir: &Path) -> Outcome {
    let start = Instant::now();
    let rows = match campaign("noiseless.json", dir) {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: e,
            }
        }
    };
    let tail = &rows[rows.len() - 4..];
    let rmse: Vec<(f64, f64)> = tail.iter().map(|r| (r.n_queries, r.rmse)).collect();
    let classical: Vec<(f64, f64)> = tail
        .iter()
        .map(|r| (r.n_queries, r.crlb_classical.sqrt()))
        .collect();
    let (s, sc) = (log_log_slope(&rmse), log_log_slope(&classical));
    let last = rows.last().unwrap();
    let beats = last.rmse < last.crlb_classical.sqrt();
    let (fast, time) = within(start.elapsed(), 300);
    Outcome {
        pass: (s + 1.0).abs() <= 0.15 && (sc + 0.5).abs() <= 0.1 && beats && fast,
        detail: format!(
            "RMSE slope {s:.3} (-1 +/- 0.15), classical slope {sc:.3} (-0.5 +/- 0.1), final RMSE below classical: {beats}, {time}"
        ),
    }
}

fn mismatch(dir: &Path) -> Outcome {
    let rows = match campaign("mismatch.json", dir) {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: e,
            }
        }
    };
    let min = rows.iter().map(|r| r.rmse).fold(f64::INFINITY, f64::min);
    let last = rows.last().unwrap().rmse;
    Outcome {
        pass: last <= 2.0 * min,
        detail: format!(
            "final RMSE {last:.3e} vs minimum {min:.3e} (ratio {:.2}, <= 2)",
            last / min
        ),
    }
}

fn determinism(tmp: &Path) -> Outcome {
    let small = fs::read_to_string(configs().join("depolarizing.json"))
        .unwrap()
        .replace("\"trials\": 500", "\"trials\": 20");
    let campaign_cfg = tmp.join("small.json");
    fs::write(&campaign_cfg, small).unwrap();
    let estimate_cfg = tmp.join("estimate.json");
    fs::write(
        &estimate_cfg,
        r#"{"schedule": {"m": [1, 2, 4, 8, 16, 32, 64, 128], "n_shot": 50, "n_shot_prime": 50},
            "c": [0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3],
            "true_model": {"theta": 0.35, "noise": {"kind": "depolarizing", "kappa": 0.01}}}"#,
    )
    .unwrap();
    let scan_cfg = configs().join("landscape_case1.json");

    let mut files = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.join(run);
        fs::create_dir_all(&dir).unwrap();
        let path = |name: &str| dir.join(name).to_str().unwrap().to_owned();
        let commands: Vec<Vec<String>> = vec![
            vec![
                "scan".into(),
                scan_cfg.to_str().unwrap().into(),
                "--output".into(),
                path("scan.csv"),
            ],
            vec![
                "estimate".into(),
                estimate_cfg.to_str().unwrap().into(),
                "--simulate".into(),
                "--seed".into(),
                "5".into(),
                "--output".into(),
                path("estimate.json"),
            ],
            vec![
                "campaign".into(),
                campaign_cfg.to_str().unwrap().into(),
                "--output".into(),
                path("campaign"),
            ],
            vec![
                "oracle-check".into(),
                "--output".into(),
                path("oracle.json"),
            ],
        ];
        for args in &commands {
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            if !cli(&args).status.success() {
                return Outcome {
                    pass: false,
                    detail: format!("command failed: {}", args.join(" ")),
                };
            }
        }
        files.push(dir);
    }
    let names = [
        "scan.csv",
        "estimate.json",
        "campaign/error_curve.csv",
        "campaign/trials.csv",
        "oracle.json",
    ];
    let differing: Vec<&str> = names
        .iter()
        .copied()
        .filter(|n| fs::read(files[0].join(n)).unwrap() != fs::read(files[1].join(n)).unwrap())
        .collect();
    Outcome {
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            format!("{} data files byte-identical across reruns", names.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    }
}

fn main() {
    let tmp = TempDir::new().unwrap();
    let sub = |name: &str| {
        let p = tmp.path().join(name);
        fs::create_dir_all(&p).unwrap();
        p
    };
    let criteria: Vec<(&str, Check)> = vec![
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("ancillary identity", Box::new(ancillary_identity)),
        ("orthogonality", Box::new(orthogonality)),
        ("CRLB invariance", Box::new(crlb_invariance)),
        ("roundtrip and ODE residual", Box::new(roundtrip_and_ode)),
        (
            "landscape agreement across fit constants",
            Box::new(landscape_agreement),
        ),
        (
            "RMSE against CRLB",
            Box::new({
                let d = sub("depolarizing");
                move || rmse_vs_crlb(&d)
            }),
        ),
        (
            "noiseless scaling",
            Box::new({
                let d = sub("noiseless");
                move || scaling(&d)
            }),
        ),
        (
            "mismatch robustness",
            Box::new({
                let d = sub("mismatch");
                move || mismatch(&d)
            }),
        ),
        (
            "determinism",
            Box::new({
                let d = sub("determinism");
                move || determinism(&d)
            }),
        ),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = check();
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {}: {}",
            i + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            name,
            outcome.detail
        );
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
