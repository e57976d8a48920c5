//! Acceptance suite. Each test prints one `ACCEPTANCE <criterion>: PASS|FAIL`
//! line and fails when its criterion is not met. Run with
//! `cargo test --test acceptance -- --nocapture --test-threads=1` to see the
//! lines in order.

use std::path::PathBuf;
use std::process::Command;
use std::sync::OnceLock;

use samplab::experiment::{sweep, ExperimentConfig, RunOptions, SweepResult};
use samplab::regret::{DistanceKind, Level};
use samplab::theory::{self, AuditPolicy, AUDIT_ARMS, AUDIT_HORIZONS, AUDIT_RUNS};

const SEED: u64 = 2024;

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn report(criterion: &str, passed: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "{criterion}: {detail}");
}

fn gaussian_sweep() -> &'static SweepResult {
    static RES: OnceLock<SweepResult> = OnceLock::new();
    RES.get_or_init(|| {
        let config = ExperimentConfig::from_path(&config_path("rates_gaussian.json")).unwrap();
        sweep(&config, RunOptions::default()).unwrap()
    })
}

fn slope_line(
    res: &SweepResult,
    policy: &str,
    metrics: &[&str],
    lo: f64,
    hi: f64,
) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for m in metrics {
        match res.fit(policy, m) {
            Some(f) => {
                ok &= (lo..=hi).contains(&f.slope);
                parts.push(format!("{m} slope={:.4} (r2={:.3})", f.slope, f.r_squared));
            }
            None => {
                ok = false;
                parts.push(format!("{m} slope=skipped"));
            }
        }
    }
    (ok, format!("window [{lo}, {hi}]; {}", parts.join("; ")))
}

#[test]
fn rate_table_ase_tv_slopes() {
    let (ok, detail) = slope_line(
        gaussian_sweep(),
        "ase",
        &["tv.action.simple.per_run", "tv.policy.simple.per_run"],
        -0.65,
        -0.35,
    );
    report("rate table ASE TV slopes", ok, &detail);
}

#[test]
fn rate_table_ase_rkl_slopes() {
    let (ok, detail) = slope_line(
        gaussian_sweep(),
        "ase",
        &["rkl.action.simple.per_run", "rkl.policy.simple.per_run"],
        -1.25,
        -0.75,
    );
    report("rate table ASE r-KL slopes", ok, &detail);
}

#[test]
fn rate_table_ase_rkl_cumulative_near_constant() {
    let res = gaussian_sweep();
    let metric = "rkl.action.cumulative.per_run";
    let late = res.point("ase", metric, 1 << 14).unwrap().mean;
    let early = res.point("ase", metric, 1 << 10).unwrap().mean;
    report(
        "rate table ASE CAR r-KL growth",
        late <= 3.0 * early,
        &format!(
            "CAR(2^14)={late:.4} CAR(2^10)={early:.4} ratio={:.3} limit 3",
            late / early
        ),
    );
}

#[test]
fn rate_table_as_tv_slopes() {
    let (ok, detail) = slope_line(
        gaussian_sweep(),
        "as",
        &["tv.action.simple.per_run", "tv.policy.simple.per_run"],
        -0.65,
        -0.35,
    );
    report("rate table AS TV slopes", ok, &detail);
}

#[test]
fn rate_table_as_rkl_slopes() {
    let (ok, detail) = slope_line(
        gaussian_sweep(),
        "as",
        &["rkl.action.simple.per_run", "rkl.policy.simple.per_run"],
        -1.25,
        -0.75,
    );
    report("rate table AS r-KL slopes", ok, &detail);
}

#[test]
fn rate_table_fkl_bounded_noise_slopes_reported() {
    // No window is attached to the f-KL rows; the fitted slopes are reported.
    let config = ExperimentConfig::from_path(&config_path("rates_bounded.json")).unwrap();
    let res = sweep(&config, RunOptions::default()).unwrap();
    let mut parts = Vec::new();
    for (policy, metric, fit) in &res.fits {
        match fit {
            Some(f) => parts.push(format!("{policy} {metric} slope={:.4}", f.slope)),
            None => parts.push(format!("{policy} {metric} slope=skipped")),
        }
    }
    println!(
        "ACCEPTANCE rate table f-KL (bounded noise, informational): {}",
        parts.join("; ")
    );
    assert!(res.fits.iter().all(|(_, _, f)| f.is_some()));
}

#[test]
fn beta_regret_identity() {
    let rep = theory::beta_regret_identity_check(100, SEED, 1e-8).unwrap();
    report(
        "beta-regret decomposition on 100 trajectories",
        rep.passed,
        &format!(
            "max |residual| = {:.3e} tolerance 1e-8",
            1e-8 - rep.worst_slack
        ),
    );
}

#[test]
fn beta_scaling_equivalence() {
    let rep = theory::beta_equivalence_check(50, &[0.5, 2.0, 10.0], SEED).unwrap();
    report(
        "beta-scaling equivalence, 50 episodes per beta",
        rep.passed && rep.instances == 150,
        &format!(
            "{} episodes, {} mismatches",
            rep.instances, -rep.worst_slack
        ),
    );
}

#[test]
fn pinsker_sandwich() {
    let rep = theory::pinsker_sandwich_check(10_000, SEED);
    report(
        "Pinsker sandwich on 1e4 pairs",
        rep.passed,
        &format!("worst slack {:.3e} tolerance 1e-12", rep.worst_slack),
    );
}

#[test]
fn softmax_perturbation_bounds() {
    let rep = theory::softmax_perturbation_audit(1_000, SEED).unwrap();
    report(
        "softmax perturbation bounds on 1e3 pairs",
        rep.passed,
        &format!("worst slack {:.3e}", rep.worst_slack),
    );
}

#[test]
fn lower_bound_construction() {
    let mut worst = f64::INFINITY;
    let mut all = true;
    for k in [2, 5, 10] {
        for t in [25, 100, 10_000] {
            let rep = theory::lower_bound_construction_check(k, t).unwrap();
            all &= rep.passed;
            worst = worst.min(rep.worst_slack);
        }
    }
    report(
        "lower-bound construction, k in {2,5,10}, T in {25,100,1e4}",
        all,
        &format!("worst slack {worst:.3e}"),
    );
}

#[test]
fn lower_bound_audit() {
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut worst = f64::INFINITY;
    for k in AUDIT_ARMS {
        for t in AUDIT_HORIZONS {
            for policy in AuditPolicy::ALL {
                for level in [Level::Policy, Level::Action] {
                    let rep = theory::lower_bound_audit(
                        k,
                        t,
                        DistanceKind::Tv,
                        level,
                        policy,
                        AUDIT_RUNS,
                        SEED,
                    )
                    .unwrap();
                    checked += 1;
                    worst = worst.min(rep.worst_slack);
                    if !rep.passed {
                        failures.push(rep.name);
                    }
                }
            }
        }
    }
    report(
        "minimax TV lower-bound audit, 200 runs",
        failures.is_empty(),
        &format!("{checked} audits, worst slack {worst:.3e}, failures {failures:?}"),
    );
}

#[test]
fn cli_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_path("smoke.json");
    let out = |name: &str, threads: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_samplab"))
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&path)
            .args(["--seed", "11", "--threads", threads])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    let a = out("a.csv", "1");
    let b = out("b.csv", "1");
    let c = out("c.csv", "3");
    report(
        "byte-identical CSV across invocations",
        a == b && a == c && !a.is_empty(),
        &format!("{} bytes", a.len()),
    );
}
