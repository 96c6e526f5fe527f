use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::{num, write_csv};
use crate::control::{derive_control_params, verify_stability_conditions};
use crate::numerics::{rotation, rotation_integral, scaled_rotation_polar, Mat2};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(name: &str, cases: usize, max_residual: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.to_string(),
            cases,
            max_residual,
            tolerance,
            pass: max_residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub outputs: Vec<PathBuf>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Derives control constants for `draws` random `(β, ω_n, φ_κ, τ_DC)` tuples
/// (plus the given notches at `beta`) and re-checks the boundedness conditions.
pub fn stability_condition_suite(draws: usize, seed: u64, beta: f64, notches: &[f64]) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tuples: Vec<(f64, f64, f64, f64)> = notches.iter().map(|&f| (beta, 2.0 * PI * f, 0.0, 0.0)).collect();
    for _ in 0..draws {
        let b = 10f64.powf(rng.random_range(0.0..9.0));
        let t_s = 1.0 / (2.0 * b);
        let w = rng.random_range(1e-6..1.0) * 2.0 * PI / t_s;
        tuples.push((b, w, rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..t_s)));
    }
    let (mut worst, mut slack) = (0.0_f64, 0.0_f64);
    for &(b, w, phi, tau) in &tuples {
        let p = derive_control_params(b, w, phi, tau)?;
        let r = verify_stability_conditions(&p, b, w);
        worst = worst.max(r.norm_match.abs()).max(r.tilde_norm.abs()).max(r.tilde_angle.abs());
        slack = slack.max(r.superposition_slack.abs());
    }
    Ok(vec![
        CheckResult::new("stability_residuals", tuples.len(), worst, 1e-12),
        CheckResult::new("superposition_slack", tuples.len(), slack, 0.0),
    ])
}

/// The rotation-matrix identities, each over `draws` random angles.
pub fn rotation_identity_suite(draws: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0_f64; 5];
    for _ in 0..draws {
        let a = rng.random_range(-4.0 * PI..4.0 * PI);
        let b = rng.random_range(-4.0 * PI..4.0 * PI);
        let ab = rotation(a) * rotation(b);
        let ba = rotation(b) * rotation(a);
        worst[0] = worst[0].max(ab.max_abs_diff(&rotation(a + b))).max(ba.max_abs_diff(&ab));

        worst[1] = worst[1].max(rotation(-a).max_abs_diff(&rotation(a).transpose()));

        let diff = rotation(a) - rotation(-a);
        worst[2] = worst[2].max(diff.max_abs_diff(&rotation(PI / 2.0).scale(2.0 * a.sin())));

        // ∫Θ(φτ)dτ has antiderivative Θ(φτ − π/2)/φ
        let phi = rng.random_range(0.1..10.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let delta = rng.random_range(0.01..2.0);
        let exact = (rotation(phi * delta - PI / 2.0) - rotation(-phi * delta - PI / 2.0)).scale(1.0 / phi);
        let scale = 1.0_f64.max(2.0 * delta);
        worst[3] = worst[3].max(rotation_integral(phi, delta).max_abs_diff(&exact) / scale);

        let (x, y) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let m = Mat2::scaled_rotation(x, y);
        worst[4] = worst[4].max(m.max_abs_diff(&scaled_rotation_polar(x, y)) / 1.0_f64.max(x.hypot(y)));
    }
    ["commutativity", "negation", "difference", "integral", "scaled_decomposition"]
        .iter()
        .zip(worst)
        .map(|(n, w)| CheckResult::new(n, draws, w, 1e-13))
        .collect()
}

/// Runs both suites; writes `verify.csv` when `out` is given.
pub fn run_verify(cfg: Option<&ExperimentConfig>, seed: u64, out: Option<&Path>) -> Result<VerifyReport> {
    let (beta, notches) = match cfg {
        Some(c) => (c.design()?.beta, c.notches()?),
        None => (0.5, (0..8).map(|j| (j as f64 + 0.5) / 16.0).collect()),
    };
    let mut checks = stability_condition_suite(1000, seed, beta, &notches)?;
    checks.extend(rotation_identity_suite(1000, seed));
    let mut outputs = Vec::new();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("verify.csv");
        let rows: Vec<Vec<String>> = checks
            .iter()
            .map(|c| vec![c.name.clone(), c.cases.to_string(), num(c.max_residual), num(c.tolerance), c.pass.to_string()])
            .collect();
        write_csv(&path, &["check", "cases", "max_residual", "tolerance", "pass"], &rows)?;
        outputs.push(path);
    }
    Ok(VerifyReport { checks, outputs })
}
