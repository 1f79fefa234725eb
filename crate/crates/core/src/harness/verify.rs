//! Numerical self-checks of the active-regression machinery.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::mdp::Rng;
use crate::regression::{select_sample, spd_inverse, top_eigenvector, trace_gain, DesignState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Adds this multiple of the identity to `A` before evaluating the
    /// trace identity, to check that the suite can fail.
    pub fault: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 7, fault: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Largest observed error, in the suite's own units.
    pub max_error: f64,
    pub tolerance: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}/{} trials ok, max error {:.3e} (tolerance {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.trials - self.failures,
            self.trials,
            self.max_error,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.suites {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

fn random_vec(d: usize, rng: &mut Rng) -> Vec<f64> {
    (0..d).map(|_| rng.normal()).collect()
}

/// Random SPD matrix with eigenvalues bounded away from zero.
fn random_spd(d: usize, rng: &mut Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| rng.normal());
    &b * b.transpose() / d as f64 + DMatrix::identity(d, d) * 0.1
}

fn inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("test matrices are invertible")
}

/// Direct evaluation of `Tr[(A⁻¹ + vvᵀ)⁻¹]`.
fn trace_after(a: &DMatrix<f64>, v: &[f64]) -> f64 {
    let v = DVector::from_column_slice(v);
    inverse(&(inverse(a) + &v * v.transpose())).trace()
}

pub fn trace_identity_suite(opts: &VerifyOptions, rng: &mut Rng) -> SuiteResult {
    let tol = 1e-9;
    let mut res = SuiteResult {
        name: "trace identity",
        trials: 200,
        failures: 0,
        max_error: 0.0,
        tolerance: tol,
    };
    for _ in 0..res.trials {
        let d = 1 + rng.below(6);
        let a = random_spd(d, rng);
        let v = random_vec(d, rng);
        let shown = match opts.fault {
            Some(e) => &a + DMatrix::identity(d, d) * e,
            None => a.clone(),
        };
        let err = (shown.trace() - trace_gain(&shown, &v) - trace_after(&a, &v)).abs();
        res.max_error = res.max_error.max(err);
        if !(err <= tol) {
            res.failures += 1;
        }
    }
    res
}

pub fn sherman_morrison_suite(rng: &mut Rng) -> SuiteResult {
    let tol = 1e-8;
    let mut res = SuiteResult {
        name: "sherman-morrison consistency",
        trials: 50,
        failures: 0,
        max_error: 0.0,
        tolerance: tol,
    };
    for _ in 0..res.trials {
        let d = 1 + rng.below(6);
        let mut design = DesignState::new(d);
        let mut ok = true;
        for _ in 0..d + 20 {
            let v = random_vec(d, rng);
            let y = rng.normal();
            ok &= design.push(v, y).is_ok();
        }
        let err = match (design.inverse(), spd_inverse(&design.gram())) {
            (Some(a), Ok(batch)) if ok => (a - batch).amax(),
            _ => f64::INFINITY,
        };
        res.max_error = res.max_error.max(err);
        if !(err <= tol) {
            res.failures += 1;
        }
    }
    res
}

pub fn greedy_selection_suite(rng: &mut Rng) -> SuiteResult {
    let mut res = SuiteResult {
        name: "greedy A-optimal selection",
        trials: 200,
        failures: 0,
        max_error: 0.0,
        tolerance: 0.0,
    };
    for _ in 0..res.trials {
        let d = 1 + rng.below(6);
        let a = random_spd(d, rng);
        let n = 2 + rng.below(10);
        let cands: Vec<Vec<f64>> = (0..n).map(|_| random_vec(d, rng)).collect();
        let mut brute = 0;
        let mut best = f64::INFINITY;
        for (i, c) in cands.iter().enumerate() {
            let t = trace_after(&a, c);
            if t < best {
                best = t;
                brute = i;
            }
        }
        match select_sample(&a, &cands) {
            Ok(i) if i == brute => {}
            Ok(i) => {
                res.failures += 1;
                res.max_error = res.max_error.max(trace_after(&a, &cands[i]) - best);
            }
            Err(_) => res.failures += 1,
        }
    }
    res
}

fn sphere_points(d: usize, n: usize) -> Vec<Vec<f64>> {
    match d {
        2 => (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci lattice.
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
    }
}

pub fn eigenvector_suite(rng: &mut Rng) -> SuiteResult {
    let tol = 1e-6;
    let mut res = SuiteResult {
        name: "eigenvector claim",
        trials: 40,
        failures: 0,
        max_error: 0.0,
        tolerance: tol,
    };
    for t in 0..res.trials {
        let d = if t % 2 == 0 { 2 } else { 3 };
        let a = random_spd(d, rng);
        let top = trace_gain(&a, &top_eigenvector(&a));
        let sampled = sphere_points(d, 20_000)
            .iter()
            .map(|v| trace_gain(&a, v))
            .fold(f64::NEG_INFINITY, f64::max);
        let excess = (sampled - top).max(0.0);
        res.max_error = res.max_error.max(excess);
        if sampled > top + tol {
            res.failures += 1;
        }
    }
    res
}

/// Runs the four property suites with fixed seeds.
pub fn verify_active(opts: &VerifyOptions) -> VerifyReport {
    let mut rng = Rng::new(opts.seed);
    let mut r1 = rng.fork();
    let mut r2 = rng.fork();
    let mut r3 = rng.fork();
    let mut r4 = rng.fork();
    VerifyReport {
        suites: vec![
            sherman_morrison_suite(&mut r1),
            trace_identity_suite(opts, &mut r2),
            greedy_selection_suite(&mut r3),
            eigenvector_suite(&mut r4),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes() {
        let r = verify_active(&VerifyOptions::default());
        assert_eq!(r.suites.len(), 4);
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn fault_is_caught() {
        let r = verify_active(&VerifyOptions {
            fault: Some(1e-3),
            ..VerifyOptions::default()
        });
        let trace = r.suites.iter().find(|s| s.name == "trace identity").unwrap();
        assert!(!trace.passed());
    }
}
