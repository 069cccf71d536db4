//! Using constructed rules: randomized equal-weight integration, exact
//! worst-case error of realized point sets, and convergence studies.
//!
//! The randomization pipeline is always shift-then-fold: z_n = phi(x_n xor
//! sigma) with sigma drawn at [`points::DEFAULT_SHIFT_PRECISION`] from a
//! per-replication seed. Everything downstream is a plain average, so results
//! are reproducible from (rule, seed, R) alone.

use rayon::prelude::*;

use crate::accum::{self, Neumaier};
use crate::cbc::cbc_fast;
use crate::criterion::b_points;
use crate::kernel::{kernel_s, Kernel1, WeightModel};
use crate::points::{self, randomize_with_shift, Dyadic, RuleSpec, ShiftVector, SplitMix64};
use crate::{Error, Result};

/// Exact kernel error evaluation is quadratic in the point count; beyond this
/// many points callers must use [`worst_case_error_sampled`].
pub const MAX_EXACT_KERNEL_POINTS: usize = 1 << 12;

/// Rows per parallel block in the kernel double sum; blocks are reduced in
/// ascending order so the result does not depend on the worker count.
const KERNEL_ROW_BLOCK: usize = 64;

/// Boxed evaluator of an [`Integrand`].
pub type IntegrandFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A test function on [0,1]^s with its exact integral when one is known
/// analytically. Evaluation must accept coordinate value 1 (the tent fold
/// attains it); the named integrands are continuous there.
pub struct Integrand {
    name: String,
    dimension: usize,
    exact: Option<f64>,
    f: IntegrandFn,
}

impl Integrand {
    pub fn new(name: &str, dimension: usize, exact: Option<f64>, f: IntegrandFn) -> Integrand {
        assert!(dimension >= 1, "integrand needs at least one coordinate");
        Integrand { name: name.to_string(), dimension, exact, f }
    }

    /// f = 1 with integral 1; any estimate must be exact.
    pub fn constant_one(dimension: usize) -> Integrand {
        Integrand::new("one", dimension, Some(1.0), Box::new(|_| 1.0))
    }

    /// f(x) = prod_j (1 + 2^{-j} B_2(x_j)) with B_2(x) = x^2 - x + 1/6.
    /// Every factor integrates to 1, so the exact integral is 1.
    pub fn b2_product(dimension: usize) -> Integrand {
        Integrand::new(
            "b2prod",
            dimension,
            Some(1.0),
            Box::new(|x| {
                let mut prod = 1.0;
                let mut c = 1.0;
                for &t in x {
                    c *= 0.5;
                    prod *= 1.0 + c * (t * t - t + 1.0 / 6.0);
                }
                prod
            }),
        )
    }

    /// f(x) = x_1 with integral 1/2; linear, so shift-and-fold estimates are
    /// unbiased and the statistical oracle is sharp.
    pub fn first_coordinate(dimension: usize) -> Integrand {
        Integrand::new("x1", dimension, Some(0.5), Box::new(|x| x[0]))
    }

    /// The named registry used by the command-line surface.
    pub fn by_name(name: &str, dimension: usize) -> Result<Integrand> {
        match name {
            "one" => Ok(Integrand::constant_one(dimension)),
            "b2prod" => Ok(Integrand::b2_product(dimension)),
            "x1" => Ok(Integrand::first_coordinate(dimension)),
            other => Err(Error::InvalidParameter(format!(
                "unknown integrand '{}' (available: one, b2prod, x1)",
                other
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Exact integral over [0,1]^s, when known analytically.
    pub fn exact_integral(&self) -> Option<f64> {
        self.exact
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension, "dimension mismatch");
        (self.f)(x)
    }
}

/// Randomized integration outcome over R independent shifts.
#[derive(Clone, Debug)]
pub struct IntegrationResult {
    /// Mean of the per-shift estimates.
    pub estimate: f64,
    /// Root mean square deviation from the exact integral, when known.
    pub rms_error: Option<f64>,
    /// Per-shift estimates, in replication order.
    pub per_shift: Vec<f64>,
}

/// Empirical mean-square error of the randomized rule next to its guaranteed
/// bound.
#[derive(Clone, Debug)]
pub struct MseComparison {
    /// Mean of the squared worst-case errors over the shifts.
    pub mean: f64,
    /// Standard error of that mean.
    pub stderr: f64,
    /// The criterion value B of the rule, which bounds the expectation.
    pub bound: f64,
    pub shifts: u32,
}

/// Least-squares slope of log2(value) against m, over the full declared
/// range and over its upper half (less pre-asymptotic bias).
#[derive(Clone, Copy, Debug)]
pub struct SlopeFit {
    pub full: f64,
    pub upper_half: f64,
}

/// One row of a convergence study.
#[derive(Clone, Debug)]
pub struct StudyRecord {
    pub m: u32,
    pub mprime: u32,
    pub n_points: u64,
    /// Criterion value of the rule constructed at this m.
    pub b_value: f64,
    /// RMS integration error over the study's shift count.
    pub rms_error: f64,
    /// Mean/stderr of the exact kernel squared error, when computed (skipped
    /// when disabled or past [`MAX_EXACT_KERNEL_POINTS`]).
    pub kernel_mse_mean: Option<f64>,
    pub kernel_mse_stderr: Option<f64>,
}

/// Convergence study: one constructed rule per m, with fitted decay rates.
#[derive(Clone, Debug)]
pub struct ErrorStudy {
    pub records: Vec<StudyRecord>,
    pub b_slope: SlopeFit,
    pub rms_slope: SlopeFit,
}

/// Knobs for [`convergence_study`].
#[derive(Clone, Copy, Debug)]
pub struct StudyOptions {
    /// Randomizations per m for the RMS integration error.
    pub shifts: u32,
    pub seed: u64,
    /// Shifts for the kernel-error columns; 0 skips them. They are also
    /// skipped (columns left empty) once 2^m exceeds the exact-evaluation
    /// cap, rather than silently switching to the sampled estimator.
    pub kernel_shifts: u32,
}

impl Default for StudyOptions {
    fn default() -> StudyOptions {
        StudyOptions { shifts: 32, seed: 0, kernel_shifts: 0 }
    }
}

/// Equal-weight estimate of the integral from one explicit shift. The zero
/// shift gives the deterministic folded-rule value.
pub fn estimate_with_shift(
    rule: &RuleSpec,
    integrand: &Integrand,
    shift: &ShiftVector,
) -> Result<f64> {
    check_dimension(rule, integrand)?;
    Ok(estimate_points(&randomize_with_shift(rule, shift).points, integrand))
}

/// Randomized integration: R independent digital-shift-and-fold replications
/// with seeds derived from `seed` by one SplitMix64 stream. Returns the mean
/// estimate and, when the integrand's integral is known, the RMS error over
/// the replications.
pub fn integrate(
    rule: &RuleSpec,
    integrand: &Integrand,
    shifts: u32,
    seed: u64,
) -> Result<IntegrationResult> {
    check_dimension(rule, integrand)?;
    if shifts == 0 {
        return Err(Error::InvalidParameter("need at least one shift".into()));
    }
    let seeds = derive_seeds(seed, shifts);
    let per_shift: Vec<f64> = seeds
        .par_iter()
        .map(|&sr| {
            let set = points::randomize(rule, sr, shift_precision(rule))
                .expect("precision validated against m'");
            estimate_points(&set.points, integrand)
        })
        .collect();
    let estimate = accum::sum(&per_shift) / shifts as f64;
    let rms_error = integrand.exact_integral().map(|exact| {
        let mut acc = Neumaier::new();
        for &q in &per_shift {
            acc.add((q - exact) * (q - exact));
        }
        (acc.value() / shifts as f64).sqrt()
    });
    Ok(IntegrationResult { estimate, rms_error, per_shift })
}

/// Exact squared worst-case error of a realized (folded) point set in the
/// weighted space:
///
/// ```text
///     e^2(P) = (1/N^2) sum_{n,n'} K_s(z_n, z_{n'}) - gamma_empty
/// ```
///
/// valid because the kernel integrates to gamma_empty in each argument (all
/// Bernoulli factors integrate to zero). Quadratic in N; errors past
/// [`MAX_EXACT_KERNEL_POINTS`].
pub fn worst_case_error_kernel(
    zs: &[Vec<f64>],
    alpha: u32,
    weights: &WeightModel,
) -> Result<f64> {
    assert!(!zs.is_empty(), "need at least one point");
    let n = zs.len();
    if n > MAX_EXACT_KERNEL_POINTS {
        return Err(Error::InvalidParameter(format!(
            "{} points exceed the exact kernel cap {}; use worst_case_error_sampled",
            n, MAX_EXACT_KERNEL_POINTS
        )));
    }
    let s = weights.dimension();
    for z in zs {
        assert_eq!(z.len(), s, "dimension mismatch");
    }
    let k1 = Kernel1::new(alpha)?;
    // Upper triangle by rows: row n carries its diagonal term plus twice each
    // strictly-upper pair. Blocks of rows are summed independently and
    // combined in ascending order.
    let starts: Vec<usize> = (0..n).step_by(KERNEL_ROW_BLOCK).collect();
    let block_sums: Vec<f64> = starts
        .par_iter()
        .map(|&start| {
            let mut acc = Neumaier::new();
            for row in start..(start + KERNEL_ROW_BLOCK).min(n) {
                acc.add(kernel_s(&k1, weights, &zs[row], &zs[row]));
                for col in row + 1..n {
                    acc.add(2.0 * kernel_s(&k1, weights, &zs[row], &zs[col]));
                }
            }
            acc.value()
        })
        .collect();
    let total = accum::sum(&block_sums);
    Ok(total / (n as f64 * n as f64) - weights.gamma_empty())
}

/// Monte Carlo estimate of the same quantity from `pairs` uniformly drawn
/// ordered pairs. A statistical estimate with no error guarantee: intended
/// for sets past the exact cap, and never used in any assertion here.
pub fn worst_case_error_sampled(
    zs: &[Vec<f64>],
    alpha: u32,
    weights: &WeightModel,
    pairs: u64,
    seed: u64,
) -> Result<f64> {
    assert!(!zs.is_empty(), "need at least one point");
    assert!(pairs >= 1, "need at least one pair");
    let k1 = Kernel1::new(alpha)?;
    let n = zs.len() as u64;
    let mut rng = SplitMix64::new(seed);
    let mut acc = Neumaier::new();
    for _ in 0..pairs {
        let a = (rng.next_u64() % n) as usize;
        let b = (rng.next_u64() % n) as usize;
        acc.add(kernel_s(&k1, weights, &zs[a], &zs[b]));
    }
    Ok(acc.value() / pairs as f64 - weights.gamma_empty())
}

/// Empirical mean of the kernel squared error over R shifts, checked against
/// the criterion value B. The bound holds in expectation for any rule, so
/// `mean - 3 stderr > B` is treated as an implementation bug, not a warning.
pub fn mse_vs_bound(rule: &RuleSpec, shifts: u32, seed: u64) -> Result<MseComparison> {
    if shifts < 2 {
        return Err(Error::InvalidParameter(
            "need at least two shifts for a standard error".into(),
        ));
    }
    if rule.n_points() > MAX_EXACT_KERNEL_POINTS as u64 {
        return Err(Error::InvalidParameter(format!(
            "2^{} points exceed the exact kernel cap {}",
            rule.m(),
            MAX_EXACT_KERNEL_POINTS
        )));
    }
    let seeds = derive_seeds(seed, shifts);
    let errors: Vec<f64> = seeds
        .par_iter()
        .map(|&sr| {
            let set = points::randomize(rule, sr, shift_precision(rule))
                .expect("precision validated against m'");
            worst_case_error_kernel(&set.values(), rule.alpha(), rule.weights())
                .expect("point count already checked")
        })
        .collect();
    let mean = accum::sum(&errors) / shifts as f64;
    let mut var = Neumaier::new();
    for &e in &errors {
        var.add((e - mean) * (e - mean));
    }
    let stderr = (var.value() / (shifts as f64 * (shifts - 1) as f64)).sqrt();
    let bound = b_points(rule).value;
    if mean - 3.0 * stderr > bound {
        return Err(Error::BoundViolated { value: mean - 3.0 * stderr, bound });
    }
    Ok(MseComparison { mean, stderr, bound, shifts })
}

/// Default modulus degree for a rate study: the reduced degree
/// m' = ceil(alpha m / 2) that the tent fold makes sufficient.
pub fn default_mprime(alpha: u32, m: u32) -> u32 {
    (alpha * m).div_ceil(2)
}

/// One constructed rule per m in [m_lo, m_hi]: records the criterion value,
/// the RMS integration error of `integrand` over `options.shifts`
/// randomizations, optionally the exact kernel error statistics, and fits
/// log2 decay slopes. The construction is [`cbc_fast`], so the weights must
/// be a product model; the integrand must have a known integral.
pub fn convergence_study(
    s: usize,
    alpha: u32,
    weights: &WeightModel,
    m_lo: u32,
    m_hi: u32,
    integrand: &Integrand,
    options: &StudyOptions,
) -> Result<ErrorStudy> {
    if m_lo > m_hi {
        return Err(Error::InvalidParameter(format!(
            "empty m range {}..{}",
            m_lo, m_hi
        )));
    }
    if integrand.exact_integral().is_none() {
        return Err(Error::InvalidParameter(
            "convergence study needs an integrand with a known integral".into(),
        ));
    }
    if options.shifts == 0 {
        return Err(Error::InvalidParameter("need at least one shift".into()));
    }
    let mut master = SplitMix64::new(options.seed);
    let mut records = Vec::with_capacity((m_hi - m_lo + 1) as usize);
    for m in m_lo..=m_hi {
        // Both seeds are always drawn, so toggling the kernel columns cannot
        // change the integration results.
        let integrate_seed = master.next_u64();
        let kernel_seed = master.next_u64();
        let mprime = default_mprime(alpha, m);
        let (rule, report) = cbc_fast(s, m, mprime, alpha, weights.clone())?;
        let b_value = report.b_trace[s - 1];
        let result = integrate(&rule, integrand, options.shifts, integrate_seed)?;
        let rms_error = result.rms_error.expect("exact integral checked above");
        let (kernel_mse_mean, kernel_mse_stderr) = if options.kernel_shifts >= 2
            && rule.n_points() <= MAX_EXACT_KERNEL_POINTS as u64
        {
            let cmp = mse_vs_bound(&rule, options.kernel_shifts, kernel_seed)?;
            (Some(cmp.mean), Some(cmp.stderr))
        } else {
            (None, None)
        };
        records.push(StudyRecord {
            m,
            mprime,
            n_points: rule.n_points(),
            b_value,
            rms_error,
            kernel_mse_mean,
            kernel_mse_stderr,
        });
    }
    let b_slope = fit_slopes(&records, |r| r.b_value);
    let rms_slope = fit_slopes(&records, |r| r.rms_error);
    Ok(ErrorStudy { records, b_slope, rms_slope })
}

fn check_dimension(rule: &RuleSpec, integrand: &Integrand) -> Result<()> {
    if integrand.dimension() != rule.s() {
        return Err(Error::InvalidParameter(format!(
            "integrand dimension {} does not match rule dimension {}",
            integrand.dimension(),
            rule.s()
        )));
    }
    Ok(())
}

fn shift_precision(rule: &RuleSpec) -> u32 {
    points::DEFAULT_SHIFT_PRECISION.max(rule.mprime())
}

fn derive_seeds(seed: u64, count: u32) -> Vec<u64> {
    let mut master = SplitMix64::new(seed);
    (0..count).map(|_| master.next_u64()).collect()
}

/// Equal-weight average of the integrand over one realized point set,
/// accumulated in point order.
fn estimate_points(points: &[Vec<Dyadic>], integrand: &Integrand) -> f64 {
    let mut acc = Neumaier::new();
    let mut buf = vec![0.0f64; integrand.dimension()];
    for z in points {
        for (slot, d) in buf.iter_mut().zip(z) {
            *slot = d.value();
        }
        acc.add(integrand.eval(&buf));
    }
    acc.value() / points.len() as f64
}

/// log2 least-squares slope against m, full range and upper half. NaN when
/// fewer than two usable (positive) values remain.
fn fit_slopes(records: &[StudyRecord], value: impl Fn(&StudyRecord) -> f64) -> SlopeFit {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| value(r) > 0.0)
        .map(|r| (r.m as f64, value(r).log2()))
        .collect();
    let skip = records.len() / 2;
    let upper: Vec<(f64, f64)> = records[skip..]
        .iter()
        .filter(|r| value(r) > 0.0)
        .map(|r| (r.m as f64, value(r).log2()))
        .collect();
    SlopeFit { full: least_squares_slope(&points), upper_half: least_squares_slope(&upper) }
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|&(x, _)| x).sum::<f64>() / n;
    let mean_y = points.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(x, y) in points {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
    }
    num / den
}
