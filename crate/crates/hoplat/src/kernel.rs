//! Walsh analysis, weight models, smoothness constants, and the per-coordinate
//! kernel pieces behind the quality criterion.
//!
//! The criterion weighs dual-space indices k by 2^{-2 mu_alpha(floor(k/2))},
//! where mu_alpha(k) sums the min(alpha, #digits) largest 1-digit positions of
//! k. Everything downstream reduces to the one-dimensional series
//!
//! ```text
//!     omega_alpha(x) = sum over k in E of 2^{-2 mu_alpha(floor(k/2))} wal_k(x),
//! ```
//!
//! with E the positive integers with an even number of 1 digits. For dyadic x
//! this has a closed form costing O(alpha m') (see [`OmegaTables`]); the raw
//! series is kept as an independent oracle with a proven truncation bound.
//!
//! Exact constants (the digit-weight sums A_{alpha,lambda,i} at lambda = 1,
//! the folding constant D_alpha, Bernoulli numbers) are computed in
//! `BigRational` and rounded once; independent pure-f64 routes exist for
//! cross-checking.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::accum::Neumaier;
use crate::points::Dyadic;
use crate::{Error, Result};

/// Upper limit on the smoothness parameter: the closed-form evaluator keeps
/// its per-call state in fixed stack arrays, and beyond this every table entry
/// underflows to zero anyway.
pub const MAX_ALPHA: u32 = 32;

// ---------------------------------------------------------------------------
// digit functions and Walsh characters
// ---------------------------------------------------------------------------

/// Number of 1 digits in the dyadic expansion of k.
#[inline]
pub fn digit_sum(k: u64) -> u32 {
    k.count_ones()
}

/// Membership in E: k >= 1 with an even digit sum. Indices outside E are
/// annihilated by the tent fold and never contribute to the criterion.
#[inline]
pub fn in_even_digit_set(k: u64) -> bool {
    k >= 1 && k.count_ones().is_multiple_of(2)
}

/// Sum of the min(alpha, digit count) largest 1-digit positions of k,
/// positions counted from 1 at the lowest bit. Requires k >= 1.
pub fn mu_alpha(alpha: u32, k: u64) -> u32 {
    assert!(alpha >= 1, "alpha must be at least 1");
    assert!(k >= 1, "mu_alpha is defined for k >= 1");
    let mut rest = k;
    let mut total = 0u32;
    for _ in 0..alpha {
        if rest == 0 {
            break;
        }
        let top = 64 - rest.leading_zeros();
        total += top;
        rest &= !(1u64 << (top - 1));
    }
    total
}

/// Walsh character wal_k(x) in {-1, +1}: digit i of k (from bit 0) pairs with
/// dyadic digit xi_{i+1} of x, and the sign is the parity of the paired
/// products. Digits of x beyond its precision count as zero.
pub fn walsh(k: u64, x: &Dyadic) -> i32 {
    let prec = x.precision();
    // bit i of `rev` is digit xi_{i+1} of x
    let rev = x.numerator().reverse_bits() >> (64 - prec);
    if (k & rev).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Product of per-coordinate Walsh characters.
pub fn walsh_product(ks: &[u64], xs: &[Dyadic]) -> i32 {
    assert_eq!(ks.len(), xs.len(), "dimension mismatch");
    ks.iter().zip(xs).map(|(&k, x)| walsh(k, x)).product()
}

// ---------------------------------------------------------------------------
// weight models
// ---------------------------------------------------------------------------

/// Coordinate weights gamma_u for subsets u of {1..s}.
///
/// `Product` stores gamma_j per coordinate and takes gamma_u as the product
/// over j in u (so gamma of the empty set is 1). `General` stores one value
/// per subset, indexed by bitmask with bit j-1 standing for coordinate j.
/// Construct through [`WeightModel::product`] / [`WeightModel::general`],
/// which validate the entries.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightModel {
    Product(Vec<f64>),
    General(GeneralWeights),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralWeights {
    s: usize,
    gammas: Vec<f64>,
}

impl GeneralWeights {
    pub fn s(&self) -> usize {
        self.s
    }

    /// All 2^s subset weights, mask-indexed.
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }
}

/// Subsets for general weights are enumerated explicitly, so cap the dimension.
pub const MAX_GENERAL_DIMENSION: usize = 20;

impl WeightModel {
    pub fn product(gammas: Vec<f64>) -> Result<WeightModel> {
        if gammas.is_empty() {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        validate_weights(&gammas)?;
        Ok(WeightModel::Product(gammas))
    }

    /// `gammas` holds 2^s entries; `gammas[0]` is the weight of the empty set.
    pub fn general(s: usize, gammas: Vec<f64>) -> Result<WeightModel> {
        if s == 0 || s > MAX_GENERAL_DIMENSION {
            return Err(Error::InvalidParameter(format!(
                "general weights support 1..={} coordinates, got {}",
                MAX_GENERAL_DIMENSION, s
            )));
        }
        if gammas.len() != 1 << s {
            return Err(Error::InvalidParameter(format!(
                "expected {} subset weights for s = {}, got {}",
                1u64 << s,
                s,
                gammas.len()
            )));
        }
        validate_weights(&gammas)?;
        Ok(WeightModel::General(GeneralWeights { s, gammas }))
    }

    pub fn dimension(&self) -> usize {
        match self {
            WeightModel::Product(g) => g.len(),
            WeightModel::General(g) => g.s,
        }
    }

    /// Weight of the subset encoded by `mask` (bit j-1 = coordinate j).
    pub fn gamma(&self, mask: u64) -> f64 {
        match self {
            WeightModel::Product(g) => {
                debug_assert!(mask >> g.len() == 0, "mask beyond dimension");
                let mut rest = mask;
                let mut prod = 1.0;
                while rest != 0 {
                    prod *= g[rest.trailing_zeros() as usize];
                    rest &= rest - 1;
                }
                prod
            }
            WeightModel::General(g) => g.gammas[mask as usize],
        }
    }

    pub fn gamma_empty(&self) -> f64 {
        self.gamma(0)
    }

    /// Per-coordinate weights when the model is a product, else `None`.
    pub fn product_gammas(&self) -> Option<&[f64]> {
        match self {
            WeightModel::Product(g) => Some(g),
            WeightModel::General(_) => None,
        }
    }
}

fn validate_weights(gammas: &[f64]) -> Result<()> {
    for &g in gammas {
        if !g.is_finite() || g < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "weights must be finite and nonnegative, got {}",
                g
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// exact constants and their float cross-checks
// ---------------------------------------------------------------------------

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn rat_pow(base: &BigRational, exp: u32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// 2^e - c as an exact rational's reciprocal building block.
fn inv_pow2_minus(e: u32, c: u32) -> BigRational {
    let denom = (BigInt::one() << e) - BigInt::from(c);
    BigRational::new(BigInt::one(), denom)
}

fn check_alpha(alpha: u32) -> Result<()> {
    if alpha < 2 {
        return Err(Error::AlphaUnsupported(alpha));
    }
    Ok(())
}

fn check_lambda(alpha: u32, lambda: f64) -> Result<()> {
    let lo = 1.0 / (2.0 * alpha as f64);
    if !(lambda > lo && lambda <= 1.0) {
        return Err(Error::LambdaOutOfRange { lambda, alpha });
    }
    Ok(())
}

/// Exact A_{alpha,1,1} = sum over k in E of 2^{-2 mu_alpha(floor(k/2))}: the
/// total one-dimensional digit-weight mass. Also equals omega_alpha(0).
pub fn a_lambda_1_exact(alpha: u32) -> Result<BigRational> {
    check_alpha(alpha)?;
    let mut total = BigRational::zero();
    let mut prod = BigRational::one();
    for v in 1..alpha {
        prod *= inv_pow2_minus(2 * v, 1);
        total += prod.clone();
    }
    // prod now carries v = alpha - 1 factors
    total += inv_pow2_minus(2 * alpha, 2) * prod;
    Ok(total)
}

/// Exact A_{alpha,1,2}: the companion mass where the smallest weighted digit
/// position also pays for the unweighted positions beneath it.
pub fn a_lambda_2_exact(alpha: u32) -> Result<BigRational> {
    check_alpha(alpha)?;
    let four = rat(4, 1);
    let mut total = BigRational::zero();
    let mut prod = BigRational::one();
    let mut i = 0u32;
    for v in 1..=(alpha - 1) / 2 {
        while i < 2 * v {
            i += 1;
            prod *= &four * inv_pow2_minus(2 * i, 1);
        }
        total += prod.clone();
    }
    let mut full = BigRational::one();
    for i in 1..alpha {
        full *= &four * inv_pow2_minus(2 * i, 1);
    }
    total += &four * inv_pow2_minus(2 * alpha, 2) * full;
    Ok(total)
}

/// Float route for A_{alpha,lambda,1}, valid for lambda in (1/(2 alpha), 1].
pub fn a_lambda_1(alpha: u32, lambda: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_lambda(alpha, lambda)?;
    let mut total = 0.0;
    let mut prod = 1.0;
    for v in 1..alpha {
        prod /= (2f64).powf(2.0 * lambda * v as f64) - 1.0;
        total += prod;
    }
    total += prod / ((2f64).powf(2.0 * lambda * alpha as f64) - 2.0);
    Ok(total)
}

/// Float route for A_{alpha,lambda,2}, valid for lambda in (1/(2 alpha), 1].
pub fn a_lambda_2(alpha: u32, lambda: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_lambda(alpha, lambda)?;
    let base = (2f64).powf(2.0 * lambda);
    let mut total = 0.0;
    let mut prod = 1.0;
    let mut i = 0u32;
    for v in 1..=(alpha - 1) / 2 {
        while i < 2 * v {
            i += 1;
            prod *= base / ((2f64).powf(2.0 * lambda * i as f64) - 1.0);
        }
        total += prod;
    }
    let mut full = 1.0;
    for i in 1..alpha {
        full *= base / ((2f64).powf(2.0 * lambda * i as f64) - 1.0);
    }
    total += full * base / ((2f64).powf(2.0 * lambda * alpha as f64) - 2.0);
    Ok(total)
}

fn c_tau_exact(tau: u32) -> BigRational {
    if tau == 1 {
        rat(1, 2)
    } else {
        inv_pow2_minus(tau, 0) * rat_pow(&rat(5, 3), tau - 2)
    }
}

/// Exact folding constant D_alpha: the tent fold maps the kernel's digit
/// weights into ones dominated by D_alpha times the unfolded weights, and the
/// maximum over the split position nu below is tight.
pub fn d_alpha_exact(alpha: u32) -> Result<BigRational> {
    check_alpha(alpha)?;
    let ctil = inv_pow2_minus(2 * alpha - 1, 0) * rat_pow(&rat(5, 3), 2 * alpha - 2);
    let mut best: Option<BigRational> = None;
    for nu in 1..=alpha {
        let mut val = BigRational::zero();
        for t in nu..=alpha {
            let c = c_tau_exact(t);
            val += &c * &c * inv_pow2_minus(2 * (t - nu), 0);
        }
        val += &ctil * inv_pow2_minus(2 * (alpha - nu), 0);
        best = match best {
            Some(b) if b >= val => Some(b),
            _ => Some(val),
        };
    }
    Ok(best.expect("nonempty range"))
}

/// D_alpha rounded to f64 (exact route).
pub fn d_alpha(alpha: u32) -> Result<f64> {
    Ok(ratio_to_f64(&d_alpha_exact(alpha)?))
}

/// Independent pure-f64 route for D_alpha, used to cross-check the exact one.
pub fn d_alpha_float(alpha: u32) -> Result<f64> {
    check_alpha(alpha)?;
    let c = |tau: u32| -> f64 {
        if tau == 1 {
            0.5
        } else {
            (2f64).powi(-(tau as i32)) * (5f64 / 3f64).powi(tau as i32 - 2)
        }
    };
    let ctil = (2f64).powi(1 - 2 * alpha as i32) * (5f64 / 3f64).powi(2 * alpha as i32 - 2);
    let mut best = f64::NEG_INFINITY;
    for nu in 1..=alpha {
        let mut val = 0.0;
        for t in nu..=alpha {
            val += c(t) * c(t) * (2f64).powi(-2 * (t - nu) as i32);
        }
        val += ctil * (2f64).powi(-2 * (alpha - nu) as i32);
        best = best.max(val);
    }
    Ok(best)
}

/// Round an exact rational to the nearest f64 (numerator / denominator in
/// extended precision, saturating on overflow).
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

// ---------------------------------------------------------------------------
// omega: closed form and series oracle
// ---------------------------------------------------------------------------

/// Precomputed tables for evaluating omega_alpha at any multiple of 2^{-m'}
/// in O(alpha m') per call.
///
/// Writing x = l / 2^{m'} with digits xi_1..xi_{m'}, the closed form groups
/// the series by the top digit positions of k. Two families of descending
/// position tuples over {1, ..., m'-1} appear: unconstrained tuples with
/// digit signs (-1)^{xi_{a+1}} 4^{-a} per position a, and "anchored" tuples
/// whose smallest position a_t additionally carries 2^{a_t - 1} and must obey
/// a_t <= R, where R is the length of the leading digit run of x (the largest
/// a such that xi_2 = ... = xi_a = xi_1). At the all-ones point (l = 2^{m'}-1)
/// one anchored tuple with smallest position m' survives truncation and
/// contributes the extra term stored in `allones_extra`.
#[derive(Clone, Debug)]
pub struct OmegaTables {
    alpha: u32,
    mprime: u32,
    /// U_t = 2^{-2t(m'-1)} prod_{i=1..t} 1/(4^i - 1), t = 0..alpha-1
    u: Vec<f64>,
    /// sum_{v=t}^{alpha-1} (-1)^{v xi1} U_{v-t}, for xi1 = 0 and 1
    ut0: Vec<f64>,
    ut1: Vec<f64>,
    omega_zero: f64,
    allones_extra: f64,
}

impl OmegaTables {
    pub fn new(alpha: u32, mprime: u32) -> Result<OmegaTables> {
        check_alpha(alpha)?;
        if alpha > MAX_ALPHA {
            return Err(Error::InvalidParameter(format!(
                "alpha {} exceeds the supported maximum {}",
                alpha, MAX_ALPHA
            )));
        }
        if mprime == 0 || mprime > 63 {
            return Err(Error::InvalidParameter(format!(
                "precision m' = {} out of range 1..=63",
                mprime
            )));
        }
        let mut u = vec![1.0f64; alpha as usize];
        for t in 1..alpha as usize {
            u[t] = u[t - 1] / ((4f64).powi(t as i32) - 1.0);
        }
        for (t, ut) in u.iter_mut().enumerate() {
            *ut *= (2f64).powi(-2 * t as i32 * (mprime as i32 - 1));
        }
        let mut ut0 = vec![0.0f64; alpha as usize];
        let mut ut1 = vec![0.0f64; alpha as usize];
        for t in 0..alpha as usize {
            for v in t..alpha as usize {
                ut0[t] += u[v - t];
                ut1[t] += if v % 2 == 1 { -u[v - t] } else { u[v - t] };
            }
        }
        let omega_zero = ratio_to_f64(&a_lambda_1_exact(alpha)?);
        let allones_extra =
            (2f64).powi(-(mprime as i32 + 1)) * (4f64).powi(1 - alpha as i32) * u[alpha as usize - 1];
        Ok(OmegaTables { alpha, mprime, u, ut0, ut1, omega_zero, allones_extra })
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn mprime(&self) -> u32 {
        self.mprime
    }

    /// omega_alpha(0), the full digit-weight mass A_{alpha,1,1}.
    pub fn omega_zero(&self) -> f64 {
        self.omega_zero
    }

    /// omega_alpha(l / 2^{m'}) for 0 <= l < 2^{m'}.
    pub fn omega(&self, l: u64) -> f64 {
        assert!(l >> self.mprime == 0, "numerator out of range");
        if l == 0 {
            return self.omega_zero;
        }
        let alpha = self.alpha as usize;
        let mprime = self.mprime;
        let xi1 = ((l >> (mprime - 1)) & 1) as usize;
        // R = leading run length: largest a with xi_2..xi_a all equal to xi_1
        let mut run = 1u32;
        for i in 2..=mprime {
            if (l >> (mprime - i)) & 1 == xi1 as u64 {
                run = i;
            } else {
                break;
            }
        }
        // v[d]: signed 4^{-a} products over unconstrained d-tuples;
        // t[d]: same over anchored d-tuples (smallest position <= R, carrying
        // the extra 2^{a-1}). Positions are consumed in increasing order, so
        // "anchored" tuples start at T[1] and only ever extend upward.
        let mut v = [0.0f64; MAX_ALPHA as usize + 1];
        let mut t = [0.0f64; MAX_ALPHA as usize + 1];
        v[0] = 1.0;
        let mut quarter = 1.0f64;
        let mut half = 0.5f64;
        for b in 1..mprime {
            quarter *= 0.25;
            half *= 0.5;
            let neg = (l >> (mprime - 1 - b)) & 1 == 1;
            let f = if neg { -quarter } else { quarter };
            for d in (2..=alpha).rev() {
                t[d] += f * t[d - 1];
            }
            if b <= run {
                t[1] += if neg { -half } else { half };
            }
            for d in (1..alpha).rev() {
                v[d] += f * v[d - 1];
            }
        }
        let ut = if xi1 == 1 { &self.ut1 } else { &self.ut0 };
        let mut res = ut[0] - 1.0;
        for d in 1..alpha {
            res += ut[d] * v[d];
        }
        let mut second = 0.0;
        for (uv, tv) in self.u[..alpha].iter().rev().zip(&t[1..=alpha]) {
            second += uv * tv;
        }
        if xi1 == 1 && run == mprime {
            second += self.allones_extra;
        }
        if xi1 == 1 && self.alpha % 2 == 1 {
            res - second
        } else {
            res + second
        }
    }
}

/// Partial Walsh series for omega_alpha at x, truncated at k < k_max, plus a
/// bound on the discarded tail. Independent of the closed form; quadratic in
/// cost, intended as an oracle.
pub fn omega_series(alpha: u32, x: &Dyadic, k_max: u64) -> (f64, f64) {
    assert!(alpha >= 2 && k_max >= 4);
    let mut acc = Neumaier::new();
    for k in 1..k_max {
        if !in_even_digit_set(k) {
            continue;
        }
        let term = (2f64).powi(-2 * mu_alpha(alpha, k >> 1) as i32);
        acc.add(if walsh(k, x) > 0 { term } else { -term });
    }
    (acc.value(), series_tail_bound(alpha, k_max))
}

/// The same truncated series for every numerator l at once: terms are first
/// bucketed by k mod 2^{m'} (wal_k only sees k's low m' digits on the grid),
/// then each grid point takes one short signed sum over buckets. One O(k_max)
/// scan replaces 2^{m'} of them; the truncation (and its tail bound) is
/// identical to [`omega_series`].
pub fn omega_series_table(alpha: u32, mprime: u32, k_max: u64) -> (Vec<f64>, f64) {
    assert!(alpha >= 2 && k_max >= 4);
    assert!((1..=20).contains(&mprime), "table size 2^{{m'}} must stay addressable");
    let len = 1usize << mprime;
    let mask = (len - 1) as u64;
    let mut buckets = vec![Neumaier::new(); len];
    for k in 1..k_max {
        if !in_even_digit_set(k) {
            continue;
        }
        let term = (2f64).powi(-2 * mu_alpha(alpha, k >> 1) as i32);
        buckets[(k & mask) as usize].add(term);
    }
    let weights: Vec<f64> = buckets.iter().map(Neumaier::value).collect();
    let table = (0..len as u64)
        .map(|l| {
            let x = Dyadic::new(l, mprime);
            let mut acc = Neumaier::new();
            for (r, &w) in weights.iter().enumerate() {
                acc.add(if walsh(r as u64, &x) > 0 { w } else { -w });
            }
            acc.value()
        })
        .collect();
    (table, series_tail_bound(alpha, k_max))
}

/// Upper bound on sum over k >= k_max, k in E, of 2^{-2 mu_alpha(floor(k/2))}.
///
/// Grouping by the top digit position T of k: floor(k/2) then has top position
/// T - 1, exactly one parity choice of the lowest digit lands in E, and the
/// remaining digit mass is bounded by Z(alpha - 1) 4^{-(T-1)} with Z the
/// unrestricted digit-weight envelope below. Summing the geometric series over
/// T >= bitlen(k_max) gives the factor 4/3.
pub fn series_tail_bound(alpha: u32, k_max: u64) -> f64 {
    assert!(alpha >= 2 && k_max >= 2);
    let bitlen = 64 - k_max.leading_zeros();
    4.0 / 3.0 * z_envelope(alpha - 1) * (4f64).powi(1 - bitlen as i32)
}

/// Z(gamma) = sum over all k >= 0 of 2^{-2 mu_gamma(k)} (Z(1) = 3/2).
fn z_envelope(gamma: u32) -> f64 {
    assert!(gamma >= 1);
    let mut total = 1.0;
    let mut prod = 1.0;
    for w in 1..gamma {
        prod /= (4f64).powi(w as i32) - 1.0;
        total += prod;
    }
    let mut full = 1.0;
    for i in 1..gamma {
        full /= (4f64).powi(i as i32) - 1.0;
    }
    total + full / ((4f64).powi(gamma as i32) - 2.0)
}

// ---------------------------------------------------------------------------
// Bernoulli polynomials and the reproducing kernel
// ---------------------------------------------------------------------------

fn binomial(n: u32, k: u32) -> BigInt {
    let k = k.min(n - k);
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

/// B_0..B_{n_max} by the defining recurrence (B_1 = -1/2 convention).
fn bernoulli_numbers(n_max: u32) -> Vec<BigRational> {
    let mut b: Vec<BigRational> = vec![BigRational::one()];
    for n in 1..=n_max {
        let mut acc = BigRational::zero();
        for (j, bj) in b.iter().enumerate() {
            acc += BigRational::from_integer(binomial(n + 1, j as u32)) * bj;
        }
        b.push(-acc / BigRational::from_integer(BigInt::from(n + 1)));
    }
    b
}

/// Descending-power coefficients of B_n(x) / divisor, rounded to f64.
fn bernoulli_coeffs(n: u32, numbers: &[BigRational], divisor: &BigRational) -> Vec<f64> {
    (0..=n)
        .map(|j| {
            let c = BigRational::from_integer(binomial(n, j)) * &numbers[j as usize] / divisor;
            ratio_to_f64(&c)
        })
        .collect()
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().skip(1).fold(coeffs[0], |acc, &c| acc * x + c)
}

/// Bernoulli polynomial B_n(x). Coefficients are rebuilt per call; hoist into
/// a [`Kernel1`] or a local table in hot loops.
pub fn bernoulli_poly(n: u32, x: f64) -> f64 {
    let numbers = bernoulli_numbers(n);
    horner(&bernoulli_coeffs(n, &numbers, &BigRational::one()), x)
}

/// One-dimensional reproducing kernel for smoothness alpha:
///
/// ```text
///     K_1(x, y) = sum_{tau=1}^{alpha} B_tau(x) B_tau(y) / (tau!)^2
///                 + (-1)^{alpha+1} B_{2 alpha}(|x - y|) / (2 alpha)!
/// ```
///
/// Polynomial pieces are exact-rational at build time, so evaluation is a few
/// Horner passes. Arguments may touch 1 (the tent fold attains it); the
/// polynomials extend continuously.
#[derive(Clone, Debug)]
pub struct Kernel1 {
    alpha: u32,
    /// coefficients of B_tau(x)/tau!, tau = 1..=alpha, descending powers
    scaled_tau: Vec<Vec<f64>>,
    /// coefficients of B_{2 alpha}(x)/(2 alpha)!, descending powers
    scaled_2alpha: Vec<f64>,
    sign: f64,
}

impl Kernel1 {
    pub fn new(alpha: u32) -> Result<Kernel1> {
        if alpha == 0 {
            return Err(Error::AlphaUnsupported(0));
        }
        let numbers = bernoulli_numbers(2 * alpha);
        let mut fact = BigRational::one();
        let mut scaled_tau = Vec::with_capacity(alpha as usize);
        for tau in 1..=alpha {
            fact *= BigRational::from_integer(BigInt::from(tau));
            scaled_tau.push(bernoulli_coeffs(tau, &numbers, &fact));
        }
        for tau in alpha + 1..=2 * alpha {
            fact *= BigRational::from_integer(BigInt::from(tau));
        }
        let scaled_2alpha = bernoulli_coeffs(2 * alpha, &numbers, &fact);
        let sign = if alpha.is_multiple_of(2) { -1.0 } else { 1.0 };
        Ok(Kernel1 { alpha, scaled_tau, scaled_2alpha, sign })
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
        let mut sum = self.sign * horner(&self.scaled_2alpha, (x - y).abs());
        for coeffs in &self.scaled_tau {
            sum += horner(coeffs, x) * horner(coeffs, y);
        }
        sum
    }
}

/// s-dimensional weighted kernel: sum over subsets u of gamma_u times the
/// product of K_1 over coordinates in u (empty subset included). Product
/// weights collapse to prod_j (1 + gamma_j K_1(x_j, y_j)).
pub fn kernel_s(k1: &Kernel1, weights: &WeightModel, x: &[f64], y: &[f64]) -> f64 {
    let s = weights.dimension();
    assert!(x.len() == s && y.len() == s, "dimension mismatch");
    match weights {
        WeightModel::Product(gammas) => {
            let mut prod = 1.0;
            for j in 0..s {
                prod *= 1.0 + gammas[j] * k1.eval(x[j], y[j]);
            }
            prod
        }
        WeightModel::General(g) => {
            let mut k1v = [0.0f64; MAX_GENERAL_DIMENSION];
            for j in 0..s {
                k1v[j] = k1.eval(x[j], y[j]);
            }
            let mut total = 0.0;
            for mask in 0..(1u64 << s) {
                let mut prod = g.gammas[mask as usize];
                let mut rest = mask;
                while rest != 0 {
                    prod *= k1v[rest.trailing_zeros() as usize];
                    rest &= rest - 1;
                }
                total += prod;
            }
            total
        }
    }
}
