//! Watermark strength calculators: the probability that a non-watermarked
//! layout carries the signature by coincidence.
//!
//! All tails are evaluated in log-space with exact integer binomial
//! coefficients up to n = 64 and log-gamma beyond, so values far below
//! 1e-300 in intermediate form survive to the final exponentiation.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StrengthError {
    #[error("domain error: {0}")]
    DomainError(String),
}

/// ln C(n, k): exact integer arithmetic for n <= 64, log-gamma beyond.
fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    if n <= 64 {
        let k = k.min(n - k);
        let mut num: u128 = 1;
        let mut den: u128 = 1;
        for i in 0..k {
            num *= (n - i) as u128;
            den *= (i + 1) as u128;
            let g = gcd(num, den);
            num /= g;
            den /= g;
        }
        ((num / den) as f64).ln()
    } else {
        libm::lgamma((n + 1) as f64) - libm::lgamma((k + 1) as f64) - libm::lgamma((n - k + 1) as f64)
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// log(sum(exp(t))) without overflow.
fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn check_tail_domain(n: u64, x: u64, p: f64) -> Result<(), StrengthError> {
    if x > n {
        return Err(StrengthError::DomainError(format!("threshold {x} exceeds population {n}")));
    }
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(StrengthError::DomainError(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Binomial upper tail: probability that `x` or more of `n` independent
/// trials at success probability `p` match the watermarking condition.
pub fn strength_gw(n: u64, x: u64, p: f64) -> Result<f64, StrengthError> {
    check_tail_domain(n, x, p)?;
    if x == 0 {
        return Ok(1.0);
    }
    if p == 0.0 {
        return Ok(0.0); // x >= 1 cannot happen without successes
    }
    if p == 1.0 {
        return Ok(1.0); // all n trials succeed, n >= x
    }
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    let terms: Vec<f64> = (x..=n)
        .map(|i| ln_binomial(n, i) + i as f64 * ln_p + (n - i) as f64 * ln_q)
        .collect();
    Ok(log_sum_exp(&terms).exp().min(1.0))
}

/// Two-axis displacement-watermark strength: the product of the x- and
/// y-axis upper tails.
#[allow(clippy::too_many_arguments)]
pub fn strength_dw(
    n_x: u64,
    n_y: u64,
    x: u64,
    y: u64,
    p_x: f64,
    p_y: f64,
) -> Result<f64, StrengthError> {
    let cx = strength_gw(n_x, x, p_x)?;
    let cy = strength_gw(n_y, y, p_y)?;
    Ok(strength_combined(cx, cy))
}

/// Product of two strengths, composed in log-space so values down to the
/// smallest representable magnitudes survive.
pub fn strength_combined(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    if a == 1.0 {
        return b;
    }
    if b == 1.0 {
        return a;
    }
    (a.ln() + b.ln()).exp()
}

/// Empirical strength, evaluated exactly as printed:
/// `sum_{i=0}^{x} C(n, i) p^i (1-p)^(x-i)`.
///
/// The `(1-p)^(x-i)` exponent makes this a non-standard form that can
/// exceed 1 (e.g. n=2, x=1, p=0.5 gives 1.5); see
/// [`strength_empirical_corrected`] for the standard lower tail.
pub fn strength_empirical(n: u64, x: u64, p: f64) -> Result<f64, StrengthError> {
    check_tail_domain(n, x, p)?;
    if p == 0.0 {
        return Ok(1.0); // only the i = 0 term survives, with value 1
    }
    let mut total = 0.0f64;
    for i in 0..=x {
        let q_exp = (x - i) as f64;
        let term = if p == 1.0 {
            if i == x {
                ln_binomial(n, i)
            } else {
                f64::NEG_INFINITY
            }
        } else {
            ln_binomial(n, i) + i as f64 * p.ln() + q_exp * (1.0 - p).ln()
        };
        total += term.exp();
    }
    Ok(total)
}

/// Standard binomial lower tail: `sum_{i=0}^{x} C(n, i) p^i (1-p)^(n-i)`.
pub fn strength_empirical_corrected(n: u64, x: u64, p: f64) -> Result<f64, StrengthError> {
    check_tail_domain(n, x, p)?;
    if p == 0.0 {
        return Ok(1.0);
    }
    if p == 1.0 {
        return Ok(if x == n { 1.0 } else { 0.0 });
    }
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    let terms: Vec<f64> = (0..=x)
        .map(|i| ln_binomial(n, i) + i as f64 * ln_p + (n - i) as f64 * ln_q)
        .collect();
    Ok(log_sum_exp(&terms).exp().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Enumeration oracle: walk all 2^n outcome vectors and accumulate the
    /// probability of those with at least `x` successes.
    pub(crate) fn upper_tail_bruteforce(n: u64, x: u64, p: f64) -> f64 {
        assert!(n <= 20);
        let mut total = 0.0;
        for mask in 0u64..(1 << n) {
            let ones = mask.count_ones() as u64;
            if ones >= x {
                total += p.powi(ones as i32) * (1.0 - p).powi((n - ones) as i32);
            }
        }
        total
    }

    #[test]
    fn full_support_tail_is_one() {
        assert_eq!(strength_gw(10, 0, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn single_term_closed_form() {
        let v = strength_gw(10, 10, 0.5).unwrap();
        assert!((v - 9.765625e-4).abs() < 1e-18, "{v}");
    }

    #[test]
    fn hand_summed_tail() {
        // C(10,8)+C(10,9)+C(10,10) = 45+10+1 = 56 over 1024
        let v = strength_gw(10, 8, 0.5).unwrap();
        assert!((v - 56.0 / 1024.0).abs() < 1e-15, "{v}");
    }

    #[test]
    fn fifty_bit_row_parity_strength() {
        let v = strength_gw(50, 50, 0.5).unwrap();
        assert!((8.7e-16..=9.0e-16).contains(&v), "{v}");
    }

    #[test]
    fn matches_bruteforce_oracle() {
        let mut rng = crate::rng::DetRng::new(17, crate::rng::Stream::AttackSla);
        for _ in 0..200 {
            let n = 1 + rng.below(12);
            let x = rng.below(n + 1);
            let p = rng.unit_f64();
            let fast = strength_gw(n, x, p).unwrap();
            let slow = upper_tail_bruteforce(n, x, p);
            let denom = slow.abs().max(1e-300);
            assert!(
                (fast - slow).abs() / denom < 1e-12,
                "n={n} x={x} p={p}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn monotone_in_threshold_and_probability() {
        for n in [5u64, 17, 50] {
            let mut prev = f64::INFINITY;
            for x in 0..=n {
                let v = strength_gw(n, x, 0.5).unwrap();
                assert!(v <= prev * (1.0 + 1e-12));
                prev = v;
            }
        }
        // increasing in p on [0, 0.5] for x > n*p
        let mut prev = 0.0;
        for k in 0..=10 {
            let p = 0.05 * k as f64;
            let v = strength_gw(20, 15, p).unwrap();
            assert!(v >= prev - 1e-15, "p={p}");
            prev = v;
        }
    }

    #[test]
    fn dw_product_and_symmetry() {
        assert_eq!(strength_dw(5, 7, 0, 0, 0.4, 0.4).unwrap(), 1.0);
        let v = strength_dw(1, 1, 1, 1, 0.5, 0.5).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        let a = strength_dw(9, 4, 3, 2, 0.3, 0.7).unwrap();
        let b = strength_dw(4, 9, 2, 3, 0.7, 0.3).unwrap();
        assert!((a - b).abs() < 1e-18);
    }

    #[test]
    fn combined_identity_and_log_space() {
        assert_eq!(strength_combined(1.0, 0.25), 0.25);
        assert_eq!(strength_combined(0.25, 1.0), 0.25);
        assert_eq!(strength_combined(0.0, 0.5), 0.0);
        let v = strength_combined(1e-21, 1e-81);
        assert!((v - 1e-102).abs() / 1e-102 < 1e-12, "{v}");
        // the published composition: 9.09e-53 * 8.08e-62 ~ 7.35e-114
        let c = strength_combined(9.09e-53, 8.08e-62);
        assert!((c - 7.35e-114).abs() / 7.35e-114 < 5e-3, "{c}");
    }

    #[test]
    fn empirical_form_is_verbatim() {
        // p=0 collapses to the single i=0 term
        assert_eq!(strength_empirical(50, 0, 0.0).unwrap(), 1.0);
        assert_eq!(strength_empirical(50, 7, 0.0).unwrap(), 1.0);
        // the printed formula can exceed 1: n=2, x=1, p=0.5 -> 1.5
        let v = strength_empirical(2, 1, 0.5).unwrap();
        assert!((v - 1.5).abs() < 1e-12, "{v}");
        // the corrected lower tail stays a probability
        let c = strength_empirical_corrected(2, 1, 0.5).unwrap();
        assert!((c - 0.75).abs() < 1e-12, "{c}");
    }

    #[test]
    fn domain_errors() {
        assert!(strength_gw(5, 6, 0.5).is_err());
        assert!(strength_gw(5, 3, 1.5).is_err());
        assert!(strength_empirical(5, 6, 0.5).is_err());
    }

    #[test]
    fn ln_binomial_exact_versus_gamma() {
        // crossover consistency: n=64 exact vs n=65 gamma path stay smooth
        let exact = ln_binomial(64, 32);
        let gamma = libm::lgamma(65.0) - 2.0 * libm::lgamma(33.0);
        assert!((exact - gamma).abs() < 1e-9);
    }
}
