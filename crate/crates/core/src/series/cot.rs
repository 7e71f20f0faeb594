use num::rational::BigRational;
use num::{BigInt, Zero};

use super::PuiseuxSeries;
use crate::scalar::{exact, Exact};

/// Coefficients `b_k` of `x cot x = sum_k b_k x^{2k}`, `k = 0..count`.
///
/// `cot` solves the Riccati equation `w' = -1 - w^2`; matching powers gives
/// `b_0 = 1`, `3 b_1 = -1` and `(2k + 1) b_k = -sum_{i=1}^{k-1} b_i b_{k-i}`,
/// which is the Bernoulli-number expansion in recursive form.
pub fn cot_coefficients(count: usize) -> Vec<BigRational> {
    let mut b: Vec<BigRational> = Vec::with_capacity(count);
    for k in 0..count {
        let v = match k {
            0 => BigRational::from_integer(BigInt::from(1)),
            1 => BigRational::new(BigInt::from(-1), BigInt::from(3)),
            _ => {
                let mut acc = BigRational::zero();
                for i in 1..k {
                    acc += &b[i] * &b[k - i];
                }
                -acc / BigRational::from_integer(BigInt::from(2 * k as i64 + 1))
            }
        };
        b.push(v);
    }
    b
}

/// Laurent series of `cot x` about 0 through `x^K`, exact.
pub fn cot_laurent(k: i64) -> PuiseuxSeries<Exact> {
    assert!(k >= 1, "truncation must be at least 1");
    let count = ((k + 1) / 2 + 1) as usize;
    let b = cot_coefficients(count);
    let mut coeffs = vec![Exact::zero(); (k + 2) as usize];
    for (i, bi) in b.into_iter().enumerate() {
        let idx = 2 * i as i64 - 1; // power of x
        if idx <= k {
            coeffs[(idx + 1) as usize] = exact(bi, BigRational::zero());
        }
    }
    PuiseuxSeries::with_truncation(1, -1, coeffs, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::big_ratio;

    #[test]
    fn principal_part_and_first_terms() {
        let c = cot_laurent(7);
        let re = |j| c.coeff(j).unwrap().re;
        assert_eq!(re(-1), big_ratio(1, 1));
        assert_eq!(re(1), big_ratio(-1, 3));
        assert_eq!(re(3), big_ratio(-1, 45));
        assert_eq!(re(5), big_ratio(-2, 945));
        assert_eq!(re(7), big_ratio(-1, 4725));
        for j in [0, 2, 4, 6] {
            assert!(c.coeff(j).unwrap().is_zero());
        }
        assert_eq!(c.truncation(), 7);
    }
}
