//! Root finding for the small univariate polynomials that come out of the
//! leading-order and resonance analyses (degree rarely above 8).

use crate::scalar::C64;

/// Evaluates `sum coeffs[k] x^k` by Horner's rule.
pub fn horner(coeffs: &[C64], x: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

fn derivative(coeffs: &[C64]) -> Vec<C64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

/// All complex roots (with multiplicity) of the polynomial with ascending
/// coefficients `coeffs`. Trailing zero coefficients are ignored. Returns an
/// empty vector for constants (including the zero polynomial).
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let mut c: Vec<C64> = coeffs.to_vec();
    while c.last().is_some_and(|z| *z == C64::new(0.0, 0.0)) {
        c.pop();
    }
    if c.len() <= 1 {
        return Vec::new();
    }
    // Zero roots are split off exactly.
    let zeros = c.iter().take_while(|z| **z == C64::new(0.0, 0.0)).count();
    let c: Vec<C64> = c[zeros..].to_vec();
    let mut roots = vec![C64::new(0.0, 0.0); zeros];
    let deg = c.len() - 1;
    if deg == 0 {
        return roots;
    }
    let lead = c[deg];
    let monic: Vec<C64> = c.iter().map(|z| z / lead).collect();
    if deg == 1 {
        roots.push(-monic[0]);
        return roots;
    }

    let radius = 1.0
        + monic[..deg]
            .iter()
            .map(|z| z.norm())
            .fold(0.0_f64, f64::max);
    let seed = C64::new(0.4, 0.9);
    let mut z: Vec<C64> = (0..deg)
        .map(|k| seed.powu(k as u32) * (radius / 2.0).max(0.5))
        .collect();
    for _ in 0..2000 {
        let mut delta = 0.0_f64;
        for i in 0..deg {
            let num = horner(&monic, z[i]);
            let mut den = C64::new(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() == 0.0 {
                z[i] += C64::new(1e-8, 1e-8);
                delta = f64::INFINITY;
                continue;
            }
            let step = num / den;
            z[i] -= step;
            delta = delta.max(step.norm() / (1.0 + z[i].norm()));
        }
        if delta < 1e-15 {
            break;
        }
    }

    let dmonic = derivative(&monic);
    for r in z.iter_mut() {
        for _ in 0..8 {
            let f = horner(&monic, *r);
            let df = horner(&dmonic, *r);
            if df.norm() == 0.0 {
                break;
            }
            let step = f / df;
            let next = *r - step;
            if horner(&monic, next).norm() <= f.norm() {
                *r = next;
            } else {
                break;
            }
            if step.norm() <= 1e-16 * (1.0 + r.norm()) {
                break;
            }
        }
    }
    roots.extend(z);
    roots
}

/// Deterministic ordering for reported roots: by argument in (-pi, pi],
/// then by modulus. Values are rounded first so that `-0.0`/`+0.0` noise
/// cannot reorder them.
pub fn sort_roots(roots: &mut [C64]) {
    let key = |z: &C64| {
        let re = (z.re * 1e9).round() / 1e9;
        let im = (z.im * 1e9).round() / 1e9;
        let arg = if re == 0.0 && im == 0.0 { 0.0 } else { im.atan2(re) };
        let arg = if arg <= -std::f64::consts::PI + 1e-12 {
            std::f64::consts::PI
        } else {
            arg
        };
        (arg, (re * re + im * im).sqrt())
    };
    roots.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });
}
