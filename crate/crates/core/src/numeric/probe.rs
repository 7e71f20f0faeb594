use num::Zero;
use serde::Serialize;

use super::integrate::{integrate, ComplexPath, ComplexTrajectory, Halt, Sample, System};
use crate::error::{Error, Result};
use crate::roots::poly_roots;
use crate::scalar::C64;

/// Samples used for the quadratic fit of `alpha^2`.
const FIT_SAMPLES: usize = 12;
/// Minimum sample count inside the exponent window.
const MIN_EXPONENT_SAMPLES: usize = 8;
const MIN_R2: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    ZeroOfAlpha,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub nu: f64,
    pub stderr: f64,
    /// Approximate 95% interval, `nu +- 2 stderr`.
    pub ci: (f64, f64),
    pub r2: f64,
    /// Distance range `[d_lo, d_hi]` of the samples used.
    pub window: (f64, f64),
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularityProbe {
    pub kind: ProbeKind,
    pub t_star: Option<C64>,
    pub exponent: Option<ExponentFit>,
    /// Why the exponent is missing, when it is.
    pub exponent_note: Option<String>,
    /// Distance range of the samples used to locate `t_star`.
    pub fit_window: Option<(f64, f64)>,
}

impl SingularityProbe {
    fn none() -> Self {
        SingularityProbe {
            kind: ProbeKind::None,
            t_star: None,
            exponent: None,
            exponent_note: None,
            fit_window: None,
        }
    }
}

/// Gaussian elimination with partial pivoting on a small complex system.
fn solve_small(mut m: Vec<Vec<C64>>, mut rhs: Vec<C64>) -> Option<Vec<C64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm()))?;
        if m[piv][col].norm() == 0.0 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            let pivot_row = m[col].clone();
            for (dst, v) in m[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * v;
            }
            let v = rhs[col];
            rhs[r] -= f * v;
        }
    }
    let mut x = vec![C64::zero(); n];
    for r in (0..n).rev() {
        let s: C64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    Some(x)
}

/// Least-squares polynomial of degree `deg` through `(x, y)`, ascending.
fn lsq_poly(xs: &[C64], ys: &[C64], deg: usize) -> Option<Vec<C64>> {
    let m = deg + 1;
    let mut ata = vec![vec![C64::zero(); m]; m];
    let mut aty = vec![C64::zero(); m];
    for (x, y) in xs.iter().zip(ys) {
        let pw: Vec<C64> = (0..m).map(|k| x.powi(k as i32)).collect();
        for i in 0..m {
            for j in 0..m {
                ata[i][j] += pw[i].conj() * pw[j];
            }
            aty[i] += pw[i].conj() * y;
        }
    }
    solve_small(ata, aty)
}

fn distinct_tail(samples: &[Sample], count: usize) -> Vec<Sample> {
    let mut out: Vec<Sample> = Vec::with_capacity(count);
    for s in samples.iter().rev() {
        if out.last().is_some_and(|l: &Sample| l.t == s.t) {
            continue;
        }
        out.push(*s);
        if out.len() == count {
            break;
        }
    }
    out.reverse();
    out
}

/// Locates a zero of `alpha` ahead of the trajectory end by fitting a
/// quadratic to `alpha^2` on the last samples.
pub fn detect_singularity(traj: &ComplexTrajectory) -> SingularityProbe {
    if traj.system.is_some_and(|s| s.is_linear()) {
        return SingularityProbe::none();
    }
    let tail = distinct_tail(&traj.samples, FIT_SAMPLES);
    if tail.len() < 4 {
        return SingularityProbe::none();
    }
    let halted = matches!(traj.halt, Halt::NearSingular { .. } | Halt::StepUnderflow { .. });
    let mags: Vec<f64> = tail.iter().map(|s| s.y.norm()).collect();
    let decreasing = mags.windows(2).all(|w| w[1] < w[0]) && mags[mags.len() - 1] < (1.0 - 1e-6) * mags[0];
    if !halted && !decreasing {
        return SingularityProbe::none();
    }
    let t_end = tail[tail.len() - 1].t;
    let span = tail.iter().map(|s| (s.t - t_end).norm()).fold(0.0, f64::max);
    if span == 0.0 {
        return SingularityProbe::none();
    }
    let xs: Vec<C64> = tail.iter().map(|s| (s.t - t_end) / span).collect();
    let ys: Vec<C64> = tail.iter().map(|s| s.y * s.y).collect();
    let Some(coef) = lsq_poly(&xs, &ys, 2) else {
        return SingularityProbe::none();
    };
    let roots = poly_roots(&coef);
    let Some(x) = roots.into_iter().min_by(|a, b| a.norm().total_cmp(&b.norm())) else {
        return SingularityProbe::none();
    };
    let t_star = t_end + x * span;
    if !(t_star.re.is_finite() && t_star.im.is_finite()) {
        return SingularityProbe::none();
    }
    let d: Vec<f64> = tail.iter().map(|s| (s.t - t_star).norm()).collect();
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(0.0, f64::max);
    let (exponent, exponent_note) = match fit_local_exponent(traj, t_star) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    SingularityProbe {
        kind: ProbeKind::ZeroOfAlpha,
        t_star: Some(t_star),
        exponent,
        exponent_note,
        fit_window: Some((lo, hi)),
    }
}

/// Slope of `log|alpha|` against `log|t - t_star|` over the innermost
/// decade of sample distances.
pub fn fit_local_exponent(traj: &ComplexTrajectory, t_star: C64) -> Result<ExponentFit> {
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .map(|s| ((s.t - t_star).norm(), s.y.norm()))
        .filter(|(d, y)| *d > 0.0 && *y > 0.0 && d.is_finite() && y.is_finite())
        .collect();
    let d_min = pts
        .iter()
        .map(|p| p.0)
        .fold(f64::INFINITY, f64::min);
    if !d_min.is_finite() {
        return Err(Error::ExponentUnresolved("no samples away from t_star".into()));
    }
    let d_max = 10.0 * d_min;
    let win: Vec<(f64, f64)> = pts
        .into_iter()
        .filter(|(d, _)| *d <= d_max * (1.0 + 1e-12))
        .map(|(d, y)| (d.ln(), y.ln()))
        .collect();
    if win.len() < MIN_EXPONENT_SAMPLES {
        return Err(Error::ExponentUnresolved(format!(
            "{} samples in the fit window, need {MIN_EXPONENT_SAMPLES}",
            win.len()
        )));
    }
    let n = win.len() as f64;
    let mx = win.iter().map(|p| p.0).sum::<f64>() / n;
    let my = win.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = win.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = win.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = win.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::ExponentUnresolved("all samples at one distance".into()));
    }
    let nu = sxy / sxx;
    let sse: f64 = win.iter().map(|p| (p.1 - my - nu * (p.0 - mx)).powi(2)).sum();
    let r2 = if syy == 0.0 { 0.0 } else { 1.0 - sse / syy };
    if r2 <= MIN_R2 {
        return Err(Error::ExponentUnresolved(format!("fit R^2 = {r2:.4} <= {MIN_R2}")));
    }
    let stderr = if win.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    let lo = win.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).exp();
    let hi = win.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).exp();
    Ok(ExponentFit {
        nu,
        stderr,
        ci: (nu - 2.0 * stderr, nu + 2.0 * stderr),
        r2,
        window: (lo, hi),
        samples: win.len(),
    })
}

/// Integrates along `path`, detects a singularity, then re-integrates
/// from the trajectory end toward each new estimate (covering `approach`
/// of the remaining distance) `refinements` times.
pub fn probe_singularity(
    sys: System,
    ic: (C64, C64),
    path: &ComplexPath,
    tol: f64,
    refinements: usize,
    approach: f64,
) -> Result<(ComplexTrajectory, SingularityProbe)> {
    let mut traj = integrate(sys, ic, path, tol)?;
    let mut probe = detect_singularity(&traj);
    for _ in 0..refinements {
        let Some(t_star) = probe.t_star else { break };
        if !matches!(traj.halt, Halt::Completed) {
            break;
        }
        let end = *traj.last();
        let target = end.t + (t_star - end.t) * approach;
        if (target - end.t).norm() < 1e-14 {
            break;
        }
        let leg = integrate(sys, (end.y, end.dy), &ComplexPath::segment(end.t, target)?, tol)?;
        traj.samples.extend(leg.samples.iter().skip(1).map(|s| Sample { s: s.s + end.s, ..*s }));
        traj.stats.accepted += leg.stats.accepted;
        traj.stats.rejected += leg.stats.rejected;
        traj.stats.evaluations += leg.stats.evaluations;
        traj.halt = leg.halt;
        let next = detect_singularity(&traj);
        if next.kind == ProbeKind::None {
            break;
        }
        probe = next;
    }
    Ok((traj, probe))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    /// Samples of `f` along a ray toward `t0`, geometric in distance.
    fn synthetic(t0: C64, dir: C64, f: impl Fn(C64) -> C64) -> ComplexTrajectory {
        let ts: Vec<C64> = (0..60).map(|k| t0 + dir * 10f64.powf(-(k as f64) / 20.0)).collect();
        let ys: Vec<C64> = ts.iter().map(|&t| f(t)).collect();
        ComplexTrajectory::from_samples(&ts, &ys)
    }

    #[test]
    fn lsq_recovers_quadratic() {
        let xs: Vec<C64> = (0..6).map(|k| C64::new(k as f64 * 0.3, -0.1 * k as f64)).collect();
        let ys: Vec<C64> = xs.iter().map(|x| 1.0 + 2.0 * x - C64::i() * x * x).collect();
        let p = lsq_poly(&xs, &ys, 2).unwrap();
        assert!((p[0] - 1.0).norm() < 1e-12 && (p[1] - 2.0).norm() < 1e-12 && (p[2] + C64::i()).norm() < 1e-12);
    }

    #[test]
    fn synthetic_exponents() {
        let t0 = C64::new(0.3, -0.2);
        let dir = C64::from_polar(1.0, 0.7);
        let lin = synthetic(t0, dir, |t| t - t0);
        assert!((fit_local_exponent(&lin, t0).unwrap().nu - 1.0).abs() < 0.01);
        let cot = synthetic(t0, dir * 0.5, |t| (t - t0).cos() / (t - t0).sin());
        assert!((fit_local_exponent(&cot, t0).unwrap().nu + 1.0).abs() < 0.02);
    }

    #[test]
    fn exponent_needs_samples_and_fit() {
        let t0 = c(0.0);
        let ts: Vec<C64> = (1..5).map(|k| c(k as f64 * 0.1)).collect();
        let tr = ComplexTrajectory::from_samples(&ts, &ts);
        assert!(matches!(fit_local_exponent(&tr, t0), Err(Error::ExponentUnresolved(_))));
        // noise-like magnitudes give a poor fit
        let ts: Vec<C64> = (0..20).map(|k| c(1.0 + 0.45 * (k as f64) / 20.0)).collect();
        let ys: Vec<C64> = (0..20).map(|k| c(if k % 2 == 0 { 1.0 } else { 3.0 })).collect();
        let tr = ComplexTrajectory::from_samples(&ts, &ys);
        assert!(matches!(fit_local_exponent(&tr, c(0.0)), Err(Error::ExponentUnresolved(_))));
    }

    #[test]
    fn free_branch_point_at_i() {
        let path = ComplexPath::segment(c(0.0), C64::new(0.0, 0.999)).unwrap();
        let sys = System::Ep { omega: c(0.0) };
        let tr = integrate(sys, (c(1.0), c(0.0)), &path, 1e-10).unwrap();
        let p = detect_singularity(&tr);
        assert_eq!(p.kind, ProbeKind::ZeroOfAlpha);
        assert!((p.t_star.unwrap() - C64::i()).norm() < 1e-3);
        let nu = p.exponent.unwrap().nu;
        assert!((nu - 0.5).abs() < 0.02, "{nu}");
        let (_, refined) = probe_singularity(sys, (c(1.0), c(0.0)), &path, 1e-10, 2, 0.9).unwrap();
        assert!((refined.t_star.unwrap() - C64::i()).norm() < 1e-8);
    }

    #[test]
    fn no_singularity_cases() {
        let path = ComplexPath::segment(c(0.0), c(10.0)).unwrap();
        let tr = integrate(System::Ep { omega: c(1.0) }, (c(1.0), c(0.0)), &path, 1e-10).unwrap();
        assert_eq!(detect_singularity(&tr).kind, ProbeKind::None);
        // sin t decreases toward pi, but the linear equation has no movable singularity
        let path = ComplexPath::segment(c(2.0), c(3.1)).unwrap();
        let tr = integrate(System::LinearOsc { omega: c(1.0) }, (c(2f64.sin()), c(2f64.cos())), &path, 1e-10).unwrap();
        assert_eq!(detect_singularity(&tr).kind, ProbeKind::None);
    }

    proptest! {
        #[test]
        fn power_law_exponents(idx in 0usize..5, re in -1.0f64..1.0, im in -1.0f64..1.0, ang in 0.0f64..6.2) {
            let e = [-1.0, -0.5, 0.5, 1.0, 2.0][idx];
            let t0 = C64::new(re, im);
            let tr = synthetic(t0, C64::from_polar(1.0, ang), |t| (t - t0).powf(e) * C64::new(1.3, 0.4));
            let fit = fit_local_exponent(&tr, t0).unwrap();
            prop_assert!((fit.nu - e).abs() < 0.02);
        }
    }
}
