use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use super::integrate::{ComplexTrajectory, Sample};
use crate::balance::BalanceFamily;
use crate::error::{Error, Result};
use crate::exactlab::ermakov_invariant;
use crate::ode::DifferentialPolynomial;
use crate::scalar::C64;
use crate::series::{solve_local_series, LocalSolution};

fn grid(traj: &ComplexTrajectory) -> Vec<&Sample> {
    if traj.samples.iter().any(|s| s.waypoint) {
        traj.samples.iter().filter(|s| s.waypoint).collect()
    } else {
        traj.samples.iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantDrift {
    /// `max |I(t) - I(t_0)|` over the shared samples.
    pub drift: f64,
    #[serde(serialize_with = "crate::numeric::ser_c64")]
    pub initial: C64,
    pub points: usize,
}

/// Evaluates the invariant on the shared sample times (waypoints when the
/// trajectories carry them) of a linear-oscillator and an EP trajectory.
pub fn invariant_drift(eta: &ComplexTrajectory, alpha: &ComplexTrajectory) -> Result<InvariantDrift> {
    let (ge, ga) = (grid(eta), grid(alpha));
    if ge.len() != ga.len() || ge.iter().zip(&ga).any(|(a, b)| a.t != b.t) || ge.is_empty() {
        return Err(Error::MismatchedGrids);
    }
    let vals = ge
        .iter()
        .zip(&ga)
        .map(|(e, a)| ermakov_invariant(e.y, e.dy, a.y, a.dy))
        .collect::<Result<Vec<C64>>>()?;
    let initial = vals[0];
    let drift = vals.iter().map(|v| (v - initial).norm()).fold(0.0, f64::max);
    Ok(InvariantDrift { drift, initial, points: vals.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayComparison {
    /// Branch of `tau^{1/n}` fixed at the innermost sample.
    pub branch: u32,
    pub max_rel_error: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesComparison {
    pub max_rel_error: f64,
    pub points: usize,
    pub rays: Vec<RayComparison>,
}

/// Continuously unwrapped `arg(t - t_star)` along the samples.
fn unwrapped_args(samples: &[Sample], t_star: C64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(samples.len());
    let mut prev_principal = 0.0;
    for s in samples {
        let a = (s.t - t_star).arg();
        let v = match out.last() {
            None => a,
            Some(&p) => p + (a - prev_principal + PI).rem_euclid(2.0 * PI) - PI,
        };
        out.push(v);
        prev_principal = a;
    }
    out
}

struct Ray {
    /// `(tau^{1/n} on branch 0, numeric value)`, innermost first.
    points: Vec<(C64, C64, f64)>,
}

fn annulus_ray(traj: &ComplexTrajectory, t_star: C64, n: u32, annulus: (f64, f64)) -> Option<Ray> {
    let args = unwrapped_args(&traj.samples, t_star);
    let idx: Vec<usize> = (0..traj.samples.len())
        .filter(|&i| {
            let r = (traj.samples[i].t - t_star).norm();
            r >= annulus.0 && r <= annulus.1
        })
        .collect();
    let inner = *idx.iter().min_by(|&&a, &&b| {
        let ra = (traj.samples[a].t - t_star).norm();
        let rb = (traj.samples[b].t - t_star).norm();
        ra.total_cmp(&rb)
    })?;
    let shift = (traj.samples[inner].t - t_star).arg() - args[inner];
    let mut points: Vec<(C64, C64, f64)> = idx
        .iter()
        .map(|&i| {
            let s = &traj.samples[i];
            let r = (s.t - t_star).norm();
            let root = C64::from_polar(r.powf(1.0 / n as f64), (args[i] + shift) / n as f64);
            (root, s.y, r)
        })
        .collect();
    points.sort_by(|a, b| a.2.total_cmp(&b.2));
    Some(Ray { points })
}

fn branch_rotation(n: u32, k: u32) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)
}

/// Compares the truncated series with integrated values on the annulus
/// `r_in <= |t - t_star| <= r_out`. Along each trajectory the argument of
/// `tau` is tracked continuously; the branch is fixed by the best match at
/// the innermost sample.
pub fn series_vs_numeric(
    local: &LocalSolution<C64>,
    t_star: C64,
    annulus: (f64, f64),
    trajs: &[ComplexTrajectory],
) -> Result<SeriesComparison> {
    if annulus.0.is_nan() || annulus.0 <= 0.0 || annulus.1.is_nan() || annulus.1 <= annulus.0 {
        return Err(Error::Precondition(format!(
            "annulus ({}, {}) must satisfy 0 < r_in < r_out",
            annulus.0, annulus.1
        )));
    }
    let n = local.series.branch_order();
    let mut rays = Vec::new();
    for traj in trajs {
        let Some(ray) = annulus_ray(traj, t_star, n, annulus) else { continue };
        let (root0, y0, _) = ray.points[0];
        let branch = (0..n)
            .min_by(|&a, &b| {
                let ea = (local.series.eval_root(root0 * branch_rotation(n, a)) - y0).norm();
                let eb = (local.series.eval_root(root0 * branch_rotation(n, b)) - y0).norm();
                ea.total_cmp(&eb)
            })
            .expect("n >= 1");
        let rot = branch_rotation(n, branch);
        let max_rel_error = ray
            .points
            .iter()
            .map(|(root, y, _)| (local.series.eval_root(root * rot) - y).norm() / y.norm())
            .fold(0.0, f64::max);
        rays.push(RayComparison { branch, max_rel_error, points: ray.points.len() });
    }
    if rays.is_empty() {
        return Err(Error::Precondition("no trajectory samples inside the annulus".into()));
    }
    Ok(SeriesComparison {
        max_rel_error: rays.iter().map(|r| r.max_rel_error).fold(0.0, f64::max),
        points: rays.iter().map(|r| r.points).sum(),
        rays,
    })
}

#[derive(Debug, Clone)]
pub struct BranchFit {
    pub local: LocalSolution<C64>,
    pub comparison: SeriesComparison,
    pub leading_index: usize,
    /// Resonant index whose value was fitted, if the family has one.
    pub free_index: Option<i64>,
    pub free_value: C64,
}

/// Picks the leading coefficient and fits the first free (resonant)
/// coefficient so the series reproduces the innermost annulus sample, then
/// compares over the whole annulus. Further free coefficients stay 0.
pub fn fit_branch_series(
    poly: &DifferentialPolynomial,
    fam: &BalanceFamily,
    t_star: C64,
    annulus: (f64, f64),
    trajs: &[ComplexTrajectory],
    order: usize,
) -> Result<BranchFit> {
    let n = fam.branch_order;
    let inner = trajs
        .iter()
        .filter_map(|t| annulus_ray(t, t_star, n, annulus))
        .map(|r| r.points[0])
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .ok_or_else(|| Error::Precondition("no trajectory samples inside the annulus".into()))?;
    let (root0, y0, _) = inner;
    let mut best: Option<BranchFit> = None;
    for (li, &a) in fam.leading_coeffs.iter().enumerate() {
        let base = solve_local_series(poly, fam, a, order, &BTreeMap::new())?;
        let free_index = base.compatibility.first().map(|c| c.index);
        for k in 0..n {
            let root = root0 * branch_rotation(n, k);
            let (local, free_value) = match free_index {
                None => (base.clone(), C64::new(0.0, 0.0)),
                Some(j) => {
                    let solve = |f: C64| solve_local_series(poly, fam, a, order, &BTreeMap::from([(j, f)]));
                    let g = |f: C64| -> Result<C64> { Ok(solve(f)?.series.eval_root(root) - y0) };
                    let (mut f0, mut f1) = (C64::new(0.0, 0.0), C64::new(0.1, 0.0));
                    let (mut g0, mut g1) = (g(f0)?, g(f1)?);
                    for _ in 0..60 {
                        if g1.norm() <= 1e-14 * y0.norm() || g1 == g0 {
                            break;
                        }
                        let f2 = f1 - g1 * (f1 - f0) / (g1 - g0);
                        if !(f2.re.is_finite() && f2.im.is_finite()) {
                            break;
                        }
                        (f0, g0) = (f1, g1);
                        f1 = f2;
                        g1 = g(f1)?;
                    }
                    (solve(f1)?, f1)
                }
            };
            let comparison = series_vs_numeric(&local, t_star, annulus, trajs)?;
            if best.as_ref().is_none_or(|b| comparison.max_rel_error < b.comparison.max_rel_error) {
                best = Some(BranchFit { local, comparison, leading_index: li, free_index, free_value });
            }
        }
    }
    best.ok_or_else(|| Error::Precondition("family has no leading coefficients".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::{find_balances, BalanceOptions};
    use crate::numeric::{integrate, probe_singularity, ComplexPath, System};
    use crate::ode::ermakov_pinney;
    use num::Rational64;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn unwrap_crosses_cut() {
        let t_star = c(0.0);
        let ts: Vec<C64> = (0..9).map(|k| C64::from_polar(1.0, 2.5 + 0.2 * k as f64)).collect();
        let tr = ComplexTrajectory::from_samples(&ts, &ts);
        let args = unwrapped_args(&tr.samples, t_star);
        for (k, a) in args.iter().enumerate() {
            assert!((a - (2.5 + 0.2 * k as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn invariant_benchmark() {
        let path = ComplexPath::linspace(c(0.0), c(10.0), 100).unwrap();
        let w = c(1.0);
        let eta = integrate(System::LinearOsc { omega: w }, (c(0.0), c(1.0)), &path, 1e-10).unwrap();
        let alpha = integrate(System::Ep { omega: w }, (c(1.0), c(0.0)), &path, 1e-10).unwrap();
        let d = invariant_drift(&eta, &alpha).unwrap();
        assert!(d.drift < 1e-8, "{}", d.drift);
        assert!((d.initial - 0.5).norm() < 1e-15);
        assert_eq!(d.points, 101);
        let zero = integrate(System::LinearOsc { omega: w }, (c(0.0), c(0.0)), &path, 1e-10).unwrap();
        assert_eq!(invariant_drift(&zero, &alpha).unwrap().drift, 0.0);
        let other = integrate(System::Ep { omega: w }, (c(1.0), c(0.0)), &ComplexPath::linspace(c(0.0), c(10.0), 50).unwrap(), 1e-10).unwrap();
        assert!(matches!(invariant_drift(&eta, &other), Err(Error::MismatchedGrids)));
    }

    #[test]
    fn drift_scales_with_tolerance() {
        let path = ComplexPath::linspace(c(0.0), c(10.0), 100).unwrap();
        let w = c(1.0);
        let drifts: Vec<f64> = [1e-8, 1e-10, 1e-12]
            .iter()
            .map(|&tol| {
                let eta = integrate(System::LinearOsc { omega: w }, (c(0.0), c(1.0)), &path, tol).unwrap();
                let alpha = integrate(System::Ep { omega: w }, (c(1.0), c(0.0)), &path, tol).unwrap();
                invariant_drift(&eta, &alpha).unwrap().drift
            })
            .collect();
        assert!(drifts[0] > drifts[1] && drifts[1] > drifts[2], "{drifts:?}");
        // log-log slope against tol over two decades each
        let slope = (drifts[0] / drifts[2]).log10() / 4.0;
        assert!(slope > 0.5 && slope < 1.5, "slope {slope}, {drifts:?}");
    }

    #[test]
    fn invariant_free_case() {
        // eta = t, alpha = sqrt(1 + t^2): I = 1/2 exactly
        let path = ComplexPath::linspace(c(0.0), c(5.0), 50).unwrap();
        let eta = integrate(System::LinearOsc { omega: c(0.0) }, (c(0.0), c(1.0)), &path, 1e-10).unwrap();
        let alpha = integrate(System::Ep { omega: c(0.0) }, (c(1.0), c(0.0)), &path, 1e-10).unwrap();
        let d = invariant_drift(&eta, &alpha).unwrap();
        assert!(d.drift < 1e-8);
        assert!((d.initial - 0.5).norm() < 1e-15);
    }

    fn branch_family(poly: &DifferentialPolynomial) -> BalanceFamily {
        find_balances(poly, BalanceOptions::default())
            .into_iter()
            .find(|f| f.consistent && f.p == Rational64::new(1, 2))
            .unwrap()
    }

    #[test]
    fn exact_monomial_branch() {
        // alpha = a tau^{1/2} with a = 1 + i solves the free equation exactly
        let poly = ermakov_pinney(0.0);
        let fam = branch_family(&poly);
        let a = C64::new(1.0, 1.0);
        let li = fam.leading_coeffs.iter().position(|r| (r - a).norm() < 1e-12).unwrap();
        let local = solve_local_series(&poly, &fam, fam.leading_coeffs[li], 12, &BTreeMap::new()).unwrap();
        let path = ComplexPath::segment(c(1.0), c(0.01)).unwrap();
        let tr = integrate(System::Ep { omega: c(0.0) }, (a, a / 2.0), &path, 1e-12).unwrap();
        let cmp = series_vs_numeric(&local, c(0.0), (0.05, 0.5), std::slice::from_ref(&tr)).unwrap();
        assert!(cmp.max_rel_error < 1e-9, "{}", cmp.max_rel_error);
        assert!(series_vs_numeric(&local, c(0.0), (0.0, 0.5), &[tr]).is_err());
    }

    #[test]
    fn unit_frequency_branch_convergence() {
        let poly = ermakov_pinney(1.0);
        let fam = branch_family(&poly);
        let sys = System::Ep { omega: c(1.0) };
        let ic = (c(1.2), c(0.0));
        let path = ComplexPath::segment(c(0.0), C64::new(1.5, 0.8)).unwrap();
        let (_, probe) = probe_singularity(sys, ic, &path, 1e-12, 3, 0.9).unwrap();
        let t_star = probe.t_star.unwrap();
        let exact = C64::new(std::f64::consts::FRAC_PI_2, (1.0f64 / 1.44).atanh());
        assert!((t_star - exact).norm() < 1e-8, "{t_star}");
        let tr = integrate(sys, ic, &ComplexPath::segment(c(0.0), t_star + (c(0.0) - t_star) * 0.04).unwrap(), 1e-12).unwrap();
        let e12 = fit_branch_series(&poly, &fam, t_star, (0.05, 0.2), std::slice::from_ref(&tr), 12).unwrap();
        let e8 = fit_branch_series(&poly, &fam, t_star, (0.05, 0.2), std::slice::from_ref(&tr), 8).unwrap();
        assert!(e12.comparison.max_rel_error < 1e-4, "{}", e12.comparison.max_rel_error);
        assert!(e12.comparison.max_rel_error < e8.comparison.max_rel_error);
        assert_eq!(e12.free_index, Some(2));
    }
}
