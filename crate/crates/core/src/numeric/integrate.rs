use num::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::C64;

/// Second-order equations the integrator knows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum System {
    /// `y'' + omega^2 y = y^{-3}`.
    Ep {
        #[serde(serialize_with = "crate::numeric::ser_c64")]
        omega: C64,
    },
    /// `y'' + omega^2 y = 0`.
    LinearOsc {
        #[serde(serialize_with = "crate::numeric::ser_c64")]
        omega: C64,
    },
}

impl System {
    fn accel(&self, y: C64) -> C64 {
        match *self {
            System::Ep { omega } => -omega * omega * y + (y * y * y).inv(),
            System::LinearOsc { omega } => -omega * omega * y,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, System::LinearOsc { .. })
    }
}

/// Piecewise-straight path through complex time.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPath {
    waypoints: Vec<C64>,
}

impl ComplexPath {
    pub fn new(waypoints: Vec<C64>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidPath("a path needs at least two waypoints".into()));
        }
        if waypoints.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
            return Err(Error::InvalidPath("non-finite waypoint".into()));
        }
        if let Some(i) = waypoints.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::InvalidPath(format!("waypoints {i} and {} coincide", i + 1)));
        }
        Ok(ComplexPath { waypoints })
    }

    pub fn segment(a: C64, b: C64) -> Result<Self> {
        Self::new(vec![a, b])
    }

    /// Straight segment split into `pieces` equal parts.
    pub fn linspace(a: C64, b: C64, pieces: usize) -> Result<Self> {
        let pieces = pieces.max(1);
        Self::new((0..=pieces).map(|i| a + (b - a) * (i as f64 / pieces as f64)).collect())
    }

    pub fn waypoints(&self) -> &[C64] {
        &self.waypoints
    }

    pub fn start(&self) -> C64 {
        self.waypoints[0]
    }

    pub fn end(&self) -> C64 {
        *self.waypoints.last().expect("nonempty")
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: C64,
    /// Arc length from the path start.
    pub s: f64,
    pub y: C64,
    pub dy: C64,
    /// True for samples taken exactly at a path waypoint.
    pub waypoint: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Halt {
    Completed,
    /// `|y|` fell below `10 sqrt(tol)`.
    NearSingular {
        #[serde(serialize_with = "crate::numeric::ser_c64")]
        t: C64,
    },
    StepUnderflow {
        #[serde(serialize_with = "crate::numeric::ser_c64")]
        t: C64,
    },
    StepLimit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTrajectory {
    pub system: Option<System>,
    pub method: &'static str,
    pub tol: f64,
    pub samples: Vec<Sample>,
    pub stats: StepStats,
    pub halt: Halt,
}

pub const METHOD: &str = "dormand-prince 5(4), error per unit step";
const MAX_STEPS: usize = 2_000_000;

impl ComplexTrajectory {
    /// Trajectory from externally computed values (synthetic data, tests).
    pub fn from_samples(ts: &[C64], ys: &[C64]) -> Self {
        let mut s = 0.0;
        let samples = ts
            .iter()
            .zip(ys)
            .enumerate()
            .map(|(i, (&t, &y))| {
                if i > 0 {
                    s += (t - ts[i - 1]).norm();
                }
                Sample { t, s, y, dy: C64::zero(), waypoint: false }
            })
            .collect();
        ComplexTrajectory {
            system: None,
            method: "external samples",
            tol: 0.0,
            samples,
            stats: StepStats::default(),
            halt: Halt::Completed,
        }
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    /// Rows `[re t, im t, re y, im y, re y', im y']`.
    pub fn rows(&self) -> Vec<[f64; 6]> {
        self.samples
            .iter()
            .map(|s| [s.t.re, s.t.im, s.y.re, s.y.im, s.dy.re, s.dy.im])
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_re,t_im,alpha_re,alpha_im,dalpha_re,dalpha_im\n");
        for r in self.rows() {
            let line: Vec<String> = r.iter().map(|x| format!("{x:.16e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

// Dormand-Prince 5(4) tableau; the systems are autonomous so the nodes
// are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

type State = [C64; 2];

/// One DP step of length `h` along direction `d`; returns the new state
/// and the scaled error per unit step.
fn dp_step(sys: &System, y: State, d: C64, h: f64) -> (State, f64) {
    let f = |y: State| -> State { [d * y[1], d * sys.accel(y[0])] };
    let mut k = [[C64::zero(); 2]; 7];
    k[0] = f(y);
    for i in 1..7 {
        let mut yi = y;
        for (j, kj) in k.iter().enumerate().take(i) {
            let a = A[i][j];
            if a != 0.0 {
                yi[0] += kj[0] * (h * a);
                yi[1] += kj[1] * (h * a);
            }
        }
        k[i] = f(yi);
    }
    // row 6 of A is the fifth-order solution (FSAL)
    let mut y5 = y;
    for (j, kj) in k.iter().enumerate().take(6) {
        y5[0] += kj[0] * (h * A[6][j]);
        y5[1] += kj[1] * (h * A[6][j]);
    }
    let mut err = 0.0_f64;
    for c in 0..2 {
        let e: C64 = (0..7).map(|j| k[j][c] * E[j]).sum();
        let scale = y[c].norm().max(y5[c].norm()).max(1.0);
        err = err.max(e.norm() / scale);
    }
    (y5, err)
}

/// Adaptive integration of `sys` along `path` from `ic = (y, y')` at the
/// path start. Halts early near the singular manifold of EP or on step
/// underflow, returning the partial trajectory.
pub fn integrate(sys: System, ic: (C64, C64), path: &ComplexPath, tol: f64) -> Result<ComplexTrajectory> {
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(Error::Precondition(format!("tol {tol:e} outside [1e-13, 1e-6]")));
    }
    if matches!(sys, System::Ep { .. }) && ic.0.is_zero() {
        return Err(Error::Precondition("initial alpha must be nonzero".into()));
    }
    let singular_floor = 10.0 * tol.sqrt();
    let mut y: State = [ic.0, ic.1];
    let mut samples = vec![Sample { t: path.start(), s: 0.0, y: y[0], dy: y[1], waypoint: true }];
    let mut stats = StepStats::default();
    let mut s_total = 0.0;
    let mut h = 1e-2_f64;
    for seg in path.waypoints().windows(2) {
        let (z0, z1) = (seg[0], seg[1]);
        let len = (z1 - z0).norm();
        let d = (z1 - z0) / len;
        let mut s = 0.0;
        while s < len {
            if stats.accepted + stats.rejected >= MAX_STEPS {
                return Ok(finish(sys, tol, samples, stats, Halt::StepLimit));
            }
            let last = len - s <= h;
            let step = if last { len - s } else { h };
            let (y_new, err) = dp_step(&sys, y, d, step);
            stats.evaluations += 7;
            let finite = y_new.iter().all(|v| v.re.is_finite() && v.im.is_finite());
            if finite && err <= tol {
                stats.accepted += 1;
                y = y_new;
                s = if last { len } else { s + step };
                let t = if last { z1 } else { z0 + d * s };
                samples.push(Sample { t, s: s_total + s, y: y[0], dy: y[1], waypoint: last });
                if matches!(sys, System::Ep { .. }) && y[0].norm() < singular_floor {
                    return Ok(finish(sys, tol, samples, stats, Halt::NearSingular { t }));
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * (tol / err).powf(0.25)).clamp(0.2, 5.0) };
                // keep the proposal when the step was clamped to the waypoint
                if !(last && step < h) {
                    h = step * fac;
                }
            } else {
                stats.rejected += 1;
                let fac = if finite { (0.9 * (tol / err).powf(0.25)).clamp(0.1, 0.9) } else { 0.2 };
                h = step * fac;
                if h < 1e-14 * len.max(1.0) {
                    let t = z0 + d * s;
                    return Ok(finish(sys, tol, samples, stats, Halt::StepUnderflow { t }));
                }
            }
        }
        s_total += len;
    }
    Ok(finish(sys, tol, samples, stats, Halt::Completed))
}

fn finish(sys: System, tol: f64, samples: Vec<Sample>, stats: StepStats, halt: Halt) -> ComplexTrajectory {
    ComplexTrajectory { system: Some(sys), method: METHOD, tol, samples, stats, halt }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn ep(w: f64) -> System {
        System::Ep { omega: c(w) }
    }

    #[test]
    fn path_validation() {
        assert!(ComplexPath::new(vec![c(0.0)]).is_err());
        assert!(ComplexPath::new(vec![c(0.0), c(1.0), c(1.0)]).is_err());
        assert!((ComplexPath::new(vec![c(0.0), c(3.0), C64::new(3.0, 4.0)]).unwrap().length() - 7.0).abs() < 1e-15);
    }

    #[test]
    fn constant_solution() {
        let tr = integrate(ep(1.0), (c(1.0), c(0.0)), &ComplexPath::segment(c(0.0), c(10.0)).unwrap(), 1e-10).unwrap();
        assert_eq!(tr.halt, Halt::Completed);
        assert!(tr.samples.iter().all(|s| (s.y - 1.0).norm() < 1e-8));
        assert_eq!(tr.last().t, c(10.0));
    }

    #[test]
    fn free_solution_matches_closed_form() {
        let tr = integrate(ep(0.0), (c(1.0), c(0.0)), &ComplexPath::segment(c(0.0), c(3.0)).unwrap(), 1e-10).unwrap();
        for s in &tr.samples {
            assert!((s.y - (1.0 + s.t * s.t).sqrt()).norm() < 1e-7);
        }
    }

    #[test]
    fn linear_oscillator_quarter_period() {
        let sys = System::LinearOsc { omega: c(1.0) };
        let path = ComplexPath::segment(c(0.0), c(std::f64::consts::FRAC_PI_2)).unwrap();
        let tr = integrate(sys, (c(0.0), c(1.0)), &path, 1e-10).unwrap();
        assert!((tr.last().y - 1.0).norm() < 1e-8);
    }

    #[test]
    fn halts_near_singularity() {
        // sqrt(1 + t^2) vanishes at t = i
        let path = ComplexPath::segment(c(0.0), C64::new(0.0, 1.0)).unwrap();
        let tr = integrate(ep(0.0), (c(1.0), c(0.0)), &path, 1e-10).unwrap();
        match tr.halt {
            Halt::NearSingular { t } => assert!((t - C64::i()).norm() < 1e-6),
            Halt::StepUnderflow { t } => assert!((t - C64::i()).norm() < 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_input() {
        let path = ComplexPath::segment(c(0.0), c(1.0)).unwrap();
        assert!(integrate(ep(1.0), (c(1.0), c(0.0)), &path, 1e-3).is_err());
        assert!(integrate(ep(1.0), (c(0.0), c(0.0)), &path, 1e-10).is_err());
    }

    #[test]
    fn waypoints_hit_exactly() {
        let path = ComplexPath::linspace(c(0.0), c(2.0), 8).unwrap();
        let tr = integrate(ep(1.0), (c(1.2), c(0.0)), &path, 1e-10).unwrap();
        let wp: Vec<C64> = tr.samples.iter().filter(|s| s.waypoint).map(|s| s.t).collect();
        assert_eq!(wp, path.waypoints());
    }

    #[test]
    fn tolerance_scaling_on_free_solution() {
        // global error ~ tol^{5/4} under per-unit-step control with local
        // extrapolation, so halving tol divides the error by about 2^{5/4}
        let path = ComplexPath::segment(c(0.0), c(3.0)).unwrap();
        let tols = [1e-7, 1e-8, 1e-9, 1e-10, 1e-11];
        let errs: Vec<f64> = tols
            .iter()
            .map(|&tol| {
                let tr = integrate(ep(0.0), (c(1.0), c(0.0)), &path, tol).unwrap();
                tr.samples.iter().map(|s| (s.y - (1.0 + s.t * s.t).sqrt()).norm()).fold(0.0, f64::max)
            })
            .collect();
        let xs: Vec<f64> = tols.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        let factor = 2f64.powf(slope);
        let expected = 2f64.powf(1.25);
        assert!(factor > expected / 2.0 && factor < expected * 2.0, "slope {slope}, errs {errs:?}");
    }

    #[test]
    fn path_independence() {
        let tol = 1e-10;
        let end = C64::new(0.5, 0.5);
        let direct = ComplexPath::segment(c(0.0), end).unwrap();
        let bent = ComplexPath::new(vec![c(0.0), c(0.5), end]).unwrap();
        let other = ComplexPath::new(vec![c(0.0), C64::new(0.0, 0.5), end]).unwrap();
        for sys in [ep(1.0), ep(0.0), System::LinearOsc { omega: c(2.0) }] {
            let a = integrate(sys, (c(1.2), c(0.3)), &direct, tol).unwrap().last().y;
            for p in [&bent, &other] {
                let b = integrate(sys, (c(1.2), c(0.3)), p, tol).unwrap().last().y;
                assert!((a - b).norm() < 10.0 * tol, "{sys:?}: {a} vs {b}");
            }
        }
    }
}
