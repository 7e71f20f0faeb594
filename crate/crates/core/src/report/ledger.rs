//! Discrepancy ledger: every checked claim with its anchor string.

use serde_json::{json, Value};

use super::{Analysis, ExactLabChecks, ProbeEntry, VERIFY_ORDERS};
use crate::closedform::CandidateKind;
use crate::numeric::ProbeKind;
use crate::scalar::fmt_ratio;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Confirmed,
    Refuted,
    NotApplicable,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Confirmed => "confirmed",
            Status::Refuted => "refuted",
            Status::NotApplicable => "not-applicable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    pub claim: String,
    pub anchor: &'static str,
    pub status: Status,
    pub evidence: String,
}

impl Claim {
    fn new(claim: &str, anchor: &'static str, status: Status, evidence: impl Into<String>) -> Self {
        Claim { claim: claim.to_string(), anchor, status, evidence: evidence.into() }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "claim": self.claim,
            "anchor": self.anchor,
            "status": self.status.as_str(),
            "evidence": self.evidence,
        })
    }
}

fn fmt_c(z: num::Complex<f64>) -> String {
    // adding 0.0 turns -0.0 into 0.0
    format!("{:.6}{:+.6}i", z.re + 0.0, z.im + 0.0)
}

fn symbolic_claims(a: &Analysis, out: &mut Vec<Claim>) {
    let ep = a.ep_omega.is_some();
    let na = |claim: &str, anchor: &'static str| Claim::new(claim, anchor, Status::NotApplicable, "input is not the Ermakov-Pinney equation");
    let simple = a.families.iter().find(|f| f.p == num::Rational64::from_integer(-1));
    let consistent: Vec<_> = a.families.iter().filter(|f| f.consistent).collect();

    out.push(match (ep, simple) {
        (true, Some(f)) => Claim::new(
            "simple-pole family (p, q) = (-1, -3) is a consistent dominant balance",
            "( p, q) = ( -1, -3)",
            if f.consistent { Status::Confirmed } else { Status::Refuted },
            format!(
                "cleared form: leading equation {} (consistent = {}); consistent families: [{}]",
                f.leading_equation(),
                f.consistent,
                consistent.iter().map(|f| format!("p = {}, n = {}", fmt_ratio(&f.p), f.branch_order)).collect::<Vec<_>>().join("; ")
            ),
        ),
        _ => na("simple-pole family (p, q) = (-1, -3) is a consistent dominant balance", "( p, q) = ( -1, -3)"),
    });

    out.push(match &a.table {
        Some(t) => {
            let a0 = t.rows[1].recomputed;
            let imaginary = t.rows.iter().all(|r| r.recomputed.re.abs() <= 1e-12 * r.recomputed.norm().max(1.0));
            Claim::new(
                "leading coefficient a_-1 = c i for arbitrary real c",
                "appears as imaginary quantity",
                Status::Refuted,
                format!(
                    "no root of the leading equation is nonzero on the simple-pole family; the branch family requires a^4 = -4; forced recursion with a_-1 = {}i gives a_0 = {} (all recomputed coefficients imaginary: {imaginary})",
                    t.residue_scale,
                    fmt_c(a0)
                ),
            )
        }
        None => na("leading coefficient a_-1 = c i for arbitrary real c", "appears as imaginary quantity"),
    });

    out.push(match &a.table {
        Some(t) => {
            let bad: Vec<String> = t
                .rows
                .iter()
                .filter(|r| !r.matches)
                .map(|r| if r.claimed.is_some() { r.name.to_string() } else { format!("{} (formula undefined)", r.name) })
                .collect();
            Claim::new(
                "claimed recursion coefficients a_0 .. a_3",
                "series to identically vanish",
                if bad.is_empty() { Status::Confirmed } else { Status::Refuted },
                if bad.is_empty() {
                    "all claimed coefficients agree with the forced recursion".to_string()
                } else {
                    format!("mismatched coefficients: {}", bad.join(", "))
                },
            )
        }
        None => na("claimed recursion coefficients a_0 .. a_3", "series to identically vanish"),
    });

    let branch = consistent.iter().find(|f| f.branch_order == 2);
    out.push(match (ep, branch) {
        (true, Some(f)) => Claim::new(
            "leading-order balance gives branch order n = 2",
            "balancing leading term yields n=2",
            Status::Confirmed,
            format!("consistent family p = {}, n = {}, leading equation {}", fmt_ratio(&f.p), f.branch_order, f.leading_equation()),
        ),
        (true, None) => Claim::new(
            "leading-order balance gives branch order n = 2",
            "balancing leading term yields n=2",
            Status::Refuted,
            "no consistent family with branch order 2",
        ),
        _ => na("leading-order balance gives branch order n = 2", "balancing leading term yields n=2"),
    });

    let dem = a.poly.demina_condition();
    out.push(if ep {
        Claim::new(
            "the cleared equation has exactly one term of highest degree",
            "one term of highest degree",
            if dem.holds { Status::Confirmed } else { Status::Refuted },
            format!(
                "top total degree {} carried by {} monomials: {}",
                dem.top_degree,
                dem.top_monomials.len(),
                dem.top_monomials.iter().map(|&i| a.poly.monomials[i].signature()).collect::<Vec<_>>().join(", ")
            ),
        )
    } else {
        na("the cleared equation has exactly one term of highest degree", "one term of highest degree")
    });

    let elliptic: Vec<String> = a
        .elliptic
        .iter()
        .map(|(s, r)| match r {
            Ok(b) => format!("{s}: {b}"),
            Err(e) => format!("{s}: {e}"),
        })
        .collect();
    out.push(Claim::new(
        "necessary condition for elliptic solutions",
        "necessary condition to have elliptic",
        Status::NotApplicable,
        if elliptic.is_empty() { "no local expansion to test".to_string() } else { elliptic.join("; ") },
    ));

    let cot = &a.reference.cot_coefficients;
    out.push(Claim::new(
        "cot expansion coefficients 1/3, 1/45, 2/945",
        "we obtain exact meromorphic solution",
        if cot.get(1..4) == Some(&["-1/3".to_string(), "-1/45".to_string(), "-2/945".to_string()][..]) {
            Status::Confirmed
        } else {
            Status::Refuted
        },
        format!("cot Laurent coefficients (odd powers from x^-1): {}", cot.join(", ")),
    ));

    let period_claim = "closed-form period formula";
    out.push(match (&a.reference.cot_period, &a.period_forced) {
        (Ok(p), forced) => {
            let mut ev = format!(
                "cot reference: formula gives {}, matched T = {}; consistent = {}, modulus consistent = {}",
                fmt_c(p.claimed),
                p.matched.map_or("none".into(), fmt_c),
                p.consistent,
                p.modulus_consistent
            );
            if let Some(t) = &a.table {
                let tc = t.claimed_period.map_or("undefined".to_string(), fmt_c);
                ev.push_str(&format!("; claimed coefficients give T = {tc}"));
            }
            if let Some(Err(e)) = forced {
                ev.push_str(&format!("; forced data: {e}"));
            }
            Claim::new(
                period_claim,
                "time period of periodic solution",
                if p.consistent { Status::Confirmed } else { Status::Refuted },
                ev,
            )
        }
        (Err(e), _) => Claim::new(period_claim, "time period of periodic solution", Status::NotApplicable, e.clone()),
    });

    let claimed = a.candidates.iter().find(|c| c.source == "claimed cot candidate");
    out.push(match claimed.map(|c| &c.result) {
        Some(Ok(c)) => Claim::new(
            "a_-1 (pi/T) cot(pi (t - t0)/T) + h0 is an exact meromorphic solution",
            "meromorphic solution of the ODE",
            if c.verified { Status::Confirmed } else { Status::Refuted },
            if c.verified {
                format!("verified through order {VERIFY_ORDERS}")
            } else {
                format!(
                    "refuted at order ≤ {VERIFY_ORDERS}: first nonzero residual at tau^{} (residual norm {:.3e})",
                    c.first_failing_order.unwrap_or(0),
                    c.residual_norm
                )
            },
        ),
        Some(Err(e)) => Claim::new(
            "a_-1 (pi/T) cot(pi (t - t0)/T) + h0 is an exact meromorphic solution",
            "meromorphic solution of the ODE",
            Status::Refuted,
            format!("refuted at order ≤ {VERIFY_ORDERS}: {e}"),
        ),
        None => na("a_-1 (pi/T) cot(pi (t - t0)/T) + h0 is an exact meromorphic solution", "meromorphic solution of the ODE"),
    });

    let poles: Vec<_> = consistent.iter().filter(|f| f.branch_order == 1 && f.p < num::Rational64::from_integer(0)).collect();
    out.push(if ep {
        Claim::new(
            "the solution has a pole of order p at t0",
            "one pole of order p",
            if poles.is_empty() { Status::Refuted } else { Status::Confirmed },
            if poles.is_empty() {
                "no consistent pole family; the only consistent family is an algebraic branch point".to_string()
            } else {
                format!("consistent pole orders: {}", poles.iter().map(|f| fmt_ratio(&-f.p)).collect::<Vec<_>>().join(", "))
            },
        )
    } else {
        na("the solution has a pole of order p at t0", "one pole of order p")
    });

    let rational_ok = a
        .candidates
        .iter()
        .filter_map(|c| c.result.as_ref().ok())
        .any(|c| c.kind == CandidateKind::Rational && c.verified);
    out.push(Claim::new(
        "rational solution candidate",
        "Rational Solution",
        if rational_ok { Status::Confirmed } else { Status::NotApplicable },
        if rational_ok {
            "a rational candidate verifies".to_string()
        } else {
            "no pole family to build a rational candidate from; no candidate verifies".to_string()
        },
    ));

    out.push(if ep {
        let complex_res = consistent.iter().any(|f| f.resonances.iter().any(|r| r.as_rational().is_none()));
        Claim::new(
            "the equation does not possess the Painleve property",
            "does not possess Painleve integrable",
            Status::Confirmed,
            format!(
                "movable algebraic branch point (n = {}); complex resonances present: {complex_res}",
                branch.map_or(0, |f| f.branch_order)
            ),
        )
    } else {
        na("the equation does not possess the Painleve property", "does not possess Painleve integrable")
    });

    let compat: Vec<String> = a
        .locals
        .iter()
        .filter_map(|e| e.result.as_ref().ok())
        .flat_map(|l| {
            l.compatibility.iter().map(move |c| {
                format!(
                    "a = {}, r = {} (index {}): satisfied = {}",
                    fmt_c(l.leading),
                    fmt_ratio(&c.resonance),
                    c.index,
                    c.satisfied
                )
            })
        })
        .collect();
    out.push(Claim::new(
        "distinction between resonances and compatibility conditions",
        "distinction between resonance and compatibility",
        Status::NotApplicable,
        if compat.is_empty() { "no positive integer resonances".to_string() } else { compat.join("; ") },
    ));
}

fn lab_claims(l: Option<&ExactLabChecks>, out: &mut Vec<Claim>) {
    let Some(l) = l else {
        for (claim, anchor) in [
            ("Pinney superposition solves the equation", "solution was given by Pinney"),
            ("quadratic-form constraint B^2 - AC = 1/W^2", "wronskian of two independent solutions"),
            ("invariant is conserved", "dynamical invariant for this system"),
            ("quadratic form satisfies the third-order equation", "third order equation of maximal symmetry"),
            ("factorization into two linear operators", "in terms of two linear operators"),
            ("Riccati reduction", "Inserting new real variable"),
            ("Mobius maps are the automorphisms of the Riemann sphere", "Riemann sphere are the homographic"),
        ] {
            out.push(Claim::new(claim, anchor, Status::NotApplicable, "input is not the Ermakov-Pinney equation"));
        }
        return;
    };
    out.push(Claim::new(
        "Pinney superposition solves the equation",
        "solution was given by Pinney",
        if l.pinney_residual < 1e-8 { Status::Confirmed } else { Status::Refuted },
        match &l.pinney_error {
            Some(e) => e.clone(),
            None => format!(
                "max residual {:.3e}; max difference from numeric {:.3e} on [0, 5]",
                l.pinney_residual, l.pinney_vs_numeric
            ),
        },
    ));
    out.push(Claim::new(
        "quadratic-form constraint B^2 - AC = 1/W^2",
        "wronskian of two independent solutions",
        if l.verdict.satisfies_b2_minus_ac { Status::Confirmed } else { Status::Refuted },
        format!(
            "A C - B^2 = {}, B^2 - A C = {}, 1/W^2 = {}: {}",
            l.verdict.ac_minus_b2, l.verdict.b2_minus_ac, l.verdict.target, l.verdict.convention
        ),
    ));
    let monotone = l.drift.windows(2).all(|w| w[1].1 <= w[0].1);
    let best = l.drift.last().map_or(f64::NAN, |d| d.1);
    out.push(Claim::new(
        "invariant is conserved",
        "dynamical invariant for this system",
        if best < 1e-8 && monotone { Status::Confirmed } else { Status::Refuted },
        format!(
            "I(0) = {}; drift {} (monotone in tol: {monotone})",
            fmt_c(l.invariant_initial),
            l.drift.iter().map(|(t, d)| format!("{d:.3e} at tol {t:.0e}")).collect::<Vec<_>>().join(", ")
        ),
    ));
    out.push(Claim::new(
        "quadratic form satisfies the third-order equation",
        "third order equation of maximal symmetry",
        if l.third_order_residual < 1e-6 { Status::Confirmed } else { Status::Refuted },
        format!("max residual {:.3e} (numeric derivatives)", l.third_order_residual),
    ));
    out.push(Claim::new(
        "normalized Cruz solution from two linear operators",
        "in terms of two linear operators",
        if l.cruz_ic_mismatch < 1e-8 && l.cruz_residual < 1e-8 { Status::Confirmed } else { Status::Refuted },
        format!("initial-condition mismatch {:.3e}; max residual {:.3e}", l.cruz_ic_mismatch, l.cruz_residual),
    ));
    out.push(Claim::new(
        "Riccati reduction Y' + Y^2 + omega^2 = 0",
        "Inserting new real variable",
        if l.riccati_residual < 1e-6 { Status::Confirmed } else { Status::Refuted },
        format!("max residual {:.3e} over Pinney and Cruz solutions", l.riccati_residual),
    ));
    out.push(Claim::new(
        "Mobius maps are the automorphisms of the Riemann sphere",
        "Riemann sphere are the homographic",
        if l.mobius_max_error < 1e-12 { Status::Confirmed } else { Status::Refuted },
        format!("composition matches the matrix product to {:.3e}", l.mobius_max_error),
    ));
}

fn probe_claims(bench: Option<&[ProbeEntry]>, configured: Option<&[ProbeEntry]>, out: &mut Vec<Claim>) {
    let Some(bench) = bench else {
        out.push(Claim::new(
            "movable singularities of real data are confined to the imaginary axis",
            "confined in imaginary axis",
            Status::NotApplicable,
            "input is not the Ermakov-Pinney equation",
        ));
        out.push(Claim::new(
            "the solution is holomorphic near the singularity",
            "holomorphic around such singularity",
            Status::NotApplicable,
            "input is not the Ermakov-Pinney equation",
        ));
        return;
    };
    let all: Vec<&ProbeEntry> = bench.iter().chain(configured.unwrap_or(&[])).collect();
    let stars: Vec<_> = bench.iter().filter_map(|p| p.probe.t_star).collect();
    let paired = !stars.is_empty()
        && stars.iter().all(|t| t.im.abs() > 1e-6 && stars.iter().any(|s| (s - t.conj()).norm() < 1e-6 * t.norm().max(1.0)));
    let listed: Vec<String> = all.iter().filter_map(|p| p.probe.t_star).map(fmt_c).collect();
    out.push(Claim::new(
        "movable singularities of real data are confined to the imaginary axis",
        "confined in imaginary axis",
        if paired { Status::Confirmed } else { Status::Refuted },
        format!(
            "omega = 0 benchmark t_star values come in conjugate pairs off the real axis: {paired}; detected t_star: [{}]",
            listed.join(", ")
        ),
    ));
    let nus: Vec<String> = all
        .iter()
        .filter(|p| p.probe.kind == ProbeKind::ZeroOfAlpha)
        .map(|p| match &p.probe.exponent {
            Some(e) => format!("nu = {:.4} +- {:.1e}", e.nu, 2.0 * e.stderr),
            None => p.probe.exponent_note.clone().unwrap_or_else(|| "exponent unresolved".into()),
        })
        .collect();
    out.push(Claim::new(
        "the solution is holomorphic near the singularity",
        "holomorphic around such singularity",
        Status::NotApplicable,
        format!("measured local exponents: {}", if nus.is_empty() { "none".to_string() } else { nus.join("; ") }),
    ));
}

pub fn build_ledger(
    a: &Analysis,
    lab: Option<&ExactLabChecks>,
    bench: Option<&[ProbeEntry]>,
    configured: Option<&[ProbeEntry]>,
) -> Vec<Claim> {
    let mut out = Vec::new();
    symbolic_claims(a, &mut out);
    lab_claims(lab, &mut out);
    probe_claims(bench, configured, &mut out);
    out
}
