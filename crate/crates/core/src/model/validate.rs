//! Randomised probing of the standing growth, Lipschitz and coercivity
//! conditions. A report is evidence gathered at sampled points, not a proof.
//!
//! Constants are fitted on points inside `radius` and then checked, with a
//! factor two of slack, at points inside `8 * radius`. A coefficient that
//! grows faster than the conditions allow shows up as a ratio that keeps
//! increasing with the radius.

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::measures::cloud::{norm, wasserstein_clouds};
use crate::measures::ParticleCloud;
use crate::model::CoefficientBundle;
use crate::rng::{stream, SimRng};

const CLOUD_SIZE: usize = 8;
const OUTER_FACTOR: f64 = 8.0;
const SLACK: f64 = 2.0;

#[derive(Clone, Copy, Debug)]
pub struct Probe {
    pub samples: usize,
    pub radius: f64,
    pub seed: u64,
}

/// Constants of the Lipschitz/growth bound (`c1`), the reward growth
/// bounds (`c2`) and the coercivity of `f` in the action (`c3`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Constants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Finite,
    Purity,
    Lipschitz,
    DriftAtOrigin,
    VolatilityGrowth,
    TerminalGrowth,
    RunningBounds,
    Coercivity,
    CloudFreeClaim,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Probe point at which a condition failed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub a: Vec<f64>,
    /// Observed ratio (or value) that broke the bound.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub condition: Condition,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, Serialize)]
struct Record {
    t: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    a: Vec<f64>,
    lipschitz: f64,
    drift_origin: f64,
    volatility: f64,
    terminal: f64,
    running_lower: f64,
    running_upper: f64,
    /// `1 + |x|^p + int |z|^p mu(dz)`.
    base: f64,
    running: f64,
    action_power: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub radius: f64,
    /// Largest sampled ratio for the Lipschitz condition.
    pub lipschitz_estimate: f64,
    /// Outer-radius points exceeding the fitted reward growth bounds.
    pub growth_violations: usize,
    /// Smallest sampled coercivity constant implied by the fitted `c2`.
    pub coercivity_margin: f64,
    pub fitted: Constants,
    pub checks: Vec<Check>,
    #[serde(skip)]
    records: Vec<Record>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }

    pub fn verdict(&self, condition: Condition) -> Option<Verdict> {
        self.checks.iter().find(|c| c.condition == condition).map(|c| c.verdict)
    }

    /// Re-judge the sampled points against explicit constants. Larger `c1`
    /// and `c2` can only turn failures into passes; larger `c3` can only do
    /// the opposite.
    pub fn check_with(&self, constants: Constants) -> Vec<Check> {
        let mut checks: Vec<Check> = self
            .checks
            .iter()
            .filter(|c| {
                matches!(c.condition, Condition::Finite | Condition::Purity | Condition::CloudFreeClaim)
            })
            .cloned()
            .collect();
        let Constants { c1, c2, c3 } = constants;
        checks.push(judge(Condition::Lipschitz, &self.records, |r| r.lipschitz, c1));
        checks.push(judge(Condition::DriftAtOrigin, &self.records, |r| r.drift_origin, c1));
        checks.push(judge(Condition::VolatilityGrowth, &self.records, |r| r.volatility, c1));
        checks.push(judge(Condition::TerminalGrowth, &self.records, |r| r.terminal, c2));
        checks.push(judge(
            Condition::RunningBounds,
            &self.records,
            |r| r.running_lower.max(r.running_upper),
            c2,
        ));
        checks.push(judge(
            Condition::Coercivity,
            &self.records,
            |r| r.running + c3 * r.action_power - c2 * r.base,
            0.0,
        ));
        checks
    }
}

fn judge(condition: Condition, records: &[Record], value: impl Fn(&Record) -> f64, bound: f64) -> Check {
    let worst = records
        .iter()
        .map(|r| (value(r), r))
        .filter(|(v, _)| *v > bound * (1.0 + 1e-12) + 1e-12)
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match worst {
        Some((v, r)) => Check {
            condition,
            verdict: Verdict::Fail,
            witness: Some(witness(r, v)),
        },
        None => Check {
            condition,
            verdict: Verdict::Pass,
            witness: None,
        },
    }
}

fn witness(r: &Record, value: f64) -> Witness {
    Witness {
        t: r.t,
        x: r.x.clone(),
        y: r.y.clone(),
        a: r.a.clone(),
        value,
    }
}

struct Scratch {
    b1: Vec<f64>,
    b2: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    z1: Vec<f64>,
    z2: Vec<f64>,
}

fn uniform_point(rng: &mut SimRng, dim: usize, radius: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-radius..=radius)).collect()
}

fn random_cloud(rng: &mut SimRng, dim: usize, radius: f64) -> ParticleCloud {
    let points = (0..CLOUD_SIZE * dim).map(|_| rng.random_range(-radius..=radius)).collect();
    ParticleCloud::new(dim, points).expect("finite random cloud")
}

fn frob_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Frobenius norm of `s s^T + z z^T` for row-major `d x m` and `d x m0`.
fn covariance_norm(d: usize, s: &[f64], z: &[f64]) -> f64 {
    let m = s.len() / d;
    let m0 = z.len() / d;
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            let mut v = 0.0;
            for k in 0..m {
                v += s[i * m + k] * s[j * m + k];
            }
            for k in 0..m0 {
                v += z[i * m0 + k] * z[j * m0 + k];
            }
            total += v * v;
        }
    }
    total.sqrt()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Probe the bundle at random points and report fitted constants and
/// per-condition verdicts. Deterministic in `probe.seed`.
pub fn validate_coefficients(bundle: &CoefficientBundle, probe: Probe) -> Result<ValidationReport> {
    if probe.samples == 0 {
        return Err(invalid("probe", "at least one sample is required"));
    }
    if !(probe.radius > 0.0 && probe.radius.is_finite()) {
        return Err(invalid("probe", "radius must be positive"));
    }
    let d = bundle.dims.d;
    let (m, m0) = (bundle.dims.m, bundle.dims.m0);
    let k = bundle.action_dim();
    let p = bundle.exponents.p;
    let pp = bundle.exponents.p_prime;
    let ps = bundle.exponents.p_sigma;
    let mut rng = stream(probe.seed, "validate", &[]);
    let mut sc = Scratch {
        b1: vec![0.0; d],
        b2: vec![0.0; d],
        s1: vec![0.0; d * m],
        s2: vec![0.0; d * m],
        z1: vec![0.0; d * m0],
        z2: vec![0.0; d * m0],
    };
    let origin = ParticleCloud::new(d, vec![0.0; d]).expect("origin cloud");
    let zero = vec![0.0; d];

    let mut inner = Vec::with_capacity(probe.samples);
    let mut outer = Vec::with_capacity(probe.samples);
    let mut finite_fail: Option<Witness> = None;
    let mut purity_fail: Option<Witness> = None;
    let mut cloud_fail: Option<Witness> = None;

    for stage in 0..2 {
        let radius = if stage == 0 { probe.radius } else { probe.radius * OUTER_FACTOR };
        for s in 0..probe.samples {
            let t = rng.random_range(0.0..=bundle.horizon);
            let x = uniform_point(&mut rng, d, radius);
            let y = uniform_point(&mut rng, d, radius);
            let mu = random_cloud(&mut rng, d, radius);
            let nu = random_cloud(&mut rng, d, radius);
            let mut a = vec![0.0; k];
            bundle.actions.sample(&mut rng, &mut a);

            (bundle.drift)(t, &x, mu.view(), &a, &mut sc.b1);
            (bundle.drift)(t, &y, nu.view(), &a, &mut sc.b2);
            (bundle.diffusion)(t, &x, mu.view(), &mut sc.s1);
            (bundle.diffusion)(t, &y, nu.view(), &mut sc.s2);
            (bundle.common_diffusion)(t, &x, mu.view(), &mut sc.z1);
            (bundle.common_diffusion)(t, &y, nu.view(), &mut sc.z2);
            let f = (bundle.running)(t, &x, mu.view(), &a);
            let g = (bundle.terminal)(&x, mu.view());
            let finite = [&sc.b1, &sc.b2, &sc.s1, &sc.s2, &sc.z1, &sc.z2].iter().all(|v| all_finite(v))
                && f.is_finite()
                && g.is_finite();
            if !finite {
                finite_fail.get_or_insert(Witness { t, x, y, a, value: f64::NAN });
                continue;
            }

            if s < 16 && stage == 0 {
                let mut again = Scratch {
                    b1: vec![0.0; d],
                    b2: vec![0.0; d],
                    s1: vec![0.0; d * m],
                    s2: vec![0.0; d * m],
                    z1: vec![0.0; d * m0],
                    z2: vec![0.0; d * m0],
                };
                (bundle.drift)(t, &x, mu.view(), &a, &mut again.b1);
                (bundle.diffusion)(t, &x, mu.view(), &mut again.s1);
                (bundle.common_diffusion)(t, &x, mu.view(), &mut again.z1);
                let same = again.b1 == sc.b1
                    && again.s1 == sc.s1
                    && again.z1 == sc.z1
                    && (bundle.running)(t, &x, mu.view(), &a).to_bits() == f.to_bits()
                    && (bundle.terminal)(&x, mu.view()).to_bits() == g.to_bits();
                if !same && purity_fail.is_none() {
                    purity_fail = Some(Witness { t, x: x.clone(), y: y.clone(), a: a.clone(), value: f64::NAN });
                }
            }

            if bundle.cloud_free_dynamics {
                let mut other = vec![0.0; d];
                let mut other_s = vec![0.0; d * m];
                let mut other_z = vec![0.0; d * m0];
                (bundle.drift)(t, &x, nu.view(), &a, &mut other);
                (bundle.diffusion)(t, &x, nu.view(), &mut other_s);
                (bundle.common_diffusion)(t, &x, nu.view(), &mut other_z);
                if (other != sc.b1 || other_s != sc.s1 || other_z != sc.z1) && cloud_fail.is_none() {
                    cloud_fail = Some(Witness { t, x: x.clone(), y: y.clone(), a: a.clone(), value: f64::NAN });
                }
            }

            let ell = wasserstein_clouds(p, &mu, &nu)?;
            let num = frob_diff(&sc.b1, &sc.b2) + (frob_diff(&sc.s1, &sc.s2).powi(2) + frob_diff(&sc.z1, &sc.z2).powi(2)).sqrt();
            let den = norm_diff(&x, &y) + ell;
            let lipschitz = if den > 0.0 { num / den } else { 0.0 };

            (bundle.drift)(t, &zero, origin.view(), &a, &mut sc.b2);
            let drift_origin = norm(&sc.b2) / (1.0 + norm(&a));

            let mp = mu.moment(p);
            let volatility =
                covariance_norm(d, &sc.s1, &sc.z1) / (1.0 + norm(&x).powf(ps) + mp.powf(ps / p));
            let base = 1.0 + norm(&x).powf(p) + mp;
            let action_power = norm(&a).powf(pp);
            let record = Record {
                t,
                x,
                y,
                a,
                lipschitz,
                drift_origin,
                volatility,
                terminal: g.abs() / base,
                running_lower: -f / (base + action_power),
                running_upper: f / base,
                base,
                running: f,
                action_power,
            };
            if stage == 0 {
                inner.push(record);
            } else {
                outer.push(record);
            }
        }
    }

    let fit = |value: &dyn Fn(&Record) -> f64| inner.iter().map(value).fold(1.0f64, f64::max);
    let c1 = fit(&|r| r.lipschitz.max(r.drift_origin).max(r.volatility));
    let c2 = fit(&|r| r.terminal.max(r.running_lower).max(r.running_upper));
    let (c1s, c2s) = (SLACK * c1, SLACK * c2);

    let records: Vec<Record> = inner.into_iter().chain(outer).collect();
    let lipschitz_estimate = records.iter().map(|r| r.lipschitz).fold(0.0, f64::max);
    let growth_violations = records[probe.samples.min(records.len())..]
        .iter()
        .filter(|r| r.terminal.max(r.running_lower).max(r.running_upper) > c2s)
        .count();
    let coercivity_margin = records
        .iter()
        .filter(|r| r.action_power > 0.0)
        .map(|r| (c2s * r.base - r.running) / r.action_power)
        .fold(f64::INFINITY, f64::min);
    let c3 = if coercivity_margin.is_finite() { coercivity_margin.max(0.0) } else { 1.0 };

    let flag = |condition: Condition, w: Option<Witness>| Check {
        condition,
        verdict: if w.is_some() { Verdict::Fail } else { Verdict::Pass },
        witness: w,
    };
    let mut checks = vec![flag(Condition::Finite, finite_fail), flag(Condition::Purity, purity_fail)];
    if bundle.cloud_free_dynamics {
        checks.push(flag(Condition::CloudFreeClaim, cloud_fail));
    }
    let mut report = ValidationReport {
        samples: probe.samples,
        radius: probe.radius,
        lipschitz_estimate,
        growth_violations,
        coercivity_margin,
        fitted: Constants { c1, c2, c3 },
        checks,
        records,
    };
    let judged = report.check_with(Constants { c1: c1s, c2: c2s, c3: 0.0 });
    let mut coercive = judge(Condition::Coercivity, &[], |_| 0.0, 0.0);
    if !(coercivity_margin > 0.0) {
        let worst = report
            .records
            .iter()
            .filter(|r| r.action_power > 0.0)
            .min_by(|a, b| {
                ((c2s * a.base - a.running) / a.action_power).total_cmp(&((c2s * b.base - b.running) / b.action_power))
            });
        coercive = Check {
            condition: Condition::Coercivity,
            verdict: Verdict::Fail,
            witness: worst.map(|r| witness(r, coercivity_margin)),
        };
    }
    for c in judged {
        if matches!(c.condition, Condition::Finite | Condition::Purity | Condition::CloudFreeClaim) {
            continue;
        }
        if c.condition == Condition::Coercivity {
            report.checks.push(coercive.clone());
        } else {
            report.checks.push(c);
        }
    }
    Ok(report)
}

fn norm_diff(x: &[f64], y: &[f64]) -> f64 {
    crate::measures::cloud::dist(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{scenario_example33, Dims};

    fn probe() -> Probe {
        Probe { samples: 200, radius: 1.0, seed: 3 }
    }

    #[test]
    fn example33_passes() {
        for sigma in [0.0, 1.0, 2.5] {
            let report = validate_coefficients(&scenario_example33(sigma).unwrap(), probe()).unwrap();
            assert!(report.passed(), "sigma={sigma}: {:?}", report.checks);
        }
    }

    #[test]
    fn quadratic_drift_fails_lipschitz() {
        let b = CoefficientBundle::builder("quad", Dims { d: 1, m: 1, m0: 1 }, 1.0)
            .drift(|_, x, _, _, out| out[0] = x[0] * x[0])
            .build()
            .unwrap();
        let report = validate_coefficients(&b, probe()).unwrap();
        assert_eq!(report.verdict(Condition::Lipschitz), Some(Verdict::Fail));
        let check = report.checks.iter().find(|c| c.condition == Condition::Lipschitz).unwrap();
        let w = check.witness.as_ref().unwrap();
        assert!(w.value > 2.0 * report.fitted.c1);
    }

    #[test]
    fn power_cost_has_unit_margin() {
        let b = CoefficientBundle::builder("coercive", Dims { d: 1, m: 1, m0: 1 }, 1.0)
            .actions(crate::model::ActionSet::interval(-3.0, 3.0).unwrap())
            .running(|_, _, _, a| -a[0].abs().powi(3))
            .build()
            .unwrap();
        let report = validate_coefficients(&b, probe()).unwrap();
        assert!(report.coercivity_margin >= 1.0);
    }

    #[test]
    fn non_finite_values_fail_with_witness() {
        let b = CoefficientBundle::builder("nan", Dims { d: 1, m: 1, m0: 1 }, 1.0)
            .terminal(|x, _| if x[0] > 0.5 { f64::NAN } else { 0.0 })
            .build()
            .unwrap();
        let report = validate_coefficients(&b, probe()).unwrap();
        let check = &report.checks[0];
        assert_eq!(check.condition, Condition::Finite);
        assert_eq!(check.verdict, Verdict::Fail);
        assert!(check.witness.as_ref().unwrap().x[0] > 0.5);
    }

    #[test]
    fn false_cloud_free_claim_is_caught() {
        let b = CoefficientBundle::builder("liar", Dims { d: 1, m: 1, m0: 1 }, 1.0)
            .drift(|_, _, c, _, out| out[0] = c.mean()[0])
            .cloud_free_dynamics(true)
            .build()
            .unwrap();
        let report = validate_coefficients(&b, probe()).unwrap();
        assert_eq!(report.verdict(Condition::CloudFreeClaim), Some(Verdict::Fail));
    }
}
