//! The derivative-free ε-CoMirror iteration and its diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bregman::{BregmanGeometry, DiameterReport, GeometryConfig};
use crate::error::{Error, Result};
use crate::interp::{approx_subgradient_for, WeightRule};
use crate::linalg;
use crate::model::{Branch, BoxSet, OracleCounter, ProblemOracle, ProblemSpec};
use crate::sampling::{build_poised_sample_in_stream, SamplingStrategy};

/// `||E||` at or below this is treated as zero.
pub const ZERO_GRADIENT: f64 = 1e-14;
/// Radius halvings tried when `E` vanishes before declaring stationarity.
pub const MAX_REFINEMENTS: usize = 5;

/// `Delta_k = scale / sqrt(k + 1)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaSchedule {
    #[default]
    Default,
    Scaled { scale: f64 },
}

impl DeltaSchedule {
    pub fn scale(&self) -> f64 {
        match *self {
            DeltaSchedule::Default => 1.0,
            DeltaSchedule::Scaled { scale } => scale,
        }
    }

    pub fn delta(&self, k: usize) -> f64 {
        self.scale() / ((k + 1) as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eps: f64,
    /// Bound on the inverse norm of accepted samples.
    #[serde(rename = "M")]
    pub max_inv_norm: f64,
    pub max_iterations: usize,
    /// Cap on objective piece evaluations; `None` for no cap.
    pub f_eval_budget: Option<u64>,
    pub delta_schedule: DeltaSchedule,
    #[serde(flatten)]
    pub geometry: GeometryConfig,
    #[serde(flatten)]
    pub strategy: SamplingStrategy,
    pub weight_rule: WeightRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps: 1e-3,
            max_inv_norm: 10.0,
            max_iterations: 10_000,
            f_eval_budget: Some(200),
            delta_schedule: DeltaSchedule::Default,
            geometry: GeometryConfig::default(),
            strategy: SamplingStrategy::default(),
            weight_rule: WeightRule::FirstActive,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be > 0, got {}", self.eps));
        }
        if !(self.max_inv_norm >= 1.0 && self.max_inv_norm.is_finite()) {
            return bad(format!("M must be >= 1, got {}", self.max_inv_norm));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive".into());
        }
        let c = self.delta_schedule.scale();
        if !(c > 0.0 && c <= 1.0) {
            return bad(format!("delta scale must lie in (0, 1], got {c}"));
        }
        if self.strategy.max_resamples == 0 {
            return bad("max_resamples must be positive".into());
        }
        Ok(())
    }
}

/// One iterate `x_k` with the quantities used to leave it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vec<f64>,
    /// Only evaluated at ε-feasible iterates.
    pub f_value: Option<f64>,
    pub g_value: f64,
    pub eps_feasible: bool,
    #[serde(rename = "E")]
    pub e: Vec<f64>,
    #[serde(rename = "E_norm")]
    pub e_norm: f64,
    pub t: f64,
    pub delta: f64,
    pub inv_norm: f64,
    /// The sampling ball is not contained in the box.
    pub boundary_truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    #[serde(rename = "budget_exhausted")]
    BudgetExhausted,
    #[serde(rename = "max_iterations")]
    MaxIterations,
    #[serde(rename = "stationary_E")]
    StationaryE,
    #[serde(rename = "poisedness_failure")]
    PoisednessFailure,
    #[serde(rename = "oracle_failure")]
    OracleFailure,
}

impl Termination {
    pub fn is_failure(self) -> bool {
        matches!(self, Termination::PoisednessFailure | Termination::OracleFailure)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::BudgetExhausted => "budget_exhausted",
            Termination::MaxIterations => "max_iterations",
            Termination::StationaryE => "stationary_E",
            Termination::PoisednessFailure => "poisedness_failure",
            Termination::OracleFailure => "oracle_failure",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestPoint {
    pub k: usize,
    pub x: Vec<f64>,
    pub f: f64,
    pub g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub f_evals: u64,
    pub g_evals: u64,
    pub cache_hits: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub history: Vec<IterationRecord>,
    pub best: Option<BestPoint>,
    pub counters: Counters,
    pub termination: Termination,
    /// Message of the error that ended the run, if any.
    pub failure: Option<String>,
    pub geometry: BregmanGeometry,
    pub diameters: DiameterReport,
    pub diagnostics: Option<BoundReport>,
}

/// `sqrt(theta * alpha) / (||E|| sqrt(k))`.
pub fn step_size(theta: f64, alpha: f64, e_norm: f64, k: usize) -> Result<f64> {
    if !(e_norm > ZERO_GRADIENT) {
        return Err(Error::ZeroGradient(e_norm));
    }
    if !(theta > 0.0 && alpha > 0.0 && k >= 1) {
        return Err(Error::InvalidConfig(format!(
            "step size needs theta > 0, alpha > 0, k >= 1 (got {theta}, {alpha}, {k})"
        )));
    }
    Ok((theta * alpha).sqrt() / (e_norm * (k as f64).sqrt()))
}

fn best_of(history: &[IterationRecord]) -> Option<BestPoint> {
    history
        .iter()
        .filter(|r| r.eps_feasible)
        .filter_map(|r| r.f_value.map(|f| (r, f)))
        .fold(None, |best: Option<BestPoint>, (r, f)| match best {
            Some(b) if b.f <= f => Some(b),
            _ => Some(BestPoint {
                k: r.k,
                x: r.x.clone(),
                f,
                g: r.g_value,
            }),
        })
}

enum Stop {
    Done(Termination),
    Failed(Termination, Error),
}

impl From<Error> for Stop {
    fn from(e: Error) -> Self {
        let t = match e {
            Error::PoisednessFailure { .. } | Error::InvalidRadius(_) | Error::SingularSystem => {
                Termination::PoisednessFailure
            }
            _ => Termination::OracleFailure,
        };
        Stop::Failed(t, e)
    }
}

/// Runs the method from `problem.start`. Numerical failures end the run
/// with a failure termination and the partial history; only invalid input
/// is reported as `Err`.
pub fn run(problem: &ProblemSpec, config: &SolverConfig) -> Result<RunResult> {
    config.validate()?;
    problem.validate()?;
    let bounds = &problem.bounds;
    let geometry = config.geometry.resolve(bounds)?;
    let diameters = geometry.diameters(bounds)?;
    let mut oracle = ProblemOracle::new(problem);
    let mut history = Vec::new();

    let stop = iterate(problem, config, &geometry, &diameters, &mut oracle, &mut history);
    let (termination, failure) = match stop {
        Stop::Done(t) => (t, None),
        Stop::Failed(t, e) => (t, Some(e.to_string())),
    };
    log::info!(
        "run ended after {} iterations: {}",
        history.len(),
        termination.as_str()
    );
    let OracleCounter { f_calls, g_calls } = oracle.counter();
    let mut result = RunResult {
        best: best_of(&history),
        history,
        counters: Counters {
            f_evals: f_calls,
            g_evals: g_calls,
            cache_hits: oracle.cache_hits(),
        },
        termination,
        failure,
        geometry,
        diameters,
        diagnostics: None,
    };
    if problem.constants.is_some() && problem.known_optimum.is_some() {
        result.diagnostics = compute_bound_report(&result, problem, config).ok();
    }
    Ok(result)
}

fn iterate(
    problem: &ProblemSpec,
    config: &SolverConfig,
    geometry: &BregmanGeometry,
    diameters: &DiameterReport,
    oracle: &mut ProblemOracle<'_>,
    history: &mut Vec<IterationRecord>,
) -> Stop {
    let bounds = &problem.bounds;
    let m = problem.dimension;
    let f_cost = ((m + 1) * problem.objective.len()) as u64;
    let mut x = problem.start.clone();

    for k in 1..=config.max_iterations {
        let step = (|| -> std::result::Result<Option<Vec<f64>>, Stop> {
            let g = oracle.evaluate(Branch::Constraint, &x)?.value;
            let feasible = g <= config.eps;
            let branch = if feasible { Branch::Objective } else { Branch::Constraint };
            let over_budget = |oracle: &ProblemOracle<'_>| {
                feasible
                    && config
                        .f_eval_budget
                        .is_some_and(|b| oracle.counter().f_calls + f_cost > b)
            };

            let mut delta = config.delta_schedule.delta(k);
            let mut attempt = 0u64;
            let (sample, v) = loop {
                if over_budget(oracle) {
                    return Err(Stop::Done(Termination::BudgetExhausted));
                }
                let sample = build_poised_sample_in_stream(
                    &x,
                    delta,
                    config.max_inv_norm,
                    &config.strategy,
                    ((k as u64) << 3) | attempt,
                )?;
                let v = approx_subgradient_for(oracle, branch, &sample, config.weight_rule)?;
                if linalg::norm(&v.vector) > ZERO_GRADIENT || attempt as usize == MAX_REFINEMENTS {
                    break (sample, v);
                }
                attempt += 1;
                delta /= 2.0;
            };
            let f_value = if feasible {
                Some(oracle.evaluate(Branch::Objective, &x)?.value)
            } else {
                None
            };
            let e_norm = linalg::norm(&v.vector);
            let stationary = e_norm <= ZERO_GRADIENT;
            let t = if stationary {
                0.0
            } else {
                step_size(diameters.theta, geometry.alpha, e_norm, k)?
            };
            let next = if stationary {
                None
            } else {
                let scaled: Vec<f64> = v.vector.iter().map(|e| t * e).collect();
                Some(geometry.mirror_step(bounds, &x, &scaled)?)
            };
            history.push(IterationRecord {
                k,
                x: x.clone(),
                f_value,
                g_value: g,
                eps_feasible: feasible,
                e: v.vector,
                e_norm,
                t,
                delta,
                inv_norm: sample.inv_norm,
                boundary_truncated: !bounds.contains_ball(&x, delta),
            });
            Ok(next)
        })();
        match step {
            Ok(Some(next)) => x = next,
            Ok(None) => return Stop::Done(Termination::StationaryE),
            Err(stop) => return stop,
        }
    }
    Stop::Done(Termination::MaxIterations)
}

/// One `n` of the efficiency estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kappa1: f64,
    pub kappa2: f64,
    pub theta: f64,
    pub alpha: f64,
    pub omega_diam: f64,
    #[serde(rename = "C_stated")]
    pub c_stated: f64,
    #[serde(rename = "C_proof")]
    pub c_proof: f64,
    pub per_n: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn all_satisfied(&self) -> bool {
        self.per_n.iter().all(|c| c.satisfied)
    }

    pub fn violations(&self) -> usize {
        self.per_n.iter().filter(|c| !c.satisfied).count()
    }
}

/// Convergence constants of a run and the check
/// `min{ min_{k <= n, g(x_k) <= eps} f(x_k) - f_opt, eps } <= C_proof / sqrt(n)`
/// for every `n` from 4 to the history length.
pub fn compute_bound_report(
    result: &RunResult,
    problem: &ProblemSpec,
    config: &SolverConfig,
) -> Result<BoundReport> {
    let c = problem
        .constants
        .ok_or_else(|| Error::ConstantsUnavailable("problem has no analytic constants".into()))?;
    let f_opt = problem
        .known_optimum
        .ok_or_else(|| Error::ConstantsUnavailable("problem has no known optimum".into()))?;
    let m = problem.dimension as f64;
    let kappa1 = c.l_f.max(c.l_g);
    let kappa2 = c.k_f.max(c.k_g) * (1.0 + m.sqrt() * config.max_inv_norm / 2.0);
    let theta = result.diameters.theta;
    let alpha = result.geometry.alpha;
    let omega = result.diameters.omega_diam;
    let lead = 2.0 * (theta / alpha).sqrt() * kappa1.max(kappa2) * (1.0 + 2f64.ln())
        / (2.0 - 2f64.sqrt());
    let c_stated = lead + kappa2 * omega;
    let c_proof = lead + 2f64.sqrt() * kappa2 * omega;

    let mut per_n = Vec::new();
    let mut best_gap = f64::INFINITY;
    for (i, r) in result.history.iter().enumerate() {
        if let (true, Some(f)) = (r.eps_feasible, r.f_value) {
            best_gap = best_gap.min(f - f_opt);
        }
        let n = i + 1;
        if n >= 4 {
            let lhs = best_gap.min(config.eps);
            let rhs = c_proof / (n as f64).sqrt();
            per_n.push(BoundCheck {
                n,
                lhs,
                rhs,
                satisfied: lhs <= rhs,
            });
        }
    }
    Ok(BoundReport {
        kappa1,
        kappa2,
        theta,
        alpha,
        omega_diam: omega,
        c_stated,
        c_proof,
        per_n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSum {
    pub n: usize,
    pub sum_inv_k: f64,
    pub bound1: f64,
    pub sum_inv_sqrt: f64,
    pub bound2: f64,
    pub ok: bool,
}

fn harmonic_sum_from(n: usize, sum_inv_k: f64, sum_inv_sqrt: f64) -> HarmonicSum {
    let bound1 = 2.0 * 2f64.ln();
    let bound2 = (2.0 - 2f64.sqrt()) * (n as f64).sqrt();
    HarmonicSum {
        n,
        sum_inv_k,
        bound1,
        sum_inv_sqrt,
        bound2,
        ok: sum_inv_k <= bound1 && sum_inv_sqrt >= bound2,
    }
}

/// `sum_{k=floor(n/2)}^n 1/k <= 2 ln 2` and
/// `sum_{k=floor(n/2)}^n 1/sqrt(k) >= (2 - sqrt 2) sqrt(n)`.
pub fn harmonic_sum_check(n: usize) -> Result<HarmonicSum> {
    if n < 4 {
        return Err(Error::InvalidConfig(format!("lemma needs n >= 4, got {n}")));
    }
    let ks = n / 2..=n;
    let s1 = Neumaier::sum(ks.clone().map(|k| 1.0 / k as f64));
    let s2 = Neumaier::sum(ks.map(|k| 1.0 / (k as f64).sqrt()));
    Ok(harmonic_sum_from(n, s1, s2))
}

/// [`harmonic_sum_check`] for every `n` in `4..=n_max`, from compensated prefix sums.
pub fn harmonic_sum_sweep(n_max: usize) -> Vec<HarmonicSum> {
    let mut h1 = vec![Neumaier::default()];
    let mut h2 = vec![Neumaier::default()];
    for k in 1..=n_max {
        let (mut a, mut b) = (h1[k - 1], h2[k - 1]);
        a.add(1.0 / k as f64);
        b.add(1.0 / (k as f64).sqrt());
        h1.push(a);
        h2.push(b);
    }
    (4..=n_max)
        .map(|n| {
            let lo = n / 2 - 1;
            harmonic_sum_from(n, h1[n].diff(&h1[lo]), h2[n].diff(&h2[lo]))
        })
        .collect()
}

/// Compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }

    fn diff(&self, other: &Neumaier) -> f64 {
        (self.sum - other.sum) + (self.comp - other.comp)
    }

    fn sum(values: impl Iterator<Item = f64>) -> f64 {
        let mut acc = Neumaier::default();
        values.for_each(|v| acc.add(v));
        acc.value()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyLemmaReport {
    pub triples: u64,
    pub violations: u64,
    /// Smallest `rhs - lhs` seen.
    pub worst_margin: f64,
}

/// Box corners followed by `n_random` uniform points of the box.
pub fn key_lemma_probes(bounds: &BoxSet, n_random: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = bounds.corners();
    for _ in 0..n_random {
        let unit: Vec<f64> = (0..bounds.dim()).map(|_| rng.random::<f64>()).collect();
        probes.push(bounds.from_unit(&unit));
    }
    probes
}

/// Checks
/// `sum_{k=i}^{j} t_k <E_k, x_k - u> <= theta + (1 / 2 alpha) sum_{k=i}^{j} t_k^2 ||E_k||^2 + slack`
/// for all `1 <= i < j <= n` and every probe `u`.
pub fn key_lemma_check(result: &RunResult, probes: &[Vec<f64>], slack: f64) -> KeyLemmaReport {
    let h = &result.history;
    let theta = result.diameters.theta;
    let alpha = result.geometry.alpha;
    let m = h.first().map_or(0, |r| r.x.len());
    // Prefix sums of t<E,x>, tE and t^2||E||^2.
    let mut a = vec![0.0];
    let mut b = vec![vec![0.0; m]];
    let mut c = vec![0.0];
    for r in h {
        let te: Vec<f64> = r.e.iter().map(|e| r.t * e).collect();
        a.push(a.last().unwrap() + linalg::dot(&te, &r.x));
        b.push(b.last().unwrap().iter().zip(&te).map(|(p, q)| p + q).collect());
        c.push(c.last().unwrap() + r.t * r.t * r.e_norm * r.e_norm);
    }
    let mut report = KeyLemmaReport {
        triples: 0,
        violations: 0,
        worst_margin: f64::INFINITY,
    };
    for i in 0..h.len() {
        for j in i + 1..h.len() {
            let sa = a[j + 1] - a[i];
            let sb: Vec<f64> = b[j + 1].iter().zip(&b[i]).map(|(p, q)| p - q).collect();
            let rhs = theta + (c[j + 1] - c[i]) / (2.0 * alpha);
            for u in probes {
                let margin = rhs - (sa - linalg::dot(&sb, u));
                report.triples += 1;
                if margin < -slack {
                    report.violations += 1;
                }
                report.worst_margin = report.worst_margin.min(margin);
            }
        }
    }
    report
}
