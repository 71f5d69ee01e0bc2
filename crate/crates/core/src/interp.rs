//! Linear interpolation models and interpolation-based approximate subgradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Branch, MaxRepresentation, PieceCache, ProblemOracle, ProblemSpec};
use crate::sampling::PoisedSample;

/// `F(x) = intercept + <gradient, x>`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub gradient: Vec<f64>,
}

impl LinearModel {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.intercept + linalg::dot(&self.gradient, x)
    }
}

/// Fits the unique affine interpolant through `values` at the sample points
/// (center first).
///
/// The system is solved in coordinates relative to the center, which is the
/// same model with a better conditioned matrix.
pub fn fit_linear_model(sample: &PoisedSample, values: &[f64]) -> Result<LinearModel> {
    let m = sample.dim();
    if values.len() != m + 1 {
        return Err(Error::DimensionMismatch {
            expected: m + 1,
            got: values.len(),
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::OracleFailure {
            piece: i,
            value: values[i],
        });
    }
    let mut rows = Vec::with_capacity(m + 1);
    rows.push(std::iter::once(1.0).chain(std::iter::repeat_n(0.0, m)).collect::<Vec<_>>());
    for d in sample.displacements() {
        rows.push(std::iter::once(1.0).chain(d).collect());
    }
    let coeffs = linalg::solve(&rows, values)?;
    let gradient = coeffs[1..].to_vec();
    let model = LinearModel {
        intercept: coeffs[0] - linalg::dot(&gradient, &sample.center),
        gradient,
    };
    for (y, &v) in sample.all_points().zip(values) {
        if (model.value(y) - v).abs() > 1e-8 * (1.0 + v.abs()) {
            return Err(Error::SingularSystem);
        }
    }
    Ok(model)
}

/// How the convex weights over the active pieces are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// All weight on the lowest active index.
    #[default]
    FirstActive,
    /// Equal weight on every active index.
    UniformActive,
}

/// `V = sum_i lambda_i grad F_{t_i}` over active pieces at the sample center.
#[derive(Clone, Debug, PartialEq)]
pub struct ApproxSubgradient {
    pub vector: Vec<f64>,
    pub branch: Branch,
    pub active_indices: Vec<usize>,
    /// Weights aligned with `active_indices`.
    pub weights: Vec<f64>,
    /// Value of the represented function at the center.
    pub center_value: f64,
    /// `K (1 + sqrt(m) ||L^-1|| / 2) Delta`, when a Hessian bound is known.
    pub theory_bound: Option<f64>,
}

/// Multiplier of `K * Delta` in the interpolation gradient error bound.
pub fn error_factor(dim: usize, inv_norm: f64) -> f64 {
    1.0 + (dim as f64).sqrt() * inv_norm / 2.0
}

/// Evaluates every piece of `rep` at every sample point (counted, cached),
/// determines the active set at the center and combines the interpolated
/// gradients of the active pieces. The result is labelled with `branch`.
pub fn approx_subgradient(
    rep: &MaxRepresentation,
    branch: Branch,
    sample: &PoisedSample,
    cache: &mut PieceCache,
    calls: &mut u64,
    rule: WeightRule,
) -> Result<ApproxSubgradient> {
    let evals = sample
        .all_points()
        .map(|y| rep.evaluate(y, cache, calls))
        .collect::<Result<Vec<_>>>()?;
    combine(rep, sample, &evals, rule, branch)
}

fn combine(
    rep: &MaxRepresentation,
    sample: &PoisedSample,
    evals: &[crate::model::Evaluation],
    rule: WeightRule,
    branch: Branch,
) -> Result<ApproxSubgradient> {
    let m = sample.dim();
    let active = evals[0].active.clone();
    let (chosen, weights): (Vec<usize>, Vec<f64>) = match rule {
        WeightRule::FirstActive => (vec![active[0]], vec![1.0]),
        WeightRule::UniformActive => {
            let w = 1.0 / active.len() as f64;
            (active.clone(), vec![w; active.len()])
        }
    };
    let mut vector = vec![0.0; m];
    for (&piece, &w) in chosen.iter().zip(&weights) {
        let values: Vec<f64> = evals.iter().map(|e| e.pieces[piece]).collect();
        let model = fit_linear_model(sample, &values)?;
        vector.iter_mut().zip(&model.gradient).for_each(|(v, g)| *v += w * g);
    }
    let k = rep
        .pieces()
        .iter()
        .map(|p| p.hessian_bound)
        .try_fold(0.0f64, |acc, b| b.map(|b| acc.max(b)));
    Ok(ApproxSubgradient {
        vector,
        branch,
        active_indices: chosen,
        weights,
        center_value: evals[0].value,
        theory_bound: k.map(|k| k * error_factor(m, sample.inv_norm) * sample.radius),
    })
}

/// `E(x)`: the objective's approximate subgradient when `g(x) <= eps`, the
/// constraint's otherwise. `sample.center` is `x`.
pub fn select_e(
    oracle: &mut ProblemOracle<'_>,
    eps: f64,
    sample: &PoisedSample,
    rule: WeightRule,
) -> Result<ApproxSubgradient> {
    let g = oracle.evaluate(Branch::Constraint, &sample.center)?;
    let branch = if g.value <= eps {
        Branch::Objective
    } else {
        Branch::Constraint
    };
    approx_subgradient_for(oracle, branch, sample, rule)
}

/// [`approx_subgradient`] for one function of a problem, with the problem's
/// constants (when present) used for the theoretical bound.
pub fn approx_subgradient_for(
    oracle: &mut ProblemOracle<'_>,
    branch: Branch,
    sample: &PoisedSample,
    rule: WeightRule,
) -> Result<ApproxSubgradient> {
    let problem: &ProblemSpec = oracle.problem();
    let evals = sample
        .all_points()
        .map(|y| oracle.evaluate(branch, y))
        .collect::<Result<Vec<_>>>()?;
    let mut v = combine(problem.representation(branch), sample, &evals, rule, branch)?;
    if let Some(c) = problem.constants {
        v.theory_bound =
            Some(c.k_f.max(c.k_g) * error_factor(sample.dim(), sample.inv_norm) * sample.radius);
    }
    Ok(v)
}
