//! Problem model: finite-max black-box functions, the feasible box, and
//! oracle-call accounting.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative activity tolerance used to decide which pieces attain the max.
pub const DEFAULT_ACTIVITY_TOLERANCE: f64 = 1e-8;

/// A smooth function available only through its values.
///
/// `gradient` and `is_convex` are optional analytic metadata. The solver never
/// calls `gradient`; it exists for diagnostics and tests.
pub trait PieceOracle: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn is_convex(&self) -> Option<bool> {
        None
    }
}

struct FnPiece<F>(F);

impl<F> fmt::Debug for FnPiece<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnPiece")
    }
}

impl<F> PieceOracle for FnPiece<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

/// One smooth piece `f_t` of a max representation.
#[derive(Clone, Debug)]
pub struct SmoothPiece {
    oracle: Arc<dyn PieceOracle>,
    /// Bound on the spectral norm of the Hessian over the box.
    pub hessian_bound: Option<f64>,
    /// Bound on the gradient norm over the box.
    pub gradient_bound: Option<f64>,
}

impl SmoothPiece {
    pub fn new(oracle: impl PieceOracle + 'static) -> Self {
        Self::from_arc(Arc::new(oracle))
    }

    pub fn from_arc(oracle: Arc<dyn PieceOracle>) -> Self {
        SmoothPiece {
            oracle,
            hessian_bound: None,
            gradient_bound: None,
        }
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(FnPiece(f))
    }

    pub fn with_bounds(mut self, hessian_bound: f64, gradient_bound: f64) -> Self {
        self.hessian_bound = Some(hessian_bound);
        self.gradient_bound = Some(gradient_bound);
        self
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.oracle.value(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.oracle.gradient(x)
    }

    pub fn oracle(&self) -> &Arc<dyn PieceOracle> {
        &self.oracle
    }
}

/// Piece values at one point together with the max and the active set.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// Indices (0-based, ascending) of the pieces that attain the max.
    pub active: Vec<usize>,
    pub pieces: Vec<f64>,
}

/// Per-point cache of piece values, keyed by the exact bit pattern of the point.
#[derive(Clone, Debug, Default)]
pub struct PieceCache {
    entries: HashMap<Vec<u64>, Vec<f64>>,
    hits: u64,
}

impl PieceCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(x: &[f64]) -> Vec<u64> {
        x.iter().map(|v| v.to_bits()).collect()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `f = max_i f_i` over a nonempty ordered list of smooth pieces.
#[derive(Clone, Debug)]
pub struct MaxRepresentation {
    pieces: Vec<SmoothPiece>,
    activity_tolerance: f64,
}

impl MaxRepresentation {
    pub fn new(pieces: Vec<SmoothPiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidProblem(
                "a max representation needs at least one piece".into(),
            ));
        }
        Ok(MaxRepresentation {
            pieces,
            activity_tolerance: DEFAULT_ACTIVITY_TOLERANCE,
        })
    }

    pub fn with_activity_tolerance(mut self, tolerance: f64) -> Result<Self> {
        if !(tolerance >= 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "activity tolerance must be finite and >= 0, got {tolerance}"
            )));
        }
        self.activity_tolerance = tolerance;
        Ok(self)
    }

    pub fn pieces(&self) -> &[SmoothPiece] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn activity_tolerance(&self) -> f64 {
        self.activity_tolerance
    }

    /// Calls every piece once at `x`. Not counted, not cached.
    pub fn piece_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.pieces
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let v = p.value(x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::OracleFailure { piece: i, value: v })
                }
            })
            .collect()
    }

    /// Max and active set for already computed piece values.
    pub fn summarize(&self, pieces: Vec<f64>) -> Evaluation {
        let value = pieces.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let threshold = value - self.activity_tolerance * (1.0 + value.abs());
        let active = pieces
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= threshold)
            .map(|(i, _)| i)
            .collect();
        Evaluation {
            value,
            active,
            pieces,
        }
    }

    /// Uncounted evaluation, for diagnostics and tests.
    pub fn evaluate_uncounted(&self, x: &[f64]) -> Result<Evaluation> {
        Ok(self.summarize(self.piece_values(x)?))
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate_uncounted(x)?.value)
    }

    /// Counted evaluation: a cache miss calls every piece once and adds the
    /// number of pieces to `calls`; a hit costs nothing.
    pub fn evaluate(&self, x: &[f64], cache: &mut PieceCache, calls: &mut u64) -> Result<Evaluation> {
        let key = PieceCache::key(x);
        if let Some(values) = cache.entries.get(&key) {
            cache.hits += 1;
            return Ok(self.summarize(values.clone()));
        }
        let values = self.piece_values(x);
        // A failing oracle was still invoked.
        *calls += self.pieces.len() as u64;
        let values = values?;
        cache.entries.insert(key, values.clone());
        Ok(self.summarize(values))
    }
}

/// Which of the two functions of the problem is meant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Objective,
    Constraint,
}

/// Piece-call counters of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCounter {
    pub f_calls: u64,
    pub g_calls: u64,
}

/// Axis-aligned compact box `X = [lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawBox> for BoxSet {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        BoxSet::new(raw.lower, raw.upper)
    }
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidProblem("box must have dimension >= 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("box bounds must be finite".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::InvalidProblem("box has lower > upper".into()));
        }
        if lower.iter().zip(&upper).all(|(l, u)| l == u) {
            return Err(Error::InvalidProblem("box must not be a singleton".into()));
        }
        Ok(BoxSet { lower, upper })
    }

    /// The box `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    /// Euclidean projection (coordinatewise clamp).
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect()
    }

    /// `max_{x,y in X} ||x - y|| = ||upper - lower||`.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn longest_edge(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .fold(0.0, f64::max)
    }

    /// True when the closed ball `B(center, radius)` lies inside the box.
    pub fn contains_ball(&self, center: &[f64], radius: f64) -> bool {
        center
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(c, (l, u))| c - radius >= *l && c + radius <= *u)
    }

    /// All `2^m` vertices. Only sensible for small dimensions.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        assert!(m <= 20, "corner enumeration of a {m}-dimensional box");
        (0..1usize << m)
            .map(|mask| {
                (0..m)
                    .map(|i| if mask >> i & 1 == 1 { self.upper[i] } else { self.lower[i] })
                    .collect()
            })
            .collect()
    }

    /// Maps a point of the unit cube onto the box.
    pub fn from_unit(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(s, (l, u))| l + s * (u - l))
            .collect()
    }
}

/// Analytic constants of a problem over its box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Subgradient bound of the objective.
    #[serde(rename = "L_f")]
    pub l_f: f64,
    /// Subgradient bound of the constraint.
    #[serde(rename = "L_g")]
    pub l_g: f64,
    /// Gradient Lipschitz constant shared by all objective pieces.
    #[serde(rename = "K_f")]
    pub k_f: f64,
    /// Gradient Lipschitz constant shared by all constraint pieces.
    #[serde(rename = "K_g")]
    pub k_g: f64,
}

/// `min { f(x) : g(x) <= 0, x in X }`.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub dimension: usize,
    pub objective: MaxRepresentation,
    pub constraint: MaxRepresentation,
    pub bounds: BoxSet,
    pub start: Vec<f64>,
    pub known_optimum: Option<f64>,
    pub constants: Option<ProblemConstants>,
}

impl ProblemSpec {
    pub fn new(
        objective: MaxRepresentation,
        constraint: MaxRepresentation,
        bounds: BoxSet,
        start: Vec<f64>,
    ) -> Result<Self> {
        let spec = ProblemSpec {
            dimension: bounds.dim(),
            objective,
            constraint,
            bounds,
            start,
            known_optimum: None,
            constants: None,
        };
        spec.validate()?;
        spec.warn_nonconvex();
        Ok(spec)
    }

    pub fn with_known_optimum(mut self, f_opt: f64) -> Result<Self> {
        if !f_opt.is_finite() {
            return Err(Error::InvalidProblem("known optimum must be finite".into()));
        }
        self.known_optimum = Some(f_opt);
        Ok(self)
    }

    pub fn with_constants(mut self, constants: ProblemConstants) -> Result<Self> {
        let c = constants;
        if [c.l_f, c.l_g, c.k_f, c.k_g].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidProblem("constants must be finite and >= 0".into()));
        }
        self.constants = Some(constants);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 || self.bounds.dim() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: self.bounds.dim(),
            });
        }
        if self.start.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: self.start.len(),
            });
        }
        if !self.bounds.contains(&self.start) {
            return Err(Error::InvalidProblem(format!(
                "start {:?} is not in the box",
                self.start
            )));
        }
        Ok(())
    }

    fn warn_nonconvex(&self) {
        for (label, rep) in [("objective", &self.objective), ("constraint", &self.constraint)] {
            for (i, piece) in rep.pieces().iter().enumerate() {
                if piece.oracle().is_convex() == Some(false) {
                    log::warn!(
                        "{label} piece {i} is nonconvex; convergence guarantees do not apply"
                    );
                }
            }
        }
    }

    pub fn representation(&self, branch: Branch) -> &MaxRepresentation {
        match branch {
            Branch::Objective => &self.objective,
            Branch::Constraint => &self.constraint,
        }
    }
}

/// Counting, caching access to the two value oracles of a problem.
///
/// One instance belongs to one run.
#[derive(Debug)]
pub struct ProblemOracle<'p> {
    problem: &'p ProblemSpec,
    counter: OracleCounter,
    f_cache: PieceCache,
    g_cache: PieceCache,
}

impl<'p> ProblemOracle<'p> {
    pub fn new(problem: &'p ProblemSpec) -> Self {
        ProblemOracle {
            problem,
            counter: OracleCounter::default(),
            f_cache: PieceCache::new(),
            g_cache: PieceCache::new(),
        }
    }

    pub fn problem(&self) -> &'p ProblemSpec {
        self.problem
    }

    pub fn evaluate(&mut self, branch: Branch, x: &[f64]) -> Result<Evaluation> {
        if x.len() != self.problem.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.problem.dimension,
                got: x.len(),
            });
        }
        let (rep, cache, calls) = match branch {
            Branch::Objective => (&self.problem.objective, &mut self.f_cache, &mut self.counter.f_calls),
            Branch::Constraint => (&self.problem.constraint, &mut self.g_cache, &mut self.counter.g_calls),
        };
        rep.evaluate(x, cache, calls)
    }

    pub fn counter(&self) -> OracleCounter {
        self.counter
    }

    pub fn cache_hits(&self) -> u64 {
        self.f_cache.hits() + self.g_cache.hits()
    }
}
