//! Randomized numerical checks of the geometry and interpolation layers.
//!
//! Every instance is generated from its own random stream, so results do
//! not depend on the [`Execution`] mode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bregman::{BregmanGeometry, GeometryKind};
use crate::interp::{approx_subgradient, error_factor, WeightRule};
use crate::linalg;
use crate::model::{Branch, BoxSet, MaxRepresentation, PieceCache, SmoothPiece};
use crate::par::{self, Execution};
use crate::poly::{Monomial, Polynomial};
use crate::sampling::{build_poised_sample, SamplingStrategy};

/// Outcome of one randomized suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    /// Largest excess over the allowed value; negative when every case passed
    /// with room to spare.
    pub worst_excess: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.cases > 0 && self.violations == 0
    }

    fn collect(name: &str, excesses: impl IntoIterator<Item = f64>) -> Self {
        let mut r = SuiteReport {
            name: name.to_string(),
            cases: 0,
            violations: 0,
            worst_excess: f64::NEG_INFINITY,
        };
        for e in excesses {
            r.cases += 1;
            // NaN counts as a violation.
            if !(e <= 0.0) {
                r.violations += 1;
            }
            r.worst_excess = r.worst_excess.max(if e.is_nan() { f64::INFINITY } else { e });
        }
        r
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_box(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> BoxSet {
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    for _ in 0..dim {
        let a = rng.random_range(lo..hi);
        let b = rng.random_range(lo..hi);
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        lower.push(a);
        upper.push(b.max(a + 0.05));
    }
    BoxSet::new(lower, upper).expect("valid random box")
}

fn random_point(rng: &mut ChaCha8Rng, b: &BoxSet) -> Vec<f64> {
    let u: Vec<f64> = (0..b.dim()).map(|_| rng.random::<f64>()).collect();
    b.from_unit(&u)
}

fn random_geometry(rng: &mut ChaCha8Rng, kind: GeometryKind, dim: usize) -> (BregmanGeometry, BoxSet) {
    match kind {
        GeometryKind::Euclidean => (BregmanGeometry::euclidean(), random_box(rng, dim, -5.0, 5.0)),
        GeometryKind::Entropy => {
            let b = random_box(rng, dim, 0.0, 5.0);
            let shift = rng.random_range(1e-3..1.0);
            (BregmanGeometry::entropy(shift, &b).expect("shifted box"), b)
        }
    }
}

/// The three equivalent strong-convexity conditions for `alpha`, plus the
/// distance lower bound, on `pairs` random pairs per geometry. The excess of
/// each case is the largest violation among the three conditions.
pub fn strong_convexity_suite(exec: Execution, pairs: usize, seed: u64, tol: f64) -> SuiteReport {
    let kinds = [GeometryKind::Euclidean, GeometryKind::Entropy];
    let excess = par::map_range(exec, 2 * pairs, |i| {
        let mut rng = stream_rng(seed, i as u64);
        let dim = rng.random_range(1..=4);
        let (g, b) = random_geometry(&mut rng, kinds[i % 2], dim);
        let x = random_point(&mut rng, &b);
        let y = random_point(&mut rng, &b);
        let t = rng.random_range(0.0..1.0);
        let a = g.alpha;
        let sq = linalg::dist(&x, &y).powi(2);
        let mid: Vec<f64> = x.iter().zip(&y).map(|(p, q)| t * p + (1.0 - t) * q).collect();
        let w = |z: &[f64]| g.omega(z).expect("in domain");
        let c1 = w(&mid) - (t * w(&x) + (1.0 - t) * w(&y) - 0.5 * a * t * (1.0 - t) * sq);
        let c2 = 0.5 * a * sq - g.distance(&x, &y).expect("in domain");
        let gx = g.grad_omega(&x).expect("in domain");
        let gy = g.grad_omega(&y).expect("in domain");
        let diff: Vec<f64> = gx.iter().zip(&gy).map(|(p, q)| p - q).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p - q).collect();
        let c3 = a * sq - linalg::dot(&diff, &xy);
        c1.max(c2).max(c3) - tol
    });
    SuiteReport::collect("strong_convexity", excess)
}

/// Per-coordinate term of the mirror-step objective
/// `(s - w'(x)) z + w(z)`, written out independently of [`BregmanGeometry`].
fn mirror_term(kind: GeometryKind, shift: f64, x: f64, s: f64, z: f64) -> f64 {
    match kind {
        GeometryKind::Euclidean => (s - x) * z + 0.5 * z * z,
        GeometryKind::Entropy => {
            let lin = s - (1.0 + (x + shift).ln());
            lin * z + (z + shift) * (z + shift).ln()
        }
    }
}

/// Closed-form mirror steps against brute-force minimization over a grid of
/// `points_per_axis` points per coordinate, on 1-d and 2-d boxes. The excess
/// is the largest per-axis distance in units of grid cells, minus one.
pub fn mirror_grid_suite(exec: Execution, instances: usize, points_per_axis: usize, seed: u64) -> SuiteReport {
    let excess = par::map_range(exec, instances, |i| {
        let mut rng = stream_rng(seed, i as u64);
        let kind = if i % 2 == 0 { GeometryKind::Euclidean } else { GeometryKind::Entropy };
        let dim = 1 + (i / 2) % 2;
        let (g, b) = random_geometry(&mut rng, kind, dim);
        let x = random_point(&mut rng, &b);
        let step: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let z = g.mirror_step(&b, &x, &step).expect("valid step");

        let n = points_per_axis;
        let grids: Vec<Vec<f64>> = (0..dim)
            .map(|j| {
                let (l, u) = (b.lower()[j], b.upper()[j]);
                (0..n).map(|p| l + (u - l) * p as f64 / (n - 1) as f64).collect()
            })
            .collect();
        let tables: Vec<Vec<f64>> = (0..dim)
            .map(|j| {
                grids[j]
                    .iter()
                    .map(|&zj| mirror_term(kind, g.shift, x[j], step[j], zj))
                    .collect()
            })
            .collect();
        // Exhaustive search over the full tensor grid.
        let mut best = (f64::INFINITY, vec![0usize; dim]);
        if dim == 1 {
            for (p, &v) in tables[0].iter().enumerate() {
                if v < best.0 {
                    best = (v, vec![p]);
                }
            }
        } else {
            for (p, &v0) in tables[0].iter().enumerate() {
                for (q, &v1) in tables[1].iter().enumerate() {
                    let v = v0 + v1;
                    if v < best.0 {
                        best = (v, vec![p, q]);
                    }
                }
            }
        }
        (0..dim)
            .map(|j| {
                let cell = (b.upper()[j] - b.lower()[j]) / (n - 1) as f64;
                (z[j] - grids[j][best.1[j]]).abs() / cell - 1.0
            })
            .fold(f64::NEG_INFINITY, f64::max)
    });
    SuiteReport::collect("mirror_grid", excess)
}

/// A random quadratic `x^T A x / 2 + b^T x + c` whose Hessian has spectral
/// norm exactly `k`.
pub fn random_quadratic(rng: &mut ChaCha8Rng, dim: usize, k: f64) -> (Polynomial, Vec<Vec<f64>>, Vec<f64>) {
    let raw: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let sym: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|j| 0.5 * (raw[i][j] + raw[j][i])).collect())
        .collect();
    let norm = linalg::singular_values(&sym).into_iter().fold(0.0, f64::max);
    let a: Vec<Vec<f64>> = sym
        .iter()
        .map(|r| r.iter().map(|v| v * k / norm).collect())
        .collect();
    let lin: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
    let c = rng.random_range(-5.0..5.0);
    let mut terms = vec![Monomial {
        coef: c,
        powers: vec![0; dim],
    }];
    for i in 0..dim {
        let mut p = vec![0; dim];
        p[i] = 1;
        terms.push(Monomial { coef: lin[i], powers: p });
        for j in i..dim {
            let mut p = vec![0; dim];
            p[i] += 1;
            p[j] += 1;
            let coef = if i == j { 0.5 * a[i][i] } else { a[i][j] };
            terms.push(Monomial { coef, powers: p });
        }
    }
    (Polynomial::new(terms), a, lin)
}

/// Interpolated subgradients of random max-of-quadratics against the
/// analytic combination of active gradients, checked against
/// `K (1 + sqrt(m) inv_norm / 2) Delta + slack`.
pub fn interpolation_bound_suite(exec: Execution, cases: usize, seed: u64, slack: f64) -> SuiteReport {
    let radii = [1e-1, 1e-2, 1e-3];
    let excess = par::map_range(exec, cases * radii.len(), |i| {
        let mut rng = stream_rng(seed, (i / radii.len()) as u64);
        let delta = radii[i % radii.len()];
        let dim = rng.random_range(2..=6);
        let n_pieces = rng.random_range(1..=3);
        let mut pieces = Vec::new();
        let mut exact = Vec::new();
        let mut k_max: f64 = 0.0;
        for _ in 0..n_pieces {
            let k = rng.random_range(0.5..=20.0);
            let (poly, a, b) = random_quadratic(&mut rng, dim, k);
            let mut piece = SmoothPiece::new(poly);
            piece.hessian_bound = Some(k);
            pieces.push(piece);
            exact.push((a, b));
            k_max = k_max.max(k);
        }
        let rep = MaxRepresentation::new(pieces).expect("pieces");
        let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let strategy = match rng.random_range(0..3) {
            0 => SamplingStrategy::coordinate(),
            1 => SamplingStrategy::rotated_coordinate(rng.random()),
            _ => SamplingStrategy::random_ball(rng.random()),
        };
        let rule = if rng.random::<bool>() { WeightRule::FirstActive } else { WeightRule::UniformActive };
        let sample = build_poised_sample(&center, delta, 10.0, &strategy).expect("poised sample");
        let mut calls = 0;
        let v = approx_subgradient(&rep, Branch::Objective, &sample, &mut PieceCache::new(), &mut calls, rule)
            .expect("fit");
        let mut truth = vec![0.0; dim];
        for (&p, &w) in v.active_indices.iter().zip(&v.weights) {
            let (a, b) = &exact[p];
            for (r, t) in truth.iter_mut().enumerate() {
                *t += w * (linalg::dot(&a[r], &center) + b[r]);
            }
        }
        let err = linalg::dist(&v.vector, &truth);
        err - (k_max * error_factor(dim, sample.inv_norm) * delta + slack)
    });
    SuiteReport::collect("interpolation_bound", excess)
}
