//! Built-in test problems.

use serde::{Deserialize, Serialize};

use crate::bregman::GeometryKind;
use crate::error::{Error, Result};
use crate::model::{BoxSet, MaxRepresentation, ProblemConstants, ProblemSpec, SmoothPiece};
use crate::poly::Polynomial;

pub const PROBLEM_NAMES: [&str; 4] = ["tp1", "tp2", "tp3", "sim12"];

/// Optimal value of tp2, on the curve `x1 x2 = x1 + x2` near `(4.971, 1.252)`.
pub const TP2_OPTIMUM: f64 = 7.557_507_768_931_784;

/// Published reference result for one geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub f: f64,
    pub f_evals: u64,
    pub g_evals: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValues {
    pub euclidean: TableCell,
    pub entropy: TableCell,
}

impl ReferenceValues {
    pub fn cell(&self, geometry: GeometryKind) -> TableCell {
        match geometry {
            GeometryKind::Euclidean => self.euclidean,
            GeometryKind::Entropy => self.entropy,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NamedProblem {
    pub name: String,
    pub spec: ProblemSpec,
    pub reference: Option<ReferenceValues>,
}

fn rep(pieces: Vec<(Polynomial, f64)>) -> MaxRepresentation {
    MaxRepresentation::new(
        pieces
            .into_iter()
            .map(|(p, k)| {
                let mut piece = SmoothPiece::new(p);
                piece.hessian_bound = Some(k);
                piece
            })
            .collect(),
    )
    .expect("non-empty piece list")
}

fn cell(f: f64, f_evals: u64, g_evals: u64) -> TableCell {
    TableCell { f, f_evals, g_evals }
}

/// The four box pieces `-x1, x1 - 10, -x2, x2 - 10`.
fn box_pieces() -> Vec<(Polynomial, f64)> {
    vec![
        (Polynomial::affine(0.0, &[-1.0, 0.0]), 0.0),
        (Polynomial::affine(-10.0, &[1.0, 0.0]), 0.0),
        (Polynomial::affine(0.0, &[0.0, -1.0]), 0.0),
        (Polynomial::affine(-10.0, &[0.0, 1.0]), 0.0),
    ]
}

pub fn load_problem(name: &str) -> Result<NamedProblem> {
    match name {
        "tp1" => tp1(),
        "tp2" => tp2(),
        "tp3" => tp3(),
        "sim12" => sim12_stand_in(),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

/// `min -x1 - 2 x2` s.t. `max{-x1, x1 - 1, x2} <= 0` over `[-1, 2] x [-2, 1]`.
pub fn tp1() -> Result<NamedProblem> {
    let f = rep(vec![(Polynomial::affine(0.0, &[-1.0, -2.0]), 0.0)]);
    let g = rep(vec![
        (Polynomial::affine(0.0, &[-1.0, 0.0]), 0.0),
        (Polynomial::affine(-1.0, &[1.0, 0.0]), 0.0),
        (Polynomial::affine(0.0, &[0.0, 1.0]), 0.0),
    ]);
    let bounds = BoxSet::new(vec![-1.0, -2.0], vec![2.0, 1.0])?;
    let spec = ProblemSpec::new(f, g, bounds, vec![0.5, -0.5])?
        .with_known_optimum(-1.0)?
        .with_constants(ProblemConstants {
            l_f: 5f64.sqrt(),
            l_g: 1.0,
            k_f: 0.0,
            k_g: 0.0,
        })?;
    Ok(NamedProblem {
        name: "tp1".into(),
        spec,
        reference: Some(ReferenceValues {
            euclidean: cell(-0.9542, 78, 162),
            entropy: cell(-0.9645, 99, 141),
        }),
    })
}

/// `min 6 x1^2 + x2^2 - 60 x1 - 8 x2 + 166` s.t.
/// `max{box, x1 x2 - x1 - x2, 3 - x1 - x2} <= 0` over `[0, 10]^2`.
pub fn tp2() -> Result<NamedProblem> {
    let f = rep(vec![(
        Polynomial::from_terms(&[
            (6.0, [2, 0]),
            (1.0, [0, 2]),
            (-60.0, [1, 0]),
            (-8.0, [0, 1]),
            (166.0, [0, 0]),
        ]),
        12.0,
    )]);
    let mut g = box_pieces();
    g.push((
        Polynomial::from_terms(&[(1.0, [1, 1]), (-1.0, [1, 0]), (-1.0, [0, 1])]),
        1.0,
    ));
    g.push((Polynomial::affine(3.0, &[-1.0, -1.0]), 0.0));
    let spec = ProblemSpec::new(f, rep(g), BoxSet::cube(2, 0.0, 10.0)?, vec![5.0, 5.0])?
        .with_known_optimum(TP2_OPTIMUM)?
        .with_constants(ProblemConstants {
            l_f: (60f64 * 60.0 + 12.0 * 12.0).sqrt(),
            l_g: 9.0 * 2f64.sqrt(),
            k_f: 12.0,
            k_g: 1.0,
        })?;
    Ok(NamedProblem {
        name: "tp2".into(),
        spec,
        reference: Some(ReferenceValues {
            euclidean: cell(7.5587, 78, 122),
            entropy: cell(7.5580, 81, 111),
        }),
    })
}

/// `min 7 x1^2 + 3 x2^2 - 84 x1 - 34 x2 + 300` s.t.
/// `max{box, 1 - x1 x2, x1^2 + x2^2 - 9} <= 0` over `[0, 10]^2`.
pub fn tp3() -> Result<NamedProblem> {
    let f = rep(vec![(
        Polynomial::from_terms(&[
            (7.0, [2, 0]),
            (3.0, [0, 2]),
            (-84.0, [1, 0]),
            (-34.0, [0, 1]),
            (300.0, [0, 0]),
        ]),
        14.0,
    )]);
    let mut g = box_pieces();
    g.push((Polynomial::from_terms(&[(1.0, [0, 0]), (-1.0, [1, 1])]), 1.0));
    g.push((
        Polynomial::from_terms(&[(1.0, [2, 0]), (1.0, [0, 2]), (-9.0, [0, 0])]),
        2.0,
    ));
    let spec = ProblemSpec::new(f, rep(g), BoxSet::cube(2, 0.0, 10.0)?, vec![5.0, 5.0])?
        .with_known_optimum(tp3_optimum().f)?
        .with_constants(ProblemConstants {
            l_f: (84f64 * 84.0 + 34.0 * 34.0).sqrt(),
            l_g: 20.0 * 2f64.sqrt(),
            k_f: 14.0,
            k_g: 2.0,
        })?;
    Ok(NamedProblem {
        name: "tp3".into(),
        spec,
        reference: Some(ReferenceValues {
            euclidean: cell(84.7096, 78, 122),
            entropy: cell(84.7108, 75, 125),
        }),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tp3Optimum {
    /// Positive real root of the quartic.
    pub root: f64,
    pub x: [f64; 2],
    pub f: f64,
    pub lambda: f64,
    /// `||grad f(x) - lambda grad (x1^2 + x2^2 - 9)||`.
    pub kkt_residual: f64,
}

/// `p(a) = 16 a^4 - 336 a^3 + 1909 a^2 + 3024 a - 15876`.
pub fn tp3_quartic(a: f64) -> f64 {
    (((16.0 * a - 336.0) * a + 1909.0) * a + 3024.0) * a - 15876.0
}

fn tp3_quartic_derivative(a: f64) -> f64 {
    ((64.0 * a - 1008.0) * a + 3818.0) * a + 3024.0
}

/// Minimizer of tp3 on the circle `x1^2 + x2^2 = 9`, from the positive root
/// of [`tp3_quartic`].
pub fn tp3_optimum() -> Tp3Optimum {
    // p(0) < 0 < p(3); bisect, then polish with Newton.
    let (mut lo, mut hi) = (0.0f64, 3.0f64);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if tp3_quartic(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut a = 0.5 * (lo + hi);
    for _ in 0..50 {
        let step = tp3_quartic(a) / tp3_quartic_derivative(a);
        a -= step;
        if step.abs() <= 1e-15 * a.abs() {
            break;
        }
    }
    let x2 = 8.0 / 357.0 * a.powi(3) - 4.0 / 17.0 * a * a + 145.0 / 714.0 * a + 36.0 / 17.0;
    let lambda = -1.0 - 1909.0 / 378.0 * a + 8.0 / 9.0 * a * a - 8.0 / 189.0 * a.powi(3);
    let f = 7.0 * a * a + 3.0 * x2 * x2 - 84.0 * a - 34.0 * x2 + 300.0;
    let grad_f = [14.0 * a - 84.0, 6.0 * x2 - 34.0];
    let grad_g = [2.0 * a, 2.0 * x2];
    let kkt_residual = (grad_f[0] - lambda * grad_g[0]).hypot(grad_f[1] - lambda * grad_g[1]);
    Tp3Optimum {
        root: a,
        x: [a, x2],
        f,
        lambda,
        kkt_residual,
    }
}

pub const SIM12_DIM: usize = 12;

fn sim12_weights() -> ([f64; SIM12_DIM], [f64; SIM12_DIM]) {
    let mut d = [0.0; SIM12_DIM];
    let mut c = [0.0; SIM12_DIM];
    for i in 0..SIM12_DIM {
        d[i] = 1.0 + i as f64 / 11.0;
        c[i] = 3.5 - 0.25 * i as f64;
    }
    (d, c)
}

/// The two starting points of the 12-dimensional stand-in: an interior
/// feasible point and a point on the boundary of the box.
pub fn sim12_starts() -> [Vec<f64>; 2] {
    let mut interior = vec![0.5; SIM12_DIM];
    interior[0] = 2.0;
    let mut corner = vec![0.0; SIM12_DIM];
    corner[0] = 1.0;
    [interior, corner]
}

/// A 12-dimensional smooth yield maximization posed as minimization:
/// `f(x) = sum_i d_i (x_i - c_i)^2` over `[0, 4]^12` subject to three
/// resource constraints combined into one max-affine `g`.
pub fn sim12_stand_in() -> Result<NamedProblem> {
    let (d, c) = sim12_weights();
    let mut terms = Vec::new();
    let mut constant = 0.0;
    for i in 0..SIM12_DIM {
        let mut sq = vec![0u32; SIM12_DIM];
        sq[i] = 2;
        let mut lin = vec![0u32; SIM12_DIM];
        lin[i] = 1;
        terms.push(crate::poly::Monomial { coef: d[i], powers: sq });
        terms.push(crate::poly::Monomial { coef: -2.0 * d[i] * c[i], powers: lin });
        constant += d[i] * c[i] * c[i];
    }
    terms.push(crate::poly::Monomial {
        coef: constant,
        powers: vec![0; SIM12_DIM],
    });
    let f = rep(vec![(Polynomial::new(terms), 2.0 * d[SIM12_DIM - 1])]);

    let mean = [1.0 / 12.0; SIM12_DIM];
    let mut pair = [0.0; SIM12_DIM];
    pair[0] = 1.0;
    pair[1] = 1.0;
    let mut alternating = [0.0; SIM12_DIM];
    for (i, a) in alternating.iter_mut().enumerate() {
        *a = if i % 2 == 0 { 1.0 / 6.0 } else { -1.0 / 6.0 };
    }
    let g = rep(vec![
        (Polynomial::affine(-2.0, &mean), 0.0),
        (Polynomial::affine(-5.5, &pair), 0.0),
        (Polynomial::affine(-0.5, &alternating), 0.0),
    ]);
    let l_f = (0..SIM12_DIM)
        .map(|i| {
            let r = 2.0 * d[i] * c[i].max(4.0 - c[i]);
            r * r
        })
        .sum::<f64>()
        .sqrt();
    let spec = ProblemSpec::new(f, g, BoxSet::cube(SIM12_DIM, 0.0, 4.0)?, sim12_starts()[0].clone())?
        .with_constants(ProblemConstants {
            l_f,
            l_g: 2f64.sqrt(),
            k_f: 2.0 * d[SIM12_DIM - 1],
            k_g: 0.0,
        })?;
    Ok(NamedProblem {
        name: "sim12".into(),
        spec,
        reference: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem_file::{OracleRegistry, ProblemFile};
    use crate::solver::{run, SolverConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Expr = fn(f64, f64) -> f64;

    fn tp1_f(a: f64, b: f64) -> f64 {
        -a - 2.0 * b
    }
    fn tp1_g(a: f64, b: f64) -> f64 {
        (-a).max(a - 1.0).max(b)
    }
    fn tp2_f(a: f64, b: f64) -> f64 {
        6.0 * a * a + b * b - 60.0 * a - 8.0 * b + 166.0
    }
    fn tp2_g(a: f64, b: f64) -> f64 {
        [-a, a - 10.0, -b, b - 10.0, a * b - a - b, 3.0 - a - b]
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }
    fn tp3_f(a: f64, b: f64) -> f64 {
        7.0 * a * a + 3.0 * b * b - 84.0 * a - 34.0 * b + 300.0
    }
    fn tp3_g(a: f64, b: f64) -> f64 {
        [-a, a - 10.0, -b, b - 10.0, 1.0 - a * b, a * a + b * b - 9.0]
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    const FILES: [(&str, &str); 4] = [
        ("tp1", include_str!("../problems/tp1.json")),
        ("tp2", include_str!("../problems/tp2.json")),
        ("tp3", include_str!("../problems/tp3.json")),
        ("sim12", include_str!("../problems/sim12.json")),
    ];

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn documented_values() {
        let tp1 = load_problem("tp1").unwrap().spec;
        assert_eq!(tp1.objective.value(&[1.0, 0.0]).unwrap(), -1.0);
        assert_eq!(tp1.known_optimum, Some(-1.0));
        let tp2 = load_problem("tp2").unwrap().spec;
        assert_eq!(tp2.objective.value(&[0.0, 0.0]).unwrap(), 166.0);
        let tp3 = load_problem("tp3").unwrap().spec;
        let g = tp3.constraint.value(&[2.6390, 1.4267]).unwrap();
        assert!(g.abs() < 1e-3 && g <= 1e-3);
        assert!(matches!(load_problem("tp9"), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn built_ins_match_hand_written_expressions() {
        let cases: [(&str, Expr, Expr); 3] =
            [("tp1", tp1_f, tp1_g), ("tp2", tp2_f, tp2_g), ("tp3", tp3_f, tp3_g)];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (name, f, g) in cases {
            let spec = load_problem(name).unwrap().spec;
            for _ in 0..100 {
                let u: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
                let x = spec.bounds.from_unit(&u);
                assert!(close(spec.objective.value(&x).unwrap(), f(x[0], x[1])));
                assert!(close(spec.constraint.value(&x).unwrap(), g(x[0], x[1])));
            }
        }
    }

    #[test]
    fn shipped_files_match_built_ins() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (name, text) in FILES {
            let file = ProblemFile::from_json(text).unwrap();
            assert_eq!(file.name.as_deref(), Some(name));
            let from_file = file.to_spec(&OracleRegistry::new()).unwrap();
            let built = load_problem(name).unwrap().spec;
            assert_eq!(from_file.bounds, built.bounds);
            assert_eq!(from_file.start, built.start);
            match (from_file.known_optimum, built.known_optimum) {
                (Some(a), Some(b)) => assert!(close(a, b)),
                (a, b) => assert_eq!(a, b),
            }
            let (a, b) = (from_file.constants.unwrap(), built.constants.unwrap());
            for (u, v) in [(a.l_f, b.l_f), (a.l_g, b.l_g), (a.k_f, b.k_f), (a.k_g, b.k_g)] {
                assert!(close(u, v));
            }
            for _ in 0..100 {
                let u: Vec<f64> = (0..built.dimension).map(|_| rng.random::<f64>()).collect();
                let x = built.bounds.from_unit(&u);
                assert!(close(from_file.objective.value(&x).unwrap(), built.objective.value(&x).unwrap()));
                assert!(close(from_file.constraint.value(&x).unwrap(), built.constraint.value(&x).unwrap()));
            }
        }
    }

    #[test]
    fn tp3_optimum_values() {
        let o = tp3_optimum();
        assert!((o.f - 84.6710).abs() < 5e-4);
        assert!((o.x[0] - 2.6390).abs() < 1e-3 && (o.x[1] - 1.4267).abs() < 1e-3);
        assert!((o.lambda + 8.9150).abs() < 1e-3);
        assert!(o.kkt_residual <= 1e-6);
        assert!(tp3_quartic(o.root).abs() <= 1e-8);
        assert!((o.x[0] * o.x[0] + o.x[1] * o.x[1] - 9.0).abs() < 1e-9);
    }

    #[test]
    fn tp3_optimum_matches_circle_grid_search() {
        // Feasible arc of the circle: 1 - x1 x2 <= 0 with both coordinates positive.
        let n = 2_000_000;
        let (mut best_f, mut best_x) = (f64::INFINITY, (0.0, 0.0));
        for i in 0..=n {
            let th = std::f64::consts::FRAC_PI_2 * i as f64 / n as f64;
            let (a, b) = (3.0 * th.cos(), 3.0 * th.sin());
            if 1.0 - a * b > 0.0 {
                continue;
            }
            let f = tp3_f(a, b);
            if f < best_f {
                best_f = f;
                best_x = (a, b);
            }
        }
        let o = tp3_optimum();
        assert!((best_x.0 - o.x[0]).abs() < 1e-3 && (best_x.1 - o.x[1]).abs() < 1e-3);
        assert!((best_f - o.f).abs() < 1e-6);
    }

    #[test]
    fn tp2_optimum_on_constraint_curve() {
        // Scan x1 along x2 = x1 / (x1 - 1), the active branch.
        let mut best = f64::INFINITY;
        for i in 0..=1_000_000 {
            let a = 4.9 + 0.15 * i as f64 / 1e6;
            let b = a / (a - 1.0);
            best = best.min(tp2_f(a, b));
        }
        assert!((best - TP2_OPTIMUM).abs() < 1e-9);
    }

    /// Samples of the pieces never exceed the declared constants.
    #[test]
    fn constants_hold_empirically() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for name in PROBLEM_NAMES {
            let spec = load_problem(name).unwrap().spec;
            let c = spec.constants.unwrap();
            let m = spec.dimension;
            for (rep, l, k) in [(&spec.objective, c.l_f, c.k_f), (&spec.constraint, c.l_g, c.k_g)] {
                for _ in 0..200 {
                    let u: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
                    let x = spec.bounds.from_unit(&u);
                    let h = 1e-5;
                    for piece in rep.pieces() {
                        let grad: Vec<f64> = (0..m)
                            .map(|j| {
                                let (mut p, mut q) = (x.clone(), x.clone());
                                p[j] += h;
                                q[j] -= h;
                                (piece.value(&p) - piece.value(&q)) / (2.0 * h)
                            })
                            .collect();
                        assert!(crate::linalg::norm(&grad) <= l + 1e-6, "{name} L");
                        let mut dir: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
                        let n = crate::linalg::norm(&dir);
                        dir.iter_mut().for_each(|v| *v /= n);
                        let s = 1e-3;
                        let at = |t: f64| {
                            piece.value(&x.iter().zip(&dir).map(|(a, d)| a + t * d).collect::<Vec<_>>())
                        };
                        let second = (at(s) - 2.0 * at(0.0) + at(-s)) / (s * s);
                        assert!(second.abs() <= k + 1e-4, "{name} K {second}");
                    }
                }
            }
        }
    }

    #[test]
    fn sim12_shape() {
        let p = sim12_stand_in().unwrap();
        assert_eq!(p.spec.dimension, 12);
        for start in sim12_starts() {
            assert!(p.spec.bounds.contains(&start));
            assert!(p.spec.constraint.value(&start).unwrap() <= 0.0);
        }
    }

    #[test]
    fn sim12_runs_are_reproducible() {
        let p = sim12_stand_in().unwrap().spec;
        let cfg = SolverConfig {
            f_eval_budget: Some(3000),
            ..SolverConfig::default()
        };
        let a = run(&p, &cfg).unwrap();
        let b = run(&p, &cfg).unwrap();
        assert!(a.counters.f_evals <= 3000);
        assert_eq!(a.best.as_ref().unwrap().f.to_bits(), b.best.as_ref().unwrap().f.to_bits());
        assert_eq!(a.history, b.history);
    }
}
