//! Symbolic polynomial pieces.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::model::PieceOracle;

/// `coef * prod_j x_j^powers[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

impl Monomial {
    fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.powers
            .iter()
            .zip(x)
            .fold(self.coef, |acc, (&p, &v)| acc * v.powi(p as i32))
    }

    /// The monomial with `powers[j]` lowered by one and scaled, i.e. d/dx_j.
    fn derivative(&self, j: usize) -> Option<Monomial> {
        let p = self.powers[j];
        if p == 0 {
            return None;
        }
        let mut powers = self.powers.clone();
        powers[j] -= 1;
        Some(Monomial {
            coef: self.coef * p as f64,
            powers,
        })
    }
}

/// A polynomial in `dim` variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Polynomial { terms }
    }

    /// Builds a polynomial from `(coef, powers)` pairs.
    pub fn from_terms<const M: usize>(terms: &[(f64, [u32; M])]) -> Self {
        Polynomial {
            terms: terms
                .iter()
                .map(|(c, p)| Monomial {
                    coef: *c,
                    powers: p.to_vec(),
                })
                .collect(),
        }
    }

    /// `c0 + <coeffs, x>`.
    pub fn affine(c0: f64, coeffs: &[f64]) -> Self {
        let m = coeffs.len();
        let mut terms = vec![Monomial {
            coef: c0,
            powers: vec![0; m],
        }];
        for (j, &c) in coeffs.iter().enumerate() {
            let mut powers = vec![0; m];
            powers[j] = 1;
            terms.push(Monomial { coef: c, powers });
        }
        Polynomial { terms }
    }

    /// Number of variables, or `None` for an empty polynomial or ragged terms.
    pub fn dim(&self) -> Option<usize> {
        let m = self.terms.first()?.powers.len();
        self.terms.iter().all(|t| t.powers.len() == m).then_some(m)
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn partial(&self, j: usize) -> Polynomial {
        Polynomial {
            terms: self.terms.iter().filter_map(|t| t.derivative(j)).collect(),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len()).map(|j| self.partial(j).eval(x)).collect()
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let m = x.len();
        (0..m)
            .map(|i| {
                let di = self.partial(i);
                (0..m).map(|j| di.partial(j).eval(x)).collect()
            })
            .collect()
    }
}

impl PieceOracle for Polynomial {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(self.grad(x))
    }

    /// Decided for degree <= 2 (constant Hessian); unknown otherwise.
    fn is_convex(&self) -> Option<bool> {
        match self.degree() {
            0 | 1 => Some(true),
            2 => {
                let m = self.dim()?;
                let h = self.hessian(&vec![0.0; m]);
                let mat = DMatrix::from_fn(m, m, |i, j| h[i][j]);
                let eig = SymmetricEigen::new(mat);
                Some(eig.eigenvalues.iter().all(|&l| l >= -1e-12))
            }
            _ => None,
        }
    }
}
