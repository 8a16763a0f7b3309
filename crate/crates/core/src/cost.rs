//! The cost function `F(X) = Σ P_i` over the unit hypercube.
//!
//! `x_i` is the probability that bit `z_i` is 0, and `P_i` is the probability
//! that clause `i` is violated when each bit is drawn independently. `F` is
//! multilinear: affine in each coordinate, so every second derivative along a
//! single axis vanishes and vertex values are exact unsatisfied-clause counts.
//! Points may lie anywhere in `R^N`; clamping is the solver's job.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{Assignment, Instance};

/// Probability that a clause over `(x_k, x_m, x_n)` is violated:
/// `1 + 3·x_k·x_m·x_n − x_k·x_m − x_m·x_n − x_k·x_n`.
#[inline]
pub fn clause_probability(xk: f64, xm: f64, xn: f64) -> f64 {
    1.0 + 3.0 * xk * xm * xn - xk * xm - xm * xn - xk * xn
}

/// `∂P/∂x_j` for a clause whose other two variables are at `xa`, `xb`.
#[inline]
fn clause_partial(xa: f64, xb: f64) -> f64 {
    3.0 * xa * xb - xa - xb
}

/// `F` for one instance, with per-variable incidence lists for the gradient.
#[derive(Debug, Clone)]
pub struct CostFunction {
    instance: Instance,
    n_vars: usize,
    clauses: Vec<[usize; 3]>,
    // CSR layout: the partner pairs of variable j are
    // partners[offsets[j]..offsets[j + 1]].
    offsets: Vec<usize>,
    partners: Vec<(usize, usize)>,
}

impl CostFunction {
    pub fn new(instance: &Instance) -> Self {
        let n = instance.n_vars();
        let clauses: Vec<[usize; 3]> = instance.clauses().iter().map(|c| c.zero_based()).collect();

        let mut offsets = vec![0usize; n + 1];
        for (j, &deg) in instance.clause_degree().iter().enumerate() {
            offsets[j + 1] = offsets[j] + deg;
        }
        let mut fill = offsets.clone();
        let mut partners = vec![(0, 0); offsets[n]];
        for &[k, m, nn] in &clauses {
            for (j, a, b) in [(k, m, nn), (m, k, nn), (nn, k, m)] {
                partners[fill[j]] = (a, b);
                fill[j] += 1;
            }
        }
        CostFunction {
            instance: instance.clone(),
            n_vars: n,
            clauses,
            offsets,
            partners,
        }
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// `C_j`, recovered from the incidence lists.
    pub fn degree(&self, j: usize) -> usize {
        self.offsets[j + 1] - self.offsets[j]
    }

    /// `(a, b)` for every clause containing `j`: the clause's other two variables.
    pub fn incidence(&self, j: usize) -> &[(usize, usize)] {
        &self.partners[self.offsets[j]..self.offsets[j + 1]]
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.n_vars {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                expected: self.n_vars,
                got: len,
            })
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.clauses
            .iter()
            .map(|&[k, m, n]| clause_probability(x[k], x[m], x[n]))
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let mut g = vec![0.0; self.n_vars];
        self.gradient_into(x, &mut g);
        Ok(g)
    }

    /// Writes `∇F(x)` into `out`; both slices have length `n_vars`.
    pub(crate) fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        for (j, g) in out.iter_mut().enumerate() {
            *g = self
                .incidence(j)
                .iter()
                .map(|&(a, b)| clause_partial(x[a], x[b]))
                .sum();
        }
    }

    /// Second central difference of `F` along each axis:
    /// `(F(x + h·e_j) − 2F(x) + F(x − h·e_j)) / h²`.
    ///
    /// Only clauses containing `j` change along `e_j`, so the difference is
    /// accumulated over those terms; the rest cancel identically.
    pub fn harmonicity_defect(&self, x: &[f64], h: f64) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        if h.is_nan() || h <= 0.0 {
            return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
        }
        let h2 = h * h;
        Ok((0..self.n_vars)
            .map(|j| {
                let xj = x[j];
                self.incidence(j)
                    .iter()
                    .map(|&(a, b)| {
                        let p = |v: f64| clause_probability(v, x[a], x[b]);
                        (p(xj + h) - 2.0 * p(xj) + p(xj - h)) / h2
                    })
                    .sum()
            })
            .collect())
    }

    /// Dense Hessian. Off-diagonal `(j, a)` sums `3·x_b − 1` over clauses
    /// containing both `j` and `a` (with `b` the third variable); the
    /// diagonal is identically zero.
    pub fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_len(x.len())?;
        let mut h = vec![vec![0.0; self.n_vars]; self.n_vars];
        for &[k, m, n] in &self.clauses {
            for (p, q, r) in [(k, m, n), (m, n, k), (k, n, m)] {
                let v = 3.0 * x[r] - 1.0;
                h[p][q] += v;
                h[q][p] += v;
            }
        }
        Ok(h)
    }

    /// Evaluates `F` at the vertex encoding `z` (`x_i = 1` iff `z_i = 0`) and
    /// compares it with a direct clause count.
    pub fn vertex_spectrum_check(&self, z: &Assignment) -> Result<VertexSpectrum> {
        self.check_len(z.len())?;
        let cost_at_vertex = self.eval_unchecked(&z.to_vertex());
        let unsat_count = self.instance.check_assignment(z)?.unsatisfied_count;
        Ok(VertexSpectrum {
            cost_at_vertex,
            unsat_count,
            agree: cost_at_vertex == unsat_count as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VertexSpectrum {
    pub cost_at_vertex: f64,
    pub unsat_count: usize,
    pub agree: bool,
}
