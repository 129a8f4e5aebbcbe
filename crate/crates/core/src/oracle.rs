//! Independent reference machinery for checking the bounds: the matrix of
//! the linearized factor-perturbation map, ground-truth `ΔL` by double
//! factorization, and residuals accumulated with error-free transformations.

use crate::densela::{lower_tri_inverse, matmul, spectral_norm, Matrix};
use crate::error::{Error, Result};
use crate::genchol::{assemble_k, factorize, factorize_k, GenCholFactor, SaddleMatrix};

/// Lower triangle of a `p×p` matrix stacked column by column:
/// `(s₁₁, s₂₁, …, s_p1, s₂₂, …, s_pp)`. No weighting of off-diagonal entries.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfVec {
    order: usize,
    values: Vec<f64>,
}

impl HalfVec {
    pub fn new(order: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != half_len(order) {
            return Err(Error::DimensionMismatch {
                op: "HalfVec::new",
                left: (half_len(order), 1),
                right: (values.len(), 1),
            });
        }
        Ok(Self { order, values })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm2(&self) -> f64 {
        crate::densela::vec_norm2(&self.values)
    }
}

/// `p(p+1)/2`
pub fn half_len(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Position of lower-triangular entry `(i, j)`, `i ≥ j`, in a [`HalfVec`].
pub fn half_index(p: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < p);
    j * p - j * j.saturating_sub(1) / 2 + (i - j)
}

fn lower_stack(x: &Matrix) -> Vec<f64> {
    let p = x.rows();
    let mut v = Vec::with_capacity(half_len(p));
    for j in 0..p {
        for i in j..p {
            v.push(x[(i, j)]);
        }
    }
    v
}

/// Half-vectorization of a symmetric matrix. Symmetry is checked exactly.
pub fn duvec(s: &Matrix) -> Result<HalfVec> {
    s.check_symmetric()?;
    Ok(HalfVec {
        order: s.rows(),
        values: lower_stack(s),
    })
}

/// Vectorization of a lower-triangular matrix in the [`HalfVec`] ordering.
pub fn uvec_lower(x: &Matrix) -> Result<HalfVec> {
    if !x.is_square() {
        return Err(Error::NotSquare {
            op: "uvec_lower",
            rows: x.rows(),
            cols: x.cols(),
        });
    }
    x.check_lower_triangular()?;
    Ok(HalfVec {
        order: x.rows(),
        values: lower_stack(x),
    })
}

/// Inverse of [`uvec_lower`].
pub fn unuvec(h: &HalfVec) -> Matrix {
    let p = h.order;
    let mut x = Matrix::zeros(p, p);
    let mut it = h.values.iter();
    for j in 0..p {
        for i in j..p {
            x[(i, j)] = *it.next().expect("length checked on construction");
        }
    }
    x
}

/// Matrix of `X ↦ duvec(X J Lᵀ + L J Xᵀ)` over lower-triangular `X`.
#[derive(Clone, Debug, PartialEq)]
pub struct WOperator {
    order: usize,
    entries: Matrix,
}

impl WOperator {
    /// Order `p` of the factor (the operator itself is `p(p+1)/2` square).
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    /// `W · h`
    pub fn apply(&self, h: &HalfVec) -> Result<HalfVec> {
        if h.order != self.order {
            return Err(Error::DimensionMismatch {
                op: "WOperator::apply",
                left: self.entries.shape(),
                right: (h.values.len(), 1),
            });
        }
        let col = Matrix::from_raw(h.values.len(), 1, h.values.clone());
        let out = matmul(&self.entries, &col)?;
        HalfVec::new(self.order, out.as_slice().to_vec())
    }

    /// `W⁻¹ · h` by forward substitution.
    pub fn solve(&self, h: &HalfVec) -> Result<HalfVec> {
        let n = self.entries.rows();
        if h.values.len() != n {
            return Err(Error::DimensionMismatch {
                op: "WOperator::solve",
                left: self.entries.shape(),
                right: (h.values.len(), 1),
            });
        }
        let w = &self.entries;
        let mut x = vec![0.0; n];
        for i in 0..n {
            let d = w[(i, i)];
            if d == 0.0 {
                return Err(Error::ZeroDiagonal { index: i });
            }
            let mut s = h.values[i];
            for k in 0..i {
                s -= w[(i, k)] * x[k];
            }
            x[i] = s / d;
        }
        HalfVec::new(self.order, x)
    }
}

/// `X J Lᵀ + L J Xᵀ`
pub fn linearized_map(l: &Matrix, signature: &[f64], x: &Matrix) -> Result<Matrix> {
    let j = Matrix::from_diag(signature);
    let xjl = matmul(&matmul(x, &j)?, &l.transpose())?;
    let ljx = matmul(&matmul(l, &j)?, &x.transpose())?;
    xjl.add(&ljx)
}

/// Builds `W` column by column by applying [`linearized_map`] to each
/// lower-triangular basis matrix `E_ij`.
pub fn build_w(l: &GenCholFactor) -> Result<WOperator> {
    build_w_dense(&l.to_dense(), &l.spec().signature())
}

/// [`build_w`] for a dense lower-triangular factor and explicit signature.
pub fn build_w_dense(l: &Matrix, signature: &[f64]) -> Result<WOperator> {
    let p = l.rows();
    l.check_lower_triangular()?;
    let n = half_len(p);
    let mut w = Matrix::zeros(n, n);
    let mut col = 0;
    for j in 0..p {
        for i in j..p {
            let mut e = Matrix::zeros(p, p);
            e[(i, j)] = 1.0;
            let image = linearized_map(l, signature, &e)?;
            let h = lower_stack(&image);
            for (row, v) in h.into_iter().enumerate() {
                w[(row, col)] = v;
            }
            col += 1;
        }
    }
    Ok(WOperator { order: p, entries: w })
}

/// `‖W⁻¹‖₂` from the explicit triangular inverse.
pub fn w_inverse_norm(w: &WOperator) -> Result<f64> {
    spectral_norm(&lower_tri_inverse(&w.entries)?)
}

/// First-order prediction `unuvec(W⁻¹ duvec(ΔK))` of the factor change.
pub fn linearized_delta(w: &WOperator, dk: &Matrix) -> Result<Matrix> {
    Ok(unuvec(&w.solve(&duvec(dk)?)?))
}

/// Ground-truth `ΔL = factorize(K + ΔK) − factorize(K)`.
pub fn actual_delta_l(s: &SaddleMatrix, dk: &Matrix) -> Result<Matrix> {
    let base = factorize(s)?;
    actual_delta_l_from(&base, &assemble_k(s), dk)
}

/// [`actual_delta_l`] with the unperturbed factor already computed.
/// Breakdown of the perturbed factorization is wrapped in
/// [`Error::PerturbedFactorization`].
pub fn actual_delta_l_from(base: &GenCholFactor, k: &Matrix, dk: &Matrix) -> Result<Matrix> {
    dk.check_symmetric()?;
    let kp = k.add(dk)?;
    let perturbed = factorize_k(&kp, base.spec())
        .map_err(|e| Error::PerturbedFactorization(Box::new(e)))?;
    perturbed.delta_factor(base)
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Sum of `Σ xᵢyᵢ + c` with compensated (doubled-precision) accumulation.
pub fn compensated_dot(x: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut s, mut err) = (c, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (p, ep) = two_prod(a, b);
        let (t, es) = two_sum(s, p);
        s = t;
        err += es + ep;
    }
    s + err
}

/// `L J Lᵀ − K` with every entry accumulated through error-free
/// transformations, so the residual is accurate well below the unit roundoff
/// of the terms involved.
pub fn compensated_residual(l: &GenCholFactor, s: &SaddleMatrix) -> Matrix {
    let k = assemble_k(s);
    let d = l.to_dense();
    let sig = l.spec().signature();
    let p = l.spec().order();
    let mut r = Matrix::zeros(p, p);
    for i in 0..p {
        let xi: Vec<f64> = (0..p).map(|t| d[(i, t)] * sig[t]).collect();
        for j in 0..=i {
            let v = compensated_dot(&xi[..=j], &d.row(j)[..=j], -k[(i, j)]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

/// Plain floating-point `L J Lᵀ − K`.
pub fn plain_residual(l: &GenCholFactor, s: &SaddleMatrix) -> Matrix {
    l.reconstruct().sub(&assemble_k(s)).expect("same order")
}
