//! Saddle-point block matrices `K = [A Bᵀ; B −C]` and their generalized
//! Cholesky factorization `K = L J Lᵀ`, with `J = diag(I_m, −I_n)` and
//! `L = [L11 0; L21 L22]`.

use crate::densela::{
    self, cholesky, content_lines, matmul, parse_counts, parse_row_block, singular_values,
    spectral_norm, sym_eigenvalues, Matrix,
};
use crate::error::{Error, FactorBlock, Result};

/// Relative tolerance on the smallest eigenvalue when accepting `C` as PSD.
pub const PSD_TOL: f64 = 1e-10;
/// Relative singular-value threshold for the full-row-rank check on `B`.
pub const RANK_TOL: f64 = 1e-12;

/// Block dimensions: `m` is the order of `A`, `n` the order of `C`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockSpec {
    pub m: usize,
    pub n: usize,
}

impl BlockSpec {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("block order m must be at least 1".into()));
        }
        Ok(Self { m, n })
    }

    /// Total order `p = m + n`.
    pub fn order(&self) -> usize {
        self.m + self.n
    }

    /// Diagonal of the signature matrix: `m` ones followed by `n` minus ones.
    pub fn signature(&self) -> Vec<f64> {
        let mut s = vec![1.0; self.m];
        s.resize(self.order(), -1.0);
        s
    }

    pub fn signature_matrix(&self) -> Matrix {
        Matrix::from_diag(&self.signature())
    }
}

/// The symmetric block matrix `[A Bᵀ; B −C]`.
///
/// Construction checks shapes and exact symmetry of `A` and `C`. The
/// spectral assumptions (A positive definite, C positive semi-definite,
/// B of full row rank) are checked separately by [`SaddleMatrix::validate`],
/// so that a matrix violating them can still be handed to [`factorize`] and
/// rejected there with a pivot index.
#[derive(Clone, Debug, PartialEq)]
pub struct SaddleMatrix {
    spec: BlockSpec,
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

impl SaddleMatrix {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let spec = BlockSpec::new(a.rows(), c.rows())?;
        let (m, n) = (spec.m, spec.n);
        if a.shape() != (m, m) {
            return Err(Error::NotSquare {
                op: "SaddleMatrix (A)",
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        if c.shape() != (n, n) {
            return Err(Error::NotSquare {
                op: "SaddleMatrix (C)",
                rows: c.rows(),
                cols: c.cols(),
            });
        }
        if b.shape() != (n, m) {
            return Err(Error::DimensionMismatch {
                op: "SaddleMatrix (B)",
                left: (n, m),
                right: b.shape(),
            });
        }
        for x in [&a, &b, &c] {
            if !x.is_finite() {
                return Err(Error::InvalidSaddle("non-finite entry".into()));
            }
        }
        a.check_symmetric()?;
        c.check_symmetric()?;
        Ok(Self { spec, a, b, c })
    }

    /// Splits a dense symmetric `K` into blocks. `K` must be exactly symmetric.
    pub fn from_k(k: &Matrix, spec: BlockSpec) -> Result<Self> {
        let p = spec.order();
        if k.shape() != (p, p) {
            return Err(Error::DimensionMismatch {
                op: "SaddleMatrix::from_k",
                left: (p, p),
                right: k.shape(),
            });
        }
        k.check_symmetric()?;
        let (m, n) = (spec.m, spec.n);
        let a = k.block(0, 0, m, m);
        let b = k.block(m, 0, n, m);
        let c = k.block(m, m, n, n).scale(-1.0);
        Self::new(a, b, c)
    }

    pub fn spec(&self) -> BlockSpec {
        self.spec
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    /// Checks A positive definite, C positive semi-definite within
    /// [`PSD_TOL`], and B of full row rank within [`RANK_TOL`].
    pub fn validate(&self) -> Result<()> {
        cholesky(&self.a).map_err(|e| Error::InvalidSaddle(format!("A: {e}")))?;
        if self.spec.n > 0 {
            let ev = sym_eigenvalues(&self.c)?;
            let norm = ev.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if ev[0] < -PSD_TOL * norm {
                return Err(Error::InvalidSaddle(format!(
                    "C is not positive semi-definite (min eigenvalue {})",
                    ev[0]
                )));
            }
            if self.spec.n > self.spec.m {
                return Err(Error::InvalidSaddle(format!(
                    "B is {}x{} and cannot have full row rank",
                    self.spec.n, self.spec.m
                )));
            }
            let sv = singular_values(&self.b)?;
            let (max, min) = (sv[0], sv[sv.len() - 1]);
            if !(min > RANK_TOL * max) {
                return Err(Error::InvalidSaddle(format!(
                    "B is rank deficient (sigma_min {min}, sigma_max {max})"
                )));
            }
        }
        Ok(())
    }

    /// Reads the saddle-matrix text format: a `m n` header followed by the
    /// rows of the dense symmetric `K`.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (line_no, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let (m, n) = parse_counts(header, line_no)?;
        let spec = BlockSpec::new(m, n).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let k = parse_row_block(&mut lines, m + n, m + n)?;
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse {
                line: ln,
                msg: "trailing content after last row".into(),
            });
        }
        Self::from_k(&k, spec)
    }

    pub fn to_text(&self) -> String {
        format!("{} {}\n{}", self.spec.m, self.spec.n, assemble_k(self).rows_to_text())
    }
}

/// Dense `K = [A Bᵀ; B −C]`.
pub fn assemble_k(s: &SaddleMatrix) -> Matrix {
    let (m, n) = (s.spec.m, s.spec.n);
    let mut k = Matrix::zeros(m + n, m + n);
    k.set_block(0, 0, &s.a);
    k.set_block(m, 0, &s.b);
    k.set_block(0, m, &s.b.transpose());
    k.set_block(m, m, &s.c.scale(-1.0));
    k
}

/// Factor blocks `L11` (m×m lower), `L21` (n×m), `L22` (n×n lower).
#[derive(Clone, Debug, PartialEq)]
pub struct GenCholFactor {
    spec: BlockSpec,
    l11: Matrix,
    l21: Matrix,
    l22: Matrix,
}

impl GenCholFactor {
    pub fn new(l11: Matrix, l21: Matrix, l22: Matrix) -> Result<Self> {
        let spec = BlockSpec::new(l11.rows(), l22.rows())?;
        let (m, n) = (spec.m, spec.n);
        if l11.shape() != (m, m) || l22.shape() != (n, n) || l21.shape() != (n, m) {
            return Err(Error::DimensionMismatch {
                op: "GenCholFactor::new",
                left: (m + n, m + n),
                right: (l21.rows() + l11.rows(), l11.cols() + l22.cols()),
            });
        }
        l11.check_lower_triangular()?;
        l22.check_lower_triangular()?;
        Ok(Self { spec, l11, l21, l22 })
    }

    /// Splits a dense lower-triangular `p×p` matrix into factor blocks.
    pub fn from_dense(l: &Matrix, spec: BlockSpec) -> Result<Self> {
        let p = spec.order();
        if l.shape() != (p, p) {
            return Err(Error::DimensionMismatch {
                op: "GenCholFactor::from_dense",
                left: (p, p),
                right: l.shape(),
            });
        }
        l.check_lower_triangular()?;
        let (m, n) = (spec.m, spec.n);
        Self::new(l.block(0, 0, m, m), l.block(m, 0, n, m), l.block(m, m, n, n))
    }

    pub fn spec(&self) -> BlockSpec {
        self.spec
    }

    pub fn l11(&self) -> &Matrix {
        &self.l11
    }

    pub fn l21(&self) -> &Matrix {
        &self.l21
    }

    pub fn l22(&self) -> &Matrix {
        &self.l22
    }

    /// Dense lower-triangular embedding `[L11 0; L21 L22]`.
    pub fn to_dense(&self) -> Matrix {
        let m = self.spec.m;
        let mut l = Matrix::zeros(self.spec.order(), self.spec.order());
        l.set_block(0, 0, &self.l11);
        l.set_block(m, 0, &self.l21);
        l.set_block(m, m, &self.l22);
        l
    }

    /// `L J Lᵀ`. Entry `(i, j)` is the left-to-right sum over `k` of
    /// `L_ik J_k L_jk`, the same as a dense triple product; it is exactly
    /// symmetric.
    pub fn reconstruct(&self) -> Matrix {
        let l = self.to_dense();
        let sig = self.spec.signature();
        let p = self.spec.order();
        let mut k = Matrix::zeros(p, p);
        for i in 0..p {
            for j in 0..=i {
                let mut s = 0.0;
                for t in 0..=j {
                    s += l[(i, t)] * sig[t] * l[(j, t)];
                }
                k[(i, j)] = s;
                k[(j, i)] = s;
            }
        }
        k
    }

    /// Dense `self − base`.
    pub fn delta_factor(&self, base: &GenCholFactor) -> Result<Matrix> {
        if self.spec != base.spec {
            return Err(Error::SpecMismatch {
                left: (self.spec.m, self.spec.n),
                right: (base.spec.m, base.spec.n),
            });
        }
        self.to_dense().sub(&base.to_dense())
    }
}

/// Dense factor embedding, free-function form.
pub fn factor_to_dense(l: &GenCholFactor) -> Matrix {
    l.to_dense()
}

/// `L J Lᵀ`, free-function form.
pub fn reconstruct(l: &GenCholFactor) -> Matrix {
    l.reconstruct()
}

/// `L̃ − L` as a dense lower-triangular matrix.
pub fn delta_factor(l_tilde: &GenCholFactor, l: &GenCholFactor) -> Result<Matrix> {
    l_tilde.delta_factor(l)
}

/// Block Schur-complement factorization: `L11 = chol(A)`, `L21` from
/// `L21 L11ᵀ = B`, `L22 = chol(C + L21 L21ᵀ)`. Both Cholesky stages require
/// strictly positive pivots, so the factor has a positive diagonal.
pub fn factorize(s: &SaddleMatrix) -> Result<GenCholFactor> {
    let (m, n) = (s.spec.m, s.spec.n);
    let l11 = cholesky(&s.a).map_err(|e| breakdown(e, FactorBlock::Leading))?;

    let mut l21 = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut acc = s.b[(i, j)];
            for k in 0..j {
                acc -= l21[(i, k)] * l11[(j, k)];
            }
            l21[(i, j)] = acc / l11[(j, j)];
        }
    }

    let mut schur = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = s.c[(i, j)];
            for k in 0..m {
                acc += l21[(i, k)] * l21[(j, k)];
            }
            schur[(i, j)] = acc;
            schur[(j, i)] = acc;
        }
    }
    let l22 = cholesky(&schur).map_err(|e| breakdown(e, FactorBlock::Schur))?;
    GenCholFactor::new(l11, l21, l22)
}

fn breakdown(e: Error, block: FactorBlock) -> Error {
    match e {
        Error::NotPositiveDefinite { pivot } => Error::Breakdown { block, pivot },
        other => other,
    }
}

/// Factorizes a dense symmetric `K` with the given block structure.
pub fn factorize_k(k: &Matrix, spec: BlockSpec) -> Result<GenCholFactor> {
    factorize(&SaddleMatrix::from_k(k, spec)?)
}

/// `‖LJLᵀ − K‖_F / ‖K‖_F` with a plain residual.
pub fn relative_residual(l: &GenCholFactor, s: &SaddleMatrix) -> f64 {
    let k = assemble_k(s);
    let r = l.reconstruct().sub(&k).expect("same order");
    let kn = densela::fro_norm(&k);
    if kn == 0.0 {
        densela::fro_norm(&r)
    } else {
        densela::fro_norm(&r) / kn
    }
}

/// `‖K‖₂` of the reconstructed matrix.
pub fn k_norm2(l: &GenCholFactor) -> Result<f64> {
    spectral_norm(&l.reconstruct())
}

/// `L21 L21ᵀ`, used by the Schur-identity check.
pub fn l21_gram(l: &GenCholFactor) -> Matrix {
    matmul(&l.l21, &l.l21.transpose()).expect("conformable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::{fro_norm, UNIT_ROUNDOFF};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn small() -> SaddleMatrix {
        SaddleMatrix::new(m(&[&[4.0]]), m(&[&[2.0]]), m(&[&[1.0]])).unwrap()
    }

    #[test]
    fn assemble_examples() {
        let s = SaddleMatrix::new(Matrix::identity(2), m(&[&[1.0, 0.0]]), m(&[&[0.0]])).unwrap();
        assert_eq!(
            assemble_k(&s),
            m(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0]])
        );
        assert_eq!(assemble_k(&small()), m(&[&[4.0, 2.0], &[2.0, -1.0]]));
    }

    #[test]
    fn factorize_small_example() {
        let l = factorize(&small()).unwrap();
        assert_eq!(l.l11(), &m(&[&[2.0]]));
        assert_eq!(l.l21(), &m(&[&[1.0]]));
        assert_eq!(l.l22(), &m(&[&[2f64.sqrt()]]));
        let r = l.reconstruct();
        let k = assemble_k(&small());
        assert!(fro_norm(&r.sub(&k).unwrap()) <= 4.0 * UNIT_ROUNDOFF * fro_norm(&k));
    }

    #[test]
    fn factorize_identity_example() {
        let s = SaddleMatrix::new(Matrix::identity(2), m(&[&[1.0, 0.0]]), m(&[&[0.0]])).unwrap();
        let l = factorize(&s).unwrap();
        assert_eq!(l.l11(), &Matrix::identity(2));
        assert_eq!(l.l21(), &m(&[&[1.0, 0.0]]));
        assert_eq!(l.l22(), &m(&[&[1.0]]));
        assert_eq!(l.reconstruct(), assemble_k(&s));
    }

    #[test]
    fn factorize_rejects_indefinite_a() {
        let s = SaddleMatrix::new(m(&[&[-1.0]]), m(&[&[1.0]]), m(&[&[0.0]])).unwrap();
        assert!(matches!(
            factorize(&s),
            Err(Error::Breakdown {
                block: FactorBlock::Leading,
                pivot: 1
            })
        ));
        assert!(s.validate().is_err());
    }

    #[test]
    fn factorize_rejects_singular_schur() {
        // B = 0 with C = 0 makes the Schur block zero.
        let s = SaddleMatrix::new(Matrix::identity(2), Matrix::zeros(1, 2), m(&[&[0.0]])).unwrap();
        assert!(matches!(
            factorize(&s),
            Err(Error::Breakdown {
                block: FactorBlock::Schur,
                pivot: 1
            })
        ));
        assert!(s.validate().is_err());
    }

    #[test]
    fn construction_checks() {
        assert!(SaddleMatrix::new(m(&[&[1.0, 2.0], &[3.0, 1.0]]), Matrix::zeros(0, 2), Matrix::zeros(0, 0)).is_err());
        assert!(SaddleMatrix::new(Matrix::identity(2), Matrix::zeros(1, 3), m(&[&[0.0]])).is_err());
        assert!(SaddleMatrix::new(Matrix::zeros(0, 0), Matrix::zeros(0, 0), Matrix::zeros(0, 0)).is_err());
        let bad_c = SaddleMatrix::new(Matrix::identity(1), m(&[&[1.0]]), m(&[&[-1.0]])).unwrap();
        assert!(bad_c.validate().is_err());
        // B with more rows than columns can never have full row rank
        let wide = SaddleMatrix::new(Matrix::identity(1), m(&[&[1.0], &[2.0]]), Matrix::identity(2)).unwrap();
        assert!(wide.validate().is_err());
    }

    #[test]
    fn reconstruct_examples() {
        let l = GenCholFactor::new(m(&[&[2.0]]), m(&[&[1.0]]), m(&[&[2f64.sqrt()]])).unwrap();
        let r = l.reconstruct();
        assert_eq!(r[(0, 0)], 4.0);
        assert_eq!(r[(0, 1)], 2.0);
        assert!((r[(1, 1)] + 1.0).abs() <= 4.0 * UNIT_ROUNDOFF);
        let id = GenCholFactor::new(m(&[&[1.0]]), m(&[&[0.0]]), m(&[&[1.0]])).unwrap();
        assert_eq!(id.reconstruct(), Matrix::from_diag(&[1.0, -1.0]));
    }

    fn random_factor(rng: &mut ChaCha8Rng, mm: usize, n: usize) -> GenCholFactor {
        let p = mm + n;
        let mut l = Matrix::zeros(p, p);
        for i in 0..p {
            for j in 0..i {
                l[(i, j)] = rng.random_range(-0.5..0.5);
            }
            l[(i, i)] = rng.random_range(1.0..2.0);
        }
        GenCholFactor::from_dense(&l, BlockSpec::new(mm, n).unwrap()).unwrap()
    }

    #[test]
    fn reconstruct_matches_dense_triple_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (mm, n) in [(1, 0), (3, 2), (5, 5)] {
            let l = random_factor(&mut rng, mm, n);
            let d = l.to_dense();
            let j = l.spec().signature_matrix();
            let oracle = matmul(&matmul(&d, &j).unwrap(), &d.transpose()).unwrap();
            assert_eq!(l.reconstruct(), oracle);
        }
    }

    #[test]
    fn dense_embedding_examples() {
        let spec = BlockSpec::new(2, 1).unwrap();
        let id = GenCholFactor::from_dense(&Matrix::identity(3), spec).unwrap();
        assert_eq!(id.to_dense(), Matrix::identity(3));
        let l = GenCholFactor::new(m(&[&[2.0]]), m(&[&[3.0]]), m(&[&[4.0]])).unwrap();
        let d = factor_to_dense(&l);
        assert_eq!(d, m(&[&[2.0, 0.0], &[3.0, 4.0]]));
        assert_eq!(GenCholFactor::from_dense(&d, l.spec()).unwrap(), l);
        assert!(GenCholFactor::from_dense(&m(&[&[1.0, 1.0], &[0.0, 1.0]]), l.spec()).is_err());
    }

    #[test]
    fn delta_factor_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let l = random_factor(&mut rng, 3, 2);
        assert_eq!(delta_factor(&l, &l).unwrap(), Matrix::zeros(5, 5));
        let mut bumped = l.to_dense();
        bumped[(0, 0)] += 1.0;
        let lt = GenCholFactor::from_dense(&bumped, l.spec()).unwrap();
        let d = delta_factor(&lt, &l).unwrap();
        assert!((fro_norm(&d) - 1.0).abs() < 1e-15);
        let other = random_factor(&mut rng, 3, 2);
        let d = delta_factor(&other, &l).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(d[(i, j)], other.to_dense()[(i, j)] - l.to_dense()[(i, j)]);
            }
        }
        let wrong = random_factor(&mut rng, 4, 1);
        assert!(matches!(delta_factor(&wrong, &l), Err(Error::SpecMismatch { .. })));
    }

    #[test]
    fn factorize_recovers_known_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for (mm, n) in [(1, 1), (4, 3), (6, 6), (8, 2)] {
            let l = random_factor(&mut rng, mm, n);
            let k = l.reconstruct();
            let got = factorize_k(&k, l.spec()).unwrap();
            let p = l.spec().order() as f64;
            let d = got.delta_factor(&l).unwrap();
            let dense = l.to_dense();
            for i in 0..d.rows() {
                let row_scale = dense.row(i).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                for j in 0..=i {
                    assert!(
                        d[(i, j)].abs() <= 100.0 * p * UNIT_ROUNDOFF * row_scale,
                        "({i},{j}) {}",
                        d[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn n_zero_is_plain_cholesky() {
        let a = m(&[&[4.0, 2.0, 0.4], &[2.0, 5.0, 1.0], &[0.4, 1.0, 3.0]]);
        let s = SaddleMatrix::new(a.clone(), Matrix::zeros(0, 3), Matrix::zeros(0, 0)).unwrap();
        s.validate().unwrap();
        let l = factorize(&s).unwrap();
        assert_eq!(l.to_dense(), cholesky(&a).unwrap());
        assert_eq!(l.spec().signature(), vec![1.0; 3]);
    }

    #[test]
    fn text_roundtrip_and_symmetry_check() {
        let s = small();
        let text = s.to_text();
        assert_eq!(text, "1 1\n4 2\n2 -1\n");
        assert_eq!(SaddleMatrix::parse_text(&text).unwrap(), s);
        assert!(matches!(
            SaddleMatrix::parse_text("1 1\n4 2\n2.5 -1\n"),
            Err(Error::NotSymmetric { row: 1, col: 0 })
        ));
        assert!(SaddleMatrix::parse_text("1 1\n4 2\n").is_err());
        assert!(SaddleMatrix::parse_text("0 1\n1\n").is_err());
    }
}
