//! Dense matrix kernels.
//!
//! Storage is row-major `f64`. Every reduction accumulates left to right in
//! index order so that results are bit-reproducible across runs and
//! platforms with IEEE-754 double arithmetic.

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Unit roundoff of IEEE double precision, `2⁻⁵³`.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

/// Relative off-diagonal tolerance of the one-sided Jacobi SVD.
pub const JACOBI_TOL: f64 = 1e-14;
/// Sweep cap of the one-sided Jacobi SVD.
pub const JACOBI_MAX_SWEEPS: usize = 60;

/// Dense real matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "Matrix::new",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(Error::DimensionMismatch {
                    op: "Matrix::from_rows",
                    left: (nrows, ncols),
                    right: (1, r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(nrows, ncols, data)
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Entrywise absolute value `|X|`.
    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_raw(self.rows, self.cols, data))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Exact symmetry check; reports the first mismatching `(i, j)`, `i > j`.
    pub fn check_symmetric(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                op: "symmetry check",
                rows: self.rows,
                cols: self.cols,
            });
        }
        for i in 0..self.rows {
            for j in 0..i {
                if self[(i, j)] != self[(j, i)] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn is_symmetric(&self) -> bool {
        self.check_symmetric().is_ok()
    }

    /// Fails with the first nonzero strictly-upper entry.
    pub fn check_lower_triangular(&self) -> Result<()> {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if self[(i, j)] != 0.0 {
                    return Err(Error::NotLowerTriangular { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn is_lower_triangular(&self) -> bool {
        self.check_lower_triangular().is_ok()
    }

    pub fn is_upper_triangular(&self) -> bool {
        (0..self.rows).all(|i| (0..i.min(self.cols)).all(|j| self[(i, j)] == 0.0))
    }

    /// Copies the `rows x cols` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "block out of range");
        let mut b = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                b[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        b
    }

    /// Writes `src` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, src: &Matrix) {
        assert!(r0 + src.rows <= self.rows && c0 + src.cols <= self.cols, "block out of range");
        for i in 0..src.rows {
            for j in 0..src.cols {
                self[(r0 + i, c0 + j)] = src[(i, j)];
            }
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    /// Serializes in the plain-text matrix format: a `rows cols` header line
    /// followed by one whitespace-separated line per row, 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        out.push_str(&self.rows_to_text());
        out
    }

    /// Row lines only, without the header.
    pub fn rows_to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|&v| fmt_g17(v)).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Parses the plain-text matrix format. Blank lines are ignored.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (line_no, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let dims = parse_counts(header, line_no)?;
        let m = parse_row_block(&mut lines, dims.0, dims.1)?;
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse {
                line: ln,
                msg: "trailing content after last row".into(),
            });
        }
        Ok(m)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub(crate) fn parse_counts(line: &str, line_no: usize) -> Result<(usize, usize)> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != 2 {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("expected two counts, found {} tokens", toks.len()),
        });
    }
    let parse = |t: &str| {
        t.parse::<usize>().map_err(|e| Error::Parse {
            line: line_no,
            msg: format!("bad count {t:?}: {e}"),
        })
    };
    Ok((parse(toks[0])?, parse(toks[1])?))
}

pub(crate) fn parse_row_block<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    rows: usize,
    cols: usize,
) -> Result<Matrix> {
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (line_no, line) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: format!("expected {rows} rows, found {r}"),
        })?;
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad value {tok:?}: {e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite value {tok:?}"),
                });
            }
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {cols} values, found {}", data.len() - before),
            });
        }
    }
    Ok(Matrix::from_raw(rows, cols, data))
}

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros trimmed,
/// scientific notation when the decimal exponent is below -4 or at least 17.
pub fn fmt_g17(x: f64) -> String {
    const P: i32 = 17;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let mant = trim_fraction(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, x);
        trim_fraction(&fixed).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Positive diagonal scaling matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagScaling {
    diag: Vec<f64>,
}

impl DiagScaling {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if let Some(index) = diag.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidScaling { index });
        }
        Ok(Self { diag })
    }

    pub fn identity(order: usize) -> Self {
        Self { diag: vec![1.0; order] }
    }

    pub fn order(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn is_identity(&self) -> bool {
        self.diag.iter().all(|&d| d == 1.0)
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_diag(&self.diag)
    }

    /// `X·D`
    pub fn right_mul(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.cols(), self.order());
        let mut out = x.clone();
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                out[(i, j)] *= self.diag[j];
            }
        }
        out
    }

    /// `X·D⁻¹`
    pub fn right_div(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.cols(), self.order());
        let mut out = x.clone();
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                out[(i, j)] /= self.diag[j];
            }
        }
        out
    }

    /// `D·X`
    pub fn left_mul(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows(), self.order());
        let mut out = x.clone();
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                out[(i, j)] *= self.diag[i];
            }
        }
        out
    }

    /// `‖D⁻¹‖₂`
    pub fn inv_norm2(&self) -> f64 {
        self.diag.iter().fold(0.0_f64, |m, &d| m.max(1.0 / d))
    }
}

/// Standard product with fixed left-to-right accumulation over the inner index.
pub fn matmul(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    if x.cols != y.rows {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            left: x.shape(),
            right: y.shape(),
        });
    }
    let mut out = Matrix::zeros(x.rows, y.cols);
    for i in 0..x.rows {
        let xrow = x.row(i);
        for j in 0..y.cols {
            let mut s = 0.0;
            for (k, &xik) in xrow.iter().enumerate() {
                s += xik * y.data[k * y.cols + j];
            }
            out[(i, j)] = s;
        }
    }
    Ok(out)
}

/// Euclidean norm of a slice, with rescaling outside the safe exponent range.
pub fn vec_norm2(v: &[f64]) -> f64 {
    let big = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if big == 0.0 {
        return 0.0;
    }
    if (1e-150..=1e150).contains(&big) {
        let mut s = 0.0;
        for &x in v {
            s += x * x;
        }
        s.sqrt()
    } else {
        let mut s = 0.0;
        for &x in v {
            let t = x / big;
            s += t * t;
        }
        big * s.sqrt()
    }
}

pub fn fro_norm(x: &Matrix) -> f64 {
    vec_norm2(&x.data)
}

/// Singular values in descending order via one-sided (Hestenes) Jacobi.
pub fn singular_values(x: &Matrix) -> Result<Vec<f64>> {
    let tall = if x.rows >= x.cols { x.clone() } else { x.transpose() };
    let (m, n) = tall.shape();
    if n == 0 {
        return Ok(Vec::new());
    }
    let big = tall.max_abs();
    if big == 0.0 {
        return Ok(vec![0.0; n]);
    }
    // Power-of-two prescaling is exact and keeps squared norms in range.
    let scale = 2f64.powi(big.log2().floor() as i32);
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| tall[(i, j)] / scale).collect())
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n - 1 {
            for j in (i + 1)..n {
                let (left, right) = cols.split_at_mut(j);
                let (ci, cj) = (&mut left[i], &mut right[0]);
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..m {
                    alpha += ci[k] * ci[k];
                    beta += cj[k] * cj[k];
                    gamma += ci[k] * cj[k];
                }
                if alpha < f64::MIN_POSITIVE || beta < f64::MIN_POSITIVE {
                    continue;
                }
                if gamma.abs() <= JACOBI_TOL * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + 1.0_f64.hypot(zeta));
                let c = 1.0 / 1.0_f64.hypot(t);
                let s = c * t;
                for k in 0..m {
                    let (a, b) = (ci[k], cj[k]);
                    ci[k] = c * a - s * b;
                    cj[k] = s * a + c * b;
                }
            }
        }
        if !rotated {
            let mut sv: Vec<f64> = cols.iter().map(|c| vec_norm2(c) * scale).collect();
            sv.sort_by(|a, b| b.total_cmp(a));
            return Ok(sv);
        }
    }
    Err(Error::NoConvergence {
        sweeps: JACOBI_MAX_SWEEPS,
    })
}

/// Largest singular value.
pub fn spectral_norm(x: &Matrix) -> Result<f64> {
    Ok(singular_values(x)?.first().copied().unwrap_or(0.0))
}

/// `σ_max / σ_min`; singular when `σ_min ≤ n·u·σ_max`.
pub fn kappa2(x: &Matrix) -> Result<f64> {
    if !x.is_square() {
        return Err(Error::NotSquare {
            op: "kappa2",
            rows: x.rows,
            cols: x.cols,
        });
    }
    let sv = singular_values(x)?;
    let (Some(&max), Some(&min)) = (sv.first(), sv.last()) else {
        return Err(Error::Singular);
    };
    if !(min > x.rows as f64 * UNIT_ROUNDOFF * max) {
        return Err(Error::Singular);
    }
    Ok(max / min)
}

/// Eigenvalues of a symmetric matrix (ascending) by cyclic two-sided Jacobi.
pub fn sym_eigenvalues(s: &Matrix) -> Result<Vec<f64>> {
    s.check_symmetric()?;
    let n = s.rows;
    let mut a = s.clone();
    let total = fro_norm(&a);
    if total == 0.0 {
        return Ok(vec![0.0; n]);
    }
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
        }
        if off.sqrt() <= 1e-15 * total {
            let mut ev = a.diag();
            ev.sort_by(f64::total_cmp);
            return Ok(ev);
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + 1.0_f64.hypot(theta));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / 1.0_f64.hypot(t);
                let sn = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
            }
        }
    }
    Err(Error::NoConvergence { sweeps: 100 })
}

/// Cholesky factor of a symmetric positive definite matrix; only the lower
/// triangle of `a` is read. Pivot indices in errors are 1-based.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            op: "cholesky",
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j + 1 });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Inverse of a nonsingular lower-triangular matrix by forward substitution,
/// one column at a time.
pub fn lower_tri_inverse(l: &Matrix) -> Result<Matrix> {
    if !l.is_square() {
        return Err(Error::NotSquare {
            op: "lower_tri_inverse",
            rows: l.rows,
            cols: l.cols,
        });
    }
    l.check_lower_triangular()?;
    let n = l.rows;
    if let Some(index) = (0..n).find(|&i| l[(i, i)] == 0.0) {
        return Err(Error::ZeroDiagonal { index });
    }
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = 1.0 / l[(j, j)];
        for i in (j + 1)..n {
            let mut s = 0.0;
            for k in j..i {
                s += l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / l[(i, i)];
        }
    }
    Ok(inv)
}

/// Inverse of a general square matrix by Gauss-Jordan with partial pivoting.
pub fn inverse(x: &Matrix) -> Result<Matrix> {
    if !x.is_square() {
        return Err(Error::NotSquare {
            op: "inverse",
            rows: x.rows,
            cols: x.cols,
        });
    }
    if x.is_lower_triangular() {
        return lower_tri_inverse(x).map_err(|_| Error::Singular);
    }
    if x.is_upper_triangular() {
        return lower_tri_inverse(&x.transpose())
            .map(|t| t.transpose())
            .map_err(|_| Error::Singular);
    }
    let n = x.rows;
    let mut a = x.clone();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
            .expect("nonempty range");
        if a[(piv, col)] == 0.0 {
            return Err(Error::Singular);
        }
        if piv != col {
            for k in 0..n {
                a.data.swap(piv * n + k, col * n + k);
                inv.data.swap(piv * n + k, col * n + k);
            }
        }
        let d = a[(col, col)];
        for k in 0..n {
            a[(col, k)] /= d;
            inv[(col, k)] /= d;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = a[(i, col)];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                a[(i, k)] -= f * a[(col, k)];
                inv[(i, k)] -= f * inv[(col, k)];
            }
        }
    }
    if !inv.is_finite() {
        return Err(Error::Singular);
    }
    Ok(inv)
}

/// Bauer-Skeel condition number `‖ |X⁻¹| |X| ‖_F`, using an explicitly formed inverse.
pub fn cond_bauer_skeel(x: &Matrix) -> Result<f64> {
    let inv = inverse(x)?;
    cond_bauer_skeel_with_inverse(x, &inv)
}

/// Bauer-Skeel condition number when `X⁻¹` is already at hand.
pub fn cond_bauer_skeel_with_inverse(x: &Matrix, inv: &Matrix) -> Result<f64> {
    Ok(fro_norm(&matmul(&inv.abs(), &x.abs())?))
}

/// Strictly upper part of `A` plus half its diagonal.
pub fn up_operator(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            op: "up_operator",
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let mut u = Matrix::zeros(n, n);
    for i in 0..n {
        u[(i, i)] = 0.5 * a[(i, i)];
        for j in (i + 1)..n {
            u[(i, j)] = a[(i, j)];
        }
    }
    Ok(u)
}

/// Smaller root `(b − √(b² − 4ac)) / (2a)` of `a x² − b x + c`, the upper
/// bound on `x(1)` for a continuous solution of the quadratic inequality
/// starting from zero.
///
/// Evaluated as `2c / (b + √(b² − 4ac))` to avoid cancellation for small `c`.
pub fn quadratic_root_bound(a: f64, b: f64, c: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "quadratic_root_bound needs a, b > 0 (a = {a}, b = {b})"
        )));
    }
    let disc = b * b - 4.0 * a * c;
    if !(disc > 0.0) {
        return Err(Error::ConditionViolated(crate::error::Condition::Discriminant));
    }
    Ok(2.0 * c / (b + disc.sqrt()))
}

/// `γ_k = k·u / (1 − k·u)`.
pub fn gamma_k(k: usize, u: f64) -> Result<f64> {
    let ku = k as f64 * u;
    if !(ku < 1.0) {
        return Err(Error::GammaDomain { k, u });
    }
    Ok(ku / (1.0 - ku))
}

/// Orthonormal basis of the column space of a full-column-rank `G` (m ≥ n),
/// by Householder QR. Returns the thin `m x n` factor `Q`.
pub fn orthonormal_columns(g: &Matrix) -> Result<Matrix> {
    let (m, n) = g.shape();
    if n > m {
        return Err(Error::InvalidArgument(format!(
            "orthonormal_columns needs rows >= cols, got {m}x{n}"
        )));
    }
    let mut r = g.clone();
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let x: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        let alpha = vec_norm2(&x);
        if alpha == 0.0 {
            return Err(Error::Singular);
        }
        let mut v = x;
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vn = vec_norm2(&v);
        for e in &mut v {
            *e /= vn;
        }
        for j in k..n {
            let mut dot = 0.0;
            for (t, i) in (k..m).enumerate() {
                dot += v[t] * r[(i, j)];
            }
            for (t, i) in (k..m).enumerate() {
                r[(i, j)] -= 2.0 * v[t] * dot;
            }
        }
        vs.push(v);
    }
    // Accumulate Q = H_0 H_1 ... H_{n-1} applied to the first n unit vectors.
    let mut q = Matrix::zeros(m, n);
    for j in 0..n {
        q[(j, j)] = 1.0;
    }
    for k in (0..n).rev() {
        let v = &vs[k];
        for j in 0..n {
            let mut dot = 0.0;
            for (t, i) in (k..m).enumerate() {
                dot += v[t] * q[(i, j)];
            }
            for (t, i) in (k..m).enumerate() {
                q[(i, j)] -= 2.0 * v[t] * dot;
            }
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_raw(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    fn random_lower(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let mut l = random(rng, n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                l[(i, j)] = 0.0;
            }
            l[(i, i)] = 1.0 + rng.random::<f64>();
        }
        l
    }

    #[test]
    fn construction_rejects_non_finite() {
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert_eq!(Matrix::new(0, 3, vec![]).unwrap().shape(), (0, 3));
    }

    #[test]
    fn matmul_examples() {
        let x = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.5]]);
        assert_eq!(matmul(&Matrix::identity(3), &x).unwrap(), x);
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(matmul(&a, &Matrix::identity(2)).unwrap(), a);
        assert!(matches!(
            matmul(&a, &Matrix::zeros(3, 1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn matmul_matches_naive_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&mut rng, 5, 5);
        let y = random(&mut rng, 5, 5);
        let mut naive = vec![0.0; 25];
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    naive[i * 5 + j] += x.as_slice()[i * 5 + k] * y.as_slice()[k * 5 + j];
                }
            }
        }
        assert_eq!(matmul(&x, &y).unwrap().as_slice(), &naive[..]);
    }

    #[test]
    fn fro_norm_examples() {
        assert_eq!(fro_norm(&m(&[&[1.0, 1.0], &[1.0, 1.0]])), 2.0);
        assert_eq!(fro_norm(&Matrix::zeros(3, 2)), 0.0);
        assert_eq!(fro_norm(&m(&[&[3.0, 4.0]])), 5.0);
        // overflow-safe path
        assert!((fro_norm(&m(&[&[3e200, 4e200]])) / 5e200 - 1.0).abs() < 1e-15);
        assert!((fro_norm(&m(&[&[3e-200, 4e-200]])) / 5e-200 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_norm_examples() {
        assert!((spectral_norm(&Matrix::from_diag(&[3.0, 4.0])).unwrap() - 4.0).abs() < 1e-15);
        let u = [0.6, 0.8];
        let v = [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0];
        let mut uv = Matrix::zeros(2, 3);
        for i in 0..2 {
            for j in 0..3 {
                uv[(i, j)] = u[i] * v[j];
            }
        }
        assert!((spectral_norm(&uv).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(spectral_norm(&Matrix::zeros(2, 2)).unwrap(), 0.0);
    }

    #[test]
    fn spectral_norm_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(&mut rng, 6, 6);
        // oracle: power iteration on XᵀX
        let xtx = matmul(&x.transpose(), &x).unwrap();
        let mut v = vec![1.0; 6];
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let w: Vec<f64> = (0..6).map(|i| (0..6).map(|j| xtx[(i, j)] * v[j]).sum()).collect();
            let nrm = w.iter().map(|t| t * t).sum::<f64>().sqrt();
            lambda = nrm;
            v = w.iter().map(|t| t / nrm).collect();
        }
        let s = spectral_norm(&x).unwrap();
        assert!((s - lambda.sqrt()).abs() <= 1e-10 * s, "{s} vs {}", lambda.sqrt());
    }

    #[test]
    fn singular_values_wide_and_tall_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&mut rng, 3, 7);
        let a = singular_values(&x).unwrap();
        let b = singular_values(&x.transpose()).unwrap();
        assert_eq!(a.len(), 3);
        for (s, t) in a.iter().zip(&b) {
            assert!((s - t).abs() < 1e-14 * a[0]);
        }
    }

    #[test]
    fn kappa2_examples() {
        assert!((kappa2(&Matrix::identity(4)).unwrap() - 1.0).abs() < 1e-15);
        assert!((kappa2(&Matrix::from_diag(&[10.0, 1.0])).unwrap() - 10.0).abs() < 1e-14);
        let g = 1e-3;
        let l = m(&[&[1.0 / g, 0.0], &[1.0, 1.0]]);
        let k = kappa2(&l).unwrap();
        // closed form: singular values of a 2x2 from trace/determinant of LᵀL
        let (a, b, c) = (1.0 / g, 1.0, 1.0);
        let fro2 = a * a + b * b + c * c;
        let det = a * c;
        let disc = (fro2 * fro2 - 4.0 * det * det).sqrt();
        let smax = ((fro2 + disc) / 2.0).sqrt();
        let smin = det / smax;
        assert!((k - smax / smin).abs() <= 1e-10 * k);
        assert!(k > 500.0);
        assert!(matches!(
            kappa2(&m(&[&[1.0, 2.0], &[2.0, 4.0]])),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn bauer_skeel_examples() {
        for p in 1..5 {
            let c = cond_bauer_skeel(&Matrix::identity(p)).unwrap();
            assert!((c - (p as f64).sqrt()).abs() < 1e-15);
            let d = Matrix::from_diag(&(1..=p).map(|i| i as f64 * 3.7).collect::<Vec<_>>());
            assert!((cond_bauer_skeel(&d).unwrap() - (p as f64).sqrt()).abs() < 1e-14);
        }
        // |L⁻¹||L| with L = [[1,0],[γ,1]] is [[1,0],[2γ,1]] by brute force
        let g = 10.0;
        let l = m(&[&[1.0, 0.0], &[g, 1.0]]);
        let linv = m(&[&[1.0, 0.0], &[-g, 1.0]]);
        let mut prod = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    prod[i][j] += linv[(i, k)].abs() * l[(k, j)].abs();
                }
            }
        }
        assert_eq!(prod, [[1.0, 0.0], [20.0, 1.0]]);
        let expect = (1.0f64 + 400.0 + 1.0).sqrt();
        assert_eq!(cond_bauer_skeel(&l).unwrap(), expect);
        assert!(matches!(
            cond_bauer_skeel(&m(&[&[1.0, 1.0], &[1.0, 1.0]])),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn general_inverse_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random(&mut rng, 6, 6);
        let inv = inverse(&x).unwrap();
        let r = matmul(&x, &inv).unwrap().sub(&Matrix::identity(6)).unwrap();
        assert!(fro_norm(&r) < 1e-12);
    }

    #[test]
    fn lower_tri_inverse_examples() {
        assert_eq!(lower_tri_inverse(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        assert_eq!(
            lower_tri_inverse(&m(&[&[2.0, 0.0], &[0.0, 4.0]])).unwrap(),
            m(&[&[0.5, 0.0], &[0.0, 0.25]])
        );
        let g = 123.5;
        assert_eq!(
            lower_tri_inverse(&m(&[&[1.0, 0.0], &[g, 1.0]])).unwrap(),
            m(&[&[1.0, 0.0], &[-g, 1.0]])
        );
        assert!(matches!(
            lower_tri_inverse(&m(&[&[1.0, 0.0], &[1.0, 0.0]])),
            Err(Error::ZeroDiagonal { index: 1 })
        ));
        assert!(matches!(
            lower_tri_inverse(&m(&[&[1.0, 1.0], &[0.0, 1.0]])),
            Err(Error::NotLowerTriangular { row: 0, col: 1 })
        ));
    }

    #[test]
    fn lower_tri_inverse_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for p in 1..=10 {
            let l = random_lower(&mut rng, p);
            let inv = lower_tri_inverse(&l).unwrap();
            let r = matmul(&l, &inv).unwrap().sub(&Matrix::identity(p)).unwrap();
            let bound = 10.0 * p as f64 * UNIT_ROUNDOFF * kappa2(&l).unwrap();
            assert!(fro_norm(&r) <= bound, "p={p}: {} > {bound}", fro_norm(&r));
        }
    }

    #[test]
    fn up_operator_examples() {
        let a = m(&[&[2.0, 2.0], &[2.0, 2.0]]);
        assert_eq!(up_operator(&a).unwrap(), m(&[&[1.0, 2.0], &[0.0, 1.0]]));
        assert_eq!(
            up_operator(&Matrix::from_diag(&[2.0, 4.0, 6.0])).unwrap(),
            Matrix::from_diag(&[1.0, 2.0, 3.0])
        );
        assert!(up_operator(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn up_operator_symmetric_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random(&mut rng, 8, 8);
        let s = x.add(&x.transpose()).unwrap();
        let u = up_operator(&s).unwrap();
        assert!(fro_norm(&u) <= fro_norm(&s) / 2f64.sqrt() * (1.0 + 1e-12));
        // up(S) + up(S)ᵀ = S exactly
        assert_eq!(u.add(&u.transpose()).unwrap(), s);
    }

    #[test]
    fn quadratic_root_bound_examples() {
        let r2 = 2f64.sqrt();
        assert_eq!(quadratic_root_bound(1.0, r2, 0.0).unwrap(), 0.0);
        let c = 1.0 - 1e-8;
        // quadratic formula: (2 − √(4 − 4c))/2 = 1 − √(1 − c) = 1 − 1e-4
        let got = quadratic_root_bound(1.0, 2.0, c).unwrap();
        assert!((got - (1.0 - 1e-4)).abs() < 1e-11, "{got}");
        for &c in &[0.01, 0.1, 0.245, 0.4999] {
            let x = quadratic_root_bound(1.0, r2, c).unwrap();
            // both roots multiply to c and sum to √2: the smaller is below √2/2
            let big = r2 - x;
            assert!(x < r2 / 2.0 && x < big);
            assert!((x * big - c).abs() < 1e-14);
        }
        assert!(matches!(
            quadratic_root_bound(1.0, r2, 0.6),
            Err(Error::ConditionViolated(_))
        ));
        assert!(quadratic_root_bound(0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn quadratic_root_bound_small_c_asymptotics() {
        let (a, b) = (1.0, 2f64.sqrt());
        for &c in &[1e-3, 1e-6, 1e-9] {
            let x = quadratic_root_bound(a, b, c).unwrap();
            let lead = c / b;
            let slack = 2.0 * a * c / (b * b * b) * c;
            assert!((x - lead).abs() <= slack, "c={c}");
        }
    }

    #[test]
    fn gamma_k_examples() {
        let u = UNIT_ROUNDOFF;
        assert_eq!(gamma_k(0, u).unwrap(), 0.0);
        assert_eq!(gamma_k(1, u).unwrap(), u / (1.0 - u));
        assert_eq!(gamma_k(3 * 5 + 1, u).unwrap(), 16.0 * u / (1.0 - 16.0 * u));
        assert!(matches!(gamma_k(10, 0.1), Err(Error::GammaDomain { .. })));
    }

    #[test]
    fn g17_formatting() {
        assert_eq!(fmt_g17(2.0), "2");
        assert_eq!(fmt_g17(0.0), "0");
        assert_eq!(fmt_g17(2f64.sqrt()), "1.4142135623730951");
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(-1e-5), "-1.0000000000000001e-05");
        assert_eq!(fmt_g17(1e20), "1e+20");
        assert_eq!(fmt_g17(123456.0), "123456");
    }

    #[test]
    fn text_format_parse_errors() {
        assert!(Matrix::parse_text("").is_err());
        assert!(Matrix::parse_text("2 2\n1 2\n3\n").is_err());
        assert!(Matrix::parse_text("1 1\nabc\n").is_err());
        assert!(Matrix::parse_text("1 1\n1\n2\n").is_err());
        let m = Matrix::parse_text("2 1\n\n1.5\n-2\n").unwrap();
        assert_eq!(m.as_slice(), &[1.5, -2.0]);
    }

    #[test]
    fn sym_eigenvalues_known() {
        let s = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let ev = sym_eigenvalues(&s).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn orthonormal_columns_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random(&mut rng, 7, 4);
        let q = orthonormal_columns(&g).unwrap();
        let qtq = matmul(&q.transpose(), &q).unwrap();
        assert!(fro_norm(&qtq.sub(&Matrix::identity(4)).unwrap()) < 1e-14);
    }

    fn arb_matrix(max: usize) -> impl Strategy<Value = Matrix> {
        (1..=max, 1..=max).prop_flat_map(|(r, c)| {
            prop::collection::vec(-10.0f64..10.0, r * c)
                .prop_map(move |d| Matrix::new(r, c, d).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn text_roundtrip_is_exact(x in arb_matrix(6)) {
            prop_assert_eq!(Matrix::parse_text(&x.to_text()).unwrap(), x);
        }

        #[test]
        fn norm_sandwich(x in arb_matrix(8)) {
            let s = spectral_norm(&x).unwrap();
            let f = fro_norm(&x);
            let rank_cap = x.rows().min(x.cols()) as f64;
            prop_assert!(s <= f * (1.0 + 1e-12));
            prop_assert!(f <= rank_cap.sqrt() * s * (1.0 + 1e-12));
        }

        #[test]
        fn up_of_scaled_is_scaled_up(x in (1usize..8).prop_flat_map(|n| (
            prop::collection::vec(-5.0f64..5.0, n * n),
            prop::collection::vec(0.01f64..100.0, n),
        ))) {
            let n = x.1.len();
            let a = Matrix::new(n, n, x.0).unwrap();
            let d = DiagScaling::new(x.1).unwrap();
            let lhs = up_operator(&d.right_mul(&a)).unwrap();
            let rhs = d.right_mul(&up_operator(&a).unwrap());
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn quadratic_root_monotone_in_c(c1 in -1.0f64..0.49, dc in 0.0f64..0.01) {
            let r2 = 2f64.sqrt();
            let c2 = (c1 + dc).min(0.4999);
            let x1 = quadratic_root_bound(1.0, r2, c1).unwrap();
            let x2 = quadratic_root_bound(1.0, r2, c2).unwrap();
            prop_assert!(x1 <= x2);
        }
    }
}
