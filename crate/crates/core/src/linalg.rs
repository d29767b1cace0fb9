//! Dense complex matrices sized for desk-scale verification (n <= 64).
//!
//! Everything here is written out by hand: partial-pivoting LU, determinants,
//! induced operator norms for the l1 / l2 / linf vector norms, and a one-sided
//! Jacobi SVD used for nuclear norms.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Relative pivot threshold below which a matrix is declared singular.
pub const PIVOT_TOL: f64 = 1e-13;

/// Vector norm on C^n; operators carry the induced norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    #[default]
    L2,
    Linf,
}

impl NormKind {
    /// The norm of the dual space (used for covectors).
    pub fn dual(self) -> NormKind {
        match self {
            NormKind::L1 => NormKind::Linf,
            NormKind::L2 => NormKind::L2,
            NormKind::Linf => NormKind::L1,
        }
    }

    pub fn vector_norm(self, x: &[C64]) -> f64 {
        match self {
            NormKind::L1 => x.iter().map(|v| v.norm()).sum(),
            NormKind::L2 => x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt(),
            NormKind::Linf => x.iter().map(|v| v.norm()).fold(0.0, f64::max),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
            NormKind::Linf => "linf",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(NormKind::L1),
            "l2" => Ok(NormKind::L2),
            "linf" => Ok(NormKind::Linf),
            other => Err(Error::Invalid(format!("unknown norm `{other}`"))),
        }
    }
}

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        CMatrix { n, data }
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let d: Vec<C64> = d.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diag(&d)
    }

    /// Builds a matrix from real rows; panics if the rows are ragged.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(
            rows.iter().all(|r| r.len() == n),
            "rows must form a square matrix"
        );
        Self::from_fn(n, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn scalar(v: C64) -> Self {
        CMatrix {
            n: 1,
            data: vec![v],
        }
    }

    /// Outer product `v l^T` (the operator x -> l(x) v, no conjugation).
    pub fn outer(v: &[C64], l: &[C64]) -> Self {
        assert_eq!(v.len(), l.len());
        Self::from_fn(v.len(), |i, j| v[i] * l[j])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn col(&self, j: usize) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    /// `self + s * other`, in place.
    pub fn axpy(&mut self, s: C64, other: &CMatrix) {
        assert_eq!(self.n, other.n);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// `z I - self`.
    pub fn shifted_from(&self, z: C64) -> Self {
        let mut m = self.neg_ref();
        for i in 0..self.n {
            m[(i, i)] += z;
        }
        m
    }

    fn neg_ref(&self) -> Self {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|&v| -v).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn mat_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Row vector times matrix: `l^T M`.
    pub fn vec_mat(&self, l: &[C64]) -> Vec<C64> {
        assert_eq!(l.len(), self.n);
        let mut out = vec![ZERO; self.n];
        for (i, &li) in l.iter().enumerate() {
            if li == ZERO {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += li * a;
            }
        }
        out
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let orow = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// Commutator `self * other - other * self`.
    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        &self.matmul(other) - &other.matmul(self)
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// True when every entry strictly below the diagonal vanishes.
    pub fn is_upper_triangular(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self[(i, j)] == ZERO))
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n);
        CMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n);
        CMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;

    fn neg(self) -> CMatrix {
        self.neg_ref()
    }
}

/// LU factorisation with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    /// Factors `a`. Never fails; singularity is recorded and reported by `solve`.
    pub fn new(a: &CMatrix) -> Lu {
        let n = a.n;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = a.max_abs();
        let mut singular = scale == 0.0 && n > 0;
        for k in 0..n {
            let (p, pmag) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmag <= PIVOT_TOL * scale {
                singular = true;
            }
            if pmag == 0.0 {
                continue;
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor == ZERO {
                    continue;
                }
                for j in (k + 1)..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= factor * u;
                }
            }
        }
        Lu {
            lu,
            perm,
            sign,
            singular,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Determinant; exactly zero when a pivot vanished.
    pub fn det(&self) -> C64 {
        let mut d = C64::new(self.sign, 0.0);
        for i in 0..self.lu.n {
            d *= self.lu[(i, i)];
        }
        d
    }

    pub fn solve_vec(&self, b: &[C64]) -> Result<Vec<C64>> {
        if self.singular {
            return Err(Error::SingularMatrix);
        }
        let n = self.lu.n;
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in 0..i {
                s -= row[j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        Ok(x)
    }

    /// Solves `l^T A = r^T` for the row vector `l`.
    pub fn solve_vec_transposed(&self, r: &[C64]) -> Result<Vec<C64>> {
        if self.singular {
            return Err(Error::SingularMatrix);
        }
        // A^T l = r with P A = L U  =>  U^T L^T P l = r.
        let n = self.lu.n;
        let mut y = r.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.lu[(j, i)] * y[j];
            }
            y[i] = s / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in (i + 1)..n {
                s -= self.lu[(j, i)] * y[j];
            }
            y[i] = s;
        }
        let mut l = vec![ZERO; n];
        for (k, &p) in self.perm.iter().enumerate() {
            l[p] = y[k];
        }
        Ok(l)
    }

    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix> {
        let n = self.lu.n;
        assert_eq!(b.n, n);
        let mut out = CMatrix::zeros(n);
        for j in 0..n {
            let x = self.solve_vec(&b.col(j))?;
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<CMatrix> {
        self.solve(&CMatrix::identity(self.lu.n))
    }
}

/// Solves `A X = B` by partial-pivoting LU.
pub fn lu_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    Lu::new(a).solve(b)
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    Lu::new(a).inverse()
}

pub fn det(a: &CMatrix) -> C64 {
    Lu::new(a).det()
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

/// Operator norm induced by `kind`.
pub fn operator_norm(a: &CMatrix, kind: NormKind) -> Result<f64> {
    let n = a.n;
    match kind {
        NormKind::L1 => Ok((0..n)
            .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)),
        NormKind::Linf => Ok((0..n)
            .map(|i| a.row(i).iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)),
        NormKind::L2 => Ok(singular_values(a)?.first().copied().unwrap_or(0.0)),
    }
}

/// Largest singular value by power iteration on `A^H A`. Slow when the top
/// two singular values nearly coincide, so `operator_norm` uses the SVD and
/// this serves as an independent cross-check.
pub fn spectral_norm_power(a: &CMatrix) -> Result<f64> {
    let n = a.n;
    if n == 0 || a.max_abs() == 0.0 {
        return Ok(0.0);
    }
    if n == 1 {
        return Ok(a[(0, 0)].norm());
    }
    // Start from the heaviest column plus a small generic component.
    let heavy = (0..n)
        .max_by(|&p, &q| {
            let np: f64 = (0..n).map(|i| a[(i, p)].norm_sqr()).sum();
            let nq: f64 = (0..n).map(|i| a[(i, q)].norm_sqr()).sum();
            np.total_cmp(&nq)
        })
        .unwrap_or(0);
    let mut x: Vec<C64> = (0..n)
        .map(|i| {
            let g = C64::new(1.0 + 0.1 * i as f64, 0.05 * (i as f64 + 1.0).sqrt());
            if i == heavy {
                g + C64::new(n as f64, 0.0)
            } else {
                g
            }
        })
        .collect();
    normalize(&mut x);
    let ah = a.adjoint();
    let mut sigma = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let y = a.mat_vec(&x);
        let s_new = NormKind::L2.vector_norm(&y);
        let mut z = ah.mat_vec(&y);
        let zn = NormKind::L2.vector_norm(&z);
        if zn == 0.0 {
            return Ok(s_new);
        }
        for v in z.iter_mut() {
            *v /= zn;
        }
        x = z;
        if (s_new - sigma).abs() <= POWER_TOL * s_new {
            // One more half-step: the Rayleigh value at the updated vector.
            let final_s = NormKind::L2.vector_norm(&a.mat_vec(&x));
            return Ok(final_s.max(s_new));
        }
        sigma = s_new;
    }
    Err(Error::Convergence(POWER_MAX_ITER))
}

fn normalize(x: &mut [C64]) {
    let nx = NormKind::L2.vector_norm(x);
    if nx > 0.0 {
        for v in x.iter_mut() {
            *v /= nx;
        }
    }
}

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 80;

/// Singular values (descending) by one-sided Jacobi.
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    let n = a.n;
    // Work on columns of A.
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| a.col(j)).collect();
    let mut converged = n < 2;
    // Columns below rounding level of the whole matrix cannot move any
    // singular value by more than ε‖A‖; rotating them can cycle forever.
    let fro2: f64 = cols.iter().flatten().map(|v| v.norm_sqr()).sum();
    let negligible = f64::EPSILON * f64::EPSILON * fro2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = cols[p].iter().map(|v| v.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|v| v.norm_sqr()).sum();
                let gamma: C64 = cols[p]
                    .iter()
                    .zip(&cols[q])
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                let g = gamma.norm();
                if g <= JACOBI_TOL * (alpha * beta).sqrt()
                    || g == 0.0
                    || alpha.min(beta) <= negligible
                {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // Rotate (a_p, a_q * conj(phase)) as a real Jacobi pair.
                let (cp, cq) = {
                    let (left, right) = cols.split_at_mut(q);
                    (&mut left[p], &mut right[0])
                };
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let yq = *y * phase.conj();
                    let xp = *x;
                    *x = xp * c - yq * s;
                    *y = xp * s + yq * c;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence(JACOBI_MAX_SWEEPS));
    }
    let mut sv: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    Ok(sv)
}

/// Nuclear (trace-class) norm; only meaningful for the Euclidean norm.
pub fn nuclear_norm(a: &CMatrix, kind: NormKind) -> Result<f64> {
    if kind != NormKind::L2 {
        return Err(Error::UnsupportedNorm);
    }
    Ok(singular_values(a)?.iter().sum())
}

/// l2 condition number from the singular values.
pub fn condition_number(a: &CMatrix) -> Result<f64> {
    let sv = singular_values(a)?;
    let smin = *sv.last().unwrap_or(&0.0);
    if smin == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(sv[0] / smin)
}

/// On-disk matrix layout: `{"n":2,"re":[[...]],"im":[[...]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixFile {
    pub n: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl From<&CMatrix> for MatrixFile {
    fn from(m: &CMatrix) -> Self {
        let n = m.n;
        let re = (0..n)
            .map(|i| m.row(i).iter().map(|v| v.re).collect())
            .collect();
        let im = (0..n)
            .map(|i| m.row(i).iter().map(|v| v.im).collect())
            .collect();
        MatrixFile {
            n,
            re,
            im: Some(im),
        }
    }
}

impl TryFrom<MatrixFile> for CMatrix {
    type Error = Error;

    fn try_from(f: MatrixFile) -> Result<CMatrix> {
        let n = f.n;
        let square = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if !square(&f.re) || f.im.as_ref().is_some_and(|im| !square(im)) {
            return Err(Error::Invalid(format!(
                "matrix entries do not form a {n}x{n} array"
            )));
        }
        let m = CMatrix::from_fn(n, |i, j| {
            let im = f.im.as_ref().map_or(0.0, |im| im[i][j]);
            C64::new(f.re[i][j], im)
        });
        if !m.is_finite() {
            return Err(Error::Invalid("matrix has non-finite entries".into()));
        }
        Ok(m)
    }
}

impl Serialize for CMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = MatrixFile::deserialize(d)?;
        CMatrix::try_from(f).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn lu_solve_identity_and_scaled() {
        let b = CMatrix::from_fn(2, |i, j| C64::new(i as f64 + 1.0, j as f64 - 0.5));
        let x = lu_solve(&CMatrix::identity(2), &b).unwrap();
        assert!(x.max_abs_diff(&b) == 0.0);
        let x = lu_solve(&CMatrix::identity(2).scale_real(2.0), &CMatrix::identity(2)).unwrap();
        assert!(x.max_abs_diff(&CMatrix::identity(2).scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn lu_solve_hand_inverse() {
        let a = CMatrix::from_real_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let x = lu_solve(&a, &CMatrix::identity(2)).unwrap();
        let expect =
            CMatrix::from_real_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).scale_real(1.0 / 3.0);
        assert!(x.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = CMatrix::from_real_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(
            lu_solve(&a, &CMatrix::identity(2)),
            Err(Error::SingularMatrix)
        ));
        assert_eq!(det(&a), ZERO);
        assert!(matches!(
            lu_solve(&CMatrix::zeros(2), &CMatrix::identity(2)),
            Err(Error::SingularMatrix)
        ));
    }

    #[test]
    fn determinants() {
        assert_eq!(det(&CMatrix::identity(2)), ONE);
        assert!((det(&CMatrix::from_real_diag(&[-1.0, -2.0])) - c(2.0)).norm() < 1e-15);
        let swap = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!((det(&swap) - c(-1.0)).norm() < 1e-15);
    }

    #[test]
    fn norms_of_small_matrices() {
        for k in [NormKind::L1, NormKind::L2, NormKind::Linf] {
            assert!((operator_norm(&CMatrix::identity(3), k).unwrap() - 1.0).abs() < 1e-14);
        }
        let a = CMatrix::from_real_rows(&[vec![1.0, 0.0], vec![3.0, 0.0]]);
        assert_eq!(operator_norm(&a, NormKind::L1).unwrap(), 4.0);
        assert_eq!(operator_norm(&a, NormKind::Linf).unwrap(), 3.0);
        let nil = CMatrix::from_real_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]);
        assert!((operator_norm(&nil, NormKind::L2).unwrap() - 2.0).abs() < 1e-12);
        assert!((spectral_norm_power(&nil).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trace_and_nuclear_norm() {
        assert_eq!(CMatrix::from_real_diag(&[-1.0, -2.0]).trace(), c(-3.0));
        assert!((nuclear_norm(&CMatrix::identity(2), NormKind::L2).unwrap() - 2.0).abs() < 1e-14);
        let nil = CMatrix::from_real_rows(&[vec![0.0, 3.0], vec![0.0, 0.0]]);
        assert!((nuclear_norm(&nil, NormKind::L2).unwrap() - 3.0).abs() < 1e-14);
        assert!(matches!(
            nuclear_norm(&nil, NormKind::L1),
            Err(Error::UnsupportedNorm)
        ));
        assert!(matches!(
            nuclear_norm(&nil, NormKind::Linf),
            Err(Error::UnsupportedNorm)
        ));
    }

    #[test]
    fn transposed_solve_matches_inverse_rows() {
        let a = CMatrix::from_fn(3, |i, j| {
            C64::new(
                (i * 3 + j) as f64 + if i == j { 5.0 } else { 0.0 },
                0.3 * j as f64,
            )
        });
        let lu = Lu::new(&a);
        let inv = lu.inverse().unwrap();
        let r = vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.0), C64::new(0.0, 1.0)];
        let l = lu.solve_vec_transposed(&r).unwrap();
        let expect = inv.vec_mat(&r);
        for (x, y) in l.iter().zip(&expect) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn matrix_file_round_trip() {
        let m = CMatrix::from_fn(2, |i, j| C64::new(i as f64, j as f64 * 0.25));
        let s = serde_json::to_string(&m).unwrap();
        let back: CMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        let real: CMatrix = serde_json::from_str(r#"{"n":2,"re":[[1,2],[3,4]]}"#).unwrap();
        assert_eq!(real[(1, 0)], c(3.0));
        assert!(serde_json::from_str::<CMatrix>(r#"{"n":3,"re":[[1,2],[3,4]]}"#).is_err());
    }
}
