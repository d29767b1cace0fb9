//! The resolvent-integral calculus `φ(A) = ∫ A R(t,A) dμ(t)` and the
//! perturbation inequalities it satisfies.

use serde::{Deserialize, Serialize};

use crate::cbf::{CbfSpec, DensityPiece};
use crate::error::{Error, Result};
use crate::linalg::{nuclear_norm, operator_norm, CMatrix, Lu, NormKind, C64};
use crate::operator::OperatorInstance;
use crate::quad;

/// Default absolute tolerance per matrix entry.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Slack used when judging inequalities.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct CalcResult {
    pub value: CMatrix,
    pub error: f64,
    pub nodes: usize,
}

/// Below `SMALL_T · scale` a tabulated node is evaluated at the floor instead.
/// The kernels have finite limits at `t → 0` with `O(t)` corrections, while
/// `tI − A` is numerically singular there when `0 ∈ σ(A)`.
const SMALL_T: f64 = 1e-8;

fn node_floor(a: &CMatrix, b: Option<&CMatrix>) -> f64 {
    SMALL_T * a.max_abs().max(b.map_or(0.0, |b| b.max_abs())).max(1.0)
}

/// `A R(t,A)`, formed by one solve with `A` as right-hand side.
fn a_resolvent(a: &CMatrix, t: f64) -> Result<CMatrix> {
    let z = C64::new(t, 0.0);
    Lu::new(&a.shifted_from(z))
        .solve(a)
        .map_err(|_| Error::SpectrumHit(z))
}

/// `φ(A)` for a bare matrix whose resolvent exists on `(0, ∞)`.
pub fn apply_matrix(f: &CbfSpec, a: &CMatrix, tol: f64) -> Result<CalcResult> {
    let mu = f.measure()?;
    let n = a.n();
    let mut value = CMatrix::identity(n).scale_real(f.c);
    value.axpy(C64::new(f.b, 0.0), a);
    let mut error = 0.0;
    let mut nodes = 0;
    for atom in &mu.atoms {
        value.axpy(C64::new(atom.w, 0.0), &a_resolvent(a, atom.t)?);
        nodes += 1;
    }
    for d in &mu.densities {
        match d {
            DensityPiece::ReciprocalTail { lambda } => {
                // t = λ/u turns dt/t on [λ, ∞) into du/u on (0, 1].
                let lam = *lambda;
                let g = move |u: f64| -> Result<CMatrix> {
                    Ok(a_resolvent(a, lam / u)?.scale_real(1.0 / u))
                };
                let q = quad::integrate(&g, 0.0, 1.0, &[0.5], tol)?;
                value.axpy(C64::new(1.0, 0.0), &q.value);
                error += q.error;
                nodes += q.evals;
            }
            DensityPiece::Tabulated {
                nodes: ts, weights, ..
            } => {
                let floor = node_floor(a, None);
                for (&t, &w) in ts.iter().zip(weights) {
                    value.axpy(C64::new(w, 0.0), &a_resolvent(a, t.max(floor))?);
                }
                nodes += ts.len();
            }
        }
    }
    Ok(CalcResult {
        value,
        error,
        nodes,
    })
}

/// `φ(A)` for a classified nonpositive operator.
pub fn apply(f: &CbfSpec, a: &OperatorInstance, tol: f64) -> Result<CalcResult> {
    apply_matrix(f, &a.a, tol)
}

/// `R(t,A)(A − B) R(t,B)`; callers supply the factor `t`.
fn difference_kernel(a: &CMatrix, b: &CMatrix, v: &CMatrix, t: f64) -> Result<CMatrix> {
    let z = C64::new(t, 0.0);
    let rb = Lu::new(&b.shifted_from(z))
        .inverse()
        .map_err(|_| Error::SpectrumHit(z))?;
    let w = v.matmul(&rb);
    Lu::new(&a.shifted_from(z))
        .solve(&w)
        .map_err(|_| Error::SpectrumHit(z))
}

/// `φ(A) − φ(B) = ∫ t R(t,A)(A − B)R(t,B) dμ(t)` for bare matrices.
pub fn apply_diff_matrix(f: &CbfSpec, a: &CMatrix, b: &CMatrix, tol: f64) -> Result<CalcResult> {
    let mu = f.measure()?;
    if a.n() != b.n() {
        return Err(Error::Invalid("operators differ in dimension".into()));
    }
    let v = a - b;
    let mut value = v.scale_real(f.b);
    if v.max_abs() == 0.0 {
        return Ok(CalcResult {
            value: CMatrix::zeros(a.n()),
            error: 0.0,
            nodes: 0,
        });
    }
    let mut error = 0.0;
    let mut nodes = 0;
    for atom in &mu.atoms {
        let k = difference_kernel(a, b, &v, atom.t)?;
        value.axpy(C64::new(atom.t * atom.w, 0.0), &k);
        nodes += 1;
    }
    for d in &mu.densities {
        match d {
            DensityPiece::ReciprocalTail { lambda } => {
                // ∫_λ^∞ R_A V R_B dt, t = λ/u.
                let lam = *lambda;
                let v = &v;
                let g = move |u: f64| -> Result<CMatrix> {
                    Ok(difference_kernel(a, b, v, lam / u)?.scale_real(lam / (u * u)))
                };
                let q = quad::integrate(&g, 0.0, 1.0, &[0.5], tol)?;
                value.axpy(C64::new(1.0, 0.0), &q.value);
                error += q.error;
                nodes += q.evals;
            }
            DensityPiece::Tabulated {
                nodes: ts, weights, ..
            } => {
                let floor = node_floor(a, Some(b));
                for (&t, &w) in ts.iter().zip(weights) {
                    let k = difference_kernel(a, b, &v, t.max(floor))?;
                    value.axpy(C64::new(t.max(floor) * w, 0.0), &k);
                }
                nodes += ts.len();
            }
        }
    }
    Ok(CalcResult {
        value,
        error,
        nodes,
    })
}

pub fn apply_diff(
    f: &CbfSpec,
    a: &OperatorInstance,
    b: &OperatorInstance,
    tol: f64,
) -> Result<CalcResult> {
    apply_diff_matrix(f, &a.a, &b.a, tol)
}

/// Two sides of an inequality `lhs ≤ rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BoundReport {
    pub fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        BoundReport {
            name: name.into(),
            lhs,
            rhs,
            pass: holds(lhs, rhs),
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

fn holds(lhs: f64, rhs: f64) -> bool {
    lhs.is_finite() && lhs <= rhs + BOUND_SLACK * rhs.abs().max(1.0)
}

fn phi_neg(f: &CbfSpec, x: f64) -> Result<f64> {
    Ok(f.eval(C64::new(-x, 0.0))?.re)
}

fn slope(f: &CbfSpec) -> Result<f64> {
    f.derivative_at_zero_minus()
        .finite()
        .ok_or_else(|| Error::HypothesisViolated(format!("{} has infinite slope at 0", f.name)))
}

/// `‖φ(A) − φ(B)‖ ≤ −(M_A + M_B + M_A M_B) φ(−‖A − B‖)`.
pub fn check_difference_norm(
    f: &CbfSpec,
    a: &OperatorInstance,
    b: &OperatorInstance,
    tol: f64,
) -> Result<BoundReport> {
    let d = apply_diff(f, a, b, tol)?;
    let lhs = operator_norm(&d.value, a.norm)?;
    let (ma, mb) = (a.m_nonpositive, b.m_nonpositive);
    let dist = operator_norm(&(&a.a - &b.a), a.norm)?;
    let rhs = -(ma + mb + ma * mb) * phi_neg(f, dist)?;
    Ok(BoundReport::new("difference_norm", lhs, rhs))
}

/// `‖φ(A) − φ(B)‖₁ ≤ M_A M_B φ′(−0) ‖A − B‖₁` in the nuclear norm.
pub fn check_difference_nuclear(
    f: &CbfSpec,
    a: &OperatorInstance,
    b: &OperatorInstance,
    tol: f64,
) -> Result<BoundReport> {
    if a.norm != NormKind::L2 {
        return Err(Error::UnsupportedNorm);
    }
    let s = slope(f)?;
    let d = apply_diff(f, a, b, tol)?;
    let lhs = nuclear_norm(&d.value, NormKind::L2)?;
    let rhs = a.m_nonpositive * b.m_nonpositive * s * nuclear_norm(&(&a.a - &b.a), NormKind::L2)?;
    Ok(BoundReport::new("difference_nuclear", lhs, rhs))
}

/// Sample points for the commutation check.
fn commutation_grid() -> Vec<f64> {
    (0..20)
        .map(|i| 10f64.powf(-3.0 + 7.0 * i as f64 / 19.0))
        .collect()
}

/// Largest sampled `‖[A − B, R(t,B)]‖ / (‖A − B‖ ‖R(t,B)‖)`.
pub fn commutation_defect(a: &OperatorInstance, b: &OperatorInstance) -> Result<f64> {
    let v = &a.a - &b.a;
    let nv = operator_norm(&v, a.norm)?;
    if nv == 0.0 {
        return Ok(0.0);
    }
    let mut worst = 0.0f64;
    for t in commutation_grid() {
        let r = b.resolvent(C64::new(t, 0.0))?;
        let scale = nv * operator_norm(&r, a.norm)?;
        worst = worst.max(operator_norm(&v.commutator(&r), a.norm)? / scale);
    }
    Ok(worst)
}

/// Vector inequality `‖(φ(A) − φ(B))x‖ ≤ −(M_A + M_B + M_A M_B) φ(−‖(A − B)x‖)`
/// for a unit vector `x`, valid when `A − B` commutes with `R(t,B)`.
pub fn check_commuting_vector(
    f: &CbfSpec,
    a: &OperatorInstance,
    b: &OperatorInstance,
    x: &[C64],
    tol: f64,
) -> Result<BoundReport> {
    let defect = commutation_defect(a, b)?;
    if defect > 1e-10 {
        return Err(Error::NotCommuting(defect));
    }
    let x = unit(x, a.norm)?;
    let d = apply_diff(f, a, b, tol)?;
    let lhs = a.norm.vector_norm(&d.value.mat_vec(&x));
    let vx = a.norm.vector_norm(&(&a.a - &b.a).mat_vec(&x));
    let (ma, mb) = (a.m_nonpositive, b.m_nonpositive);
    let rhs = -(ma + mb + ma * mb) * phi_neg(f, vx)?;
    Ok(BoundReport::new("commuting_vector", lhs, rhs)
        .with_note("commutation checked at 20 sampled t only"))
}

fn unit(x: &[C64], norm: NormKind) -> Result<Vec<C64>> {
    let nx = norm.vector_norm(x);
    if nx == 0.0 {
        return Err(Error::Invalid("zero test vector".into()));
    }
    Ok(x.iter().map(|v| v / nx).collect())
}

/// Both single-operator vector inequalities:
/// `‖φ(A)x‖ ≤ −(2M_A + 1)φ(−‖Ax‖)` and `‖φ(A)x‖ ≤ (2M_A + 1)φ′(−0)‖Ax‖`.
pub fn check_vector_bounds(
    f: &CbfSpec,
    a: &OperatorInstance,
    x: &[C64],
    tol: f64,
) -> Result<(BoundReport, BoundReport)> {
    let x = unit(x, a.norm)?;
    let fa = apply(f, a, tol)?;
    let lhs = a.norm.vector_norm(&fa.value.mat_vec(&x));
    let ax = a.norm.vector_norm(&a.a.mat_vec(&x));
    let k = 2.0 * a.m_nonpositive + 1.0;
    let first = BoundReport::new("vector_value", lhs, -k * phi_neg(f, ax)?);
    let second = match f.derivative_at_zero_minus().finite() {
        Some(s) => BoundReport::new("vector_slope", lhs, k * s * ax),
        None => BoundReport {
            name: "vector_slope".into(),
            lhs,
            rhs: f64::INFINITY,
            pass: true,
            note: Some("infinite slope at 0: bound is vacuous".into()),
        },
    };
    Ok((first, second))
}

/// The two ideals available at desk scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ideal {
    Operator,
    Nuclear,
}

fn ideal_norm(m: &CMatrix, ideal: Ideal, norm: NormKind) -> Result<f64> {
    match ideal {
        Ideal::Operator => operator_norm(m, norm),
        Ideal::Nuclear => nuclear_norm(m, norm),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport {
    pub lhs: f64,
    /// `‖(φ(A) − φ(UAU⁻¹))U‖`, equal to `lhs` up to quadrature error.
    pub lhs_similarity: f64,
    /// `M_A² φ′(−0) ‖[A,U]‖`.
    pub rhs_stated: f64,
    /// `M_A M_{UAU⁻¹} φ′(−0) ‖U‖‖U⁻¹‖ ‖[A,U]‖`, valid for any invertible `U`.
    pub rhs_general: f64,
    /// `U` is an isometry, so `rhs_stated` applies.
    pub isometric: bool,
    pub pass: bool,
}

/// Commutator estimate for `[φ(A), U]`.
pub fn check_commutator(
    f: &CbfSpec,
    a: &OperatorInstance,
    u: &CMatrix,
    ideal: Ideal,
    tol: f64,
) -> Result<CommutatorReport> {
    let s = slope(f)?;
    let u_inv = Lu::new(u).inverse()?;
    let conj = u.matmul(&a.a).matmul(&u_inv);
    let conj_op = OperatorInstance::new(conj, a.norm)?;
    let fa = apply(f, a, tol)?.value;
    let fc = apply(f, &conj_op, tol)?.value;
    let lhs = ideal_norm(&fa.commutator(u), ideal, a.norm)?;
    let lhs_similarity = ideal_norm(&(&fa - &fc).matmul(u), ideal, a.norm)?;
    let comm = ideal_norm(&a.a.commutator(u), ideal, a.norm)?;
    let kappa = operator_norm(u, a.norm)? * operator_norm(&u_inv, a.norm)?;
    let ma = a.m_nonpositive;
    let mc = conj_op.m_nonpositive;
    let rhs_stated = ma * ma * s * comm;
    let rhs_general = ma * mc * s * kappa * comm;
    let isometric = (operator_norm(u, a.norm)? - 1.0).abs() < 1e-12
        && (operator_norm(&u_inv, a.norm)? - 1.0).abs() < 1e-12;
    let pass = holds(lhs, rhs_general) && (!isometric || holds(lhs, rhs_stated));
    Ok(CommutatorReport {
        lhs,
        lhs_similarity,
        rhs_stated,
        rhs_general,
        isometric,
        pass,
    })
}
