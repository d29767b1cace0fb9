//! Trace formulas: the contour formula for negative pairs, its ε-regularized
//! form for nonpositive pairs, and the affine limit `λ²η(λ) → tr(A − B)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::apply_diff;
use crate::cbf::{CbfSpec, SlopeAtZero};
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, CMatrix, Lu, NormKind, C64, ONE, ZERO};
use crate::operator::{
    build_sector_mode, contour, Mode, OperatorInstance, SectorGeometry, Segment,
};
use crate::quad;
use crate::shift::{least_squares_slope, ContourXi, ShiftEvaluator};

/// Tolerance used for the left-hand side resolvent integrals.
const LHS_TOL: f64 = 1e-12;

/// Contour quadrature tolerance relative to the requested tolerance.
const RHS_FRACTION: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LkReport {
    pub function: String,
    pub lhs: C64,
    pub rhs: C64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub r_trunc: f64,
    /// Change of the right-hand side when the ray split moves to `2R`.
    pub tail_est: f64,
    /// Part of the right-hand side contributed beyond `R`.
    pub tail: C64,
    pub closure_mismatch: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Refuses functions outside the formula's hypotheses.
pub fn check_hypotheses(f: &CbfSpec) -> Result<()> {
    if let SlopeAtZero::Infinite = f.derivative_at_zero_minus() {
        return Err(Error::HypothesisViolated(format!(
            "{}: φ′(−0) is infinite",
            f.name
        )));
    }
    match f.check_condition_star() {
        Ok(true) => {}
        Ok(false) => {
            return Err(Error::HypothesisViolated(format!(
                "{}: condition (∗) fails, ∫ |φ(−x)|/(1+x²) dx diverges",
                f.name
            )))
        }
        Err(Error::UnknownTail) => {
            return Err(Error::HypothesisViolated(format!(
                "{}: condition (∗) undecidable, tail exponent unknown",
                f.name
            )))
        }
        Err(e) => return Err(e),
    }
    if f.measure().is_err() {
        return Err(Error::HypothesisViolated(format!(
            "{}: no representing measure",
            f.name
        )));
    }
    Ok(())
}

/// `tr(φ(A) − φ(B))` through the resolvent integral.
pub fn lhs_trace(f: &CbfSpec, a: &OperatorInstance, b: &OperatorInstance) -> Result<C64> {
    Ok(apply_diff(f, a, b, LHS_TOL)?.value.trace())
}

/// Builds the contour representation of ξ for a negative pair.
pub fn negative_contour(ev: &ShiftEvaluator) -> Result<ContourXi> {
    if ev.geom.mode != Mode::Negative || !(ev.geom.delta > 0.0) {
        return Err(Error::HypothesisViolated(
            "pair is not negative on a validated region with δ > 0".into(),
        ));
    }
    ev.contour_xi(&contour(&ev.geom))
}

/// `(1/2πi)∮ ξ φ′ dz` for the pure part of `f`, split at `R` and at `2R`.
fn contour_rhs(f: &CbfSpec, cx: &ContourXi, tol: f64) -> Result<(C64, C64, f64)> {
    let pure = f.without_affine_part();
    let w = |z: C64| pure.eval_derivative(z);
    let feats = f.feature_points();
    let q1 = cx.integrate_split(&w, &feats, tol * RHS_FRACTION, Some(1.0))?;
    let q2 = cx.integrate_split(&w, &feats, tol * RHS_FRACTION, Some(2.0))?;
    Ok((q1.value, q1.tail, (q1.value - q2.value).norm()))
}

/// Contour formula for a negative pair with a prebuilt contour ξ.
pub fn lk_negative_with(
    f: &CbfSpec,
    ev: &ShiftEvaluator,
    cx: &ContourXi,
    tol: f64,
) -> Result<LkReport> {
    check_hypotheses(f)?;
    if !(tol > 0.0) {
        return Err(Error::Invalid("tolerance must be positive".into()));
    }
    let lhs = lhs_trace(f, &ev.a, &ev.b)?;
    let (mut rhs, tail, tail_est) = contour_rhs(f, cx, tol)?;
    // The slope b contributes b·tr(A − B) to both sides.
    rhs += ev.trace_diff * f.b;
    let abs_err = (lhs - rhs).norm();
    let rel_err = abs_err / lhs.norm().max(f64::MIN_POSITIVE);
    let pass = abs_err <= tol.max(tol * lhs.norm()) && tail_est <= tol / 5.0;
    Ok(LkReport {
        function: f.name.clone(),
        lhs,
        rhs,
        abs_err,
        rel_err,
        r_trunc: ev.geom.r_trunc,
        tail_est,
        tail,
        closure_mismatch: cx.closure_mismatch,
        tol,
        pass,
    })
}

pub fn lk_negative(f: &CbfSpec, ev: &ShiftEvaluator, tol: f64) -> Result<LkReport> {
    check_hypotheses(f)?;
    let cx = negative_contour(ev)?;
    lk_negative_with(f, ev, &cx, tol)
}

/// Right-hand side after re-validating on `S_{θ/2} ∪ B_{δ/2}(0)`.
pub fn deformed_rhs(f: &CbfSpec, ev: &ShiftEvaluator, tol: f64) -> Result<C64> {
    let g = ev
        .geom
        .rescaled(&ev.a, &ev.b, 0.5 * ev.geom.theta, 0.5 * ev.geom.delta)?;
    let ev2 = ShiftEvaluator::new(ev.a.clone(), ev.b.clone(), g)?;
    let cx = negative_contour(&ev2)?;
    let (rhs, _, _) = contour_rhs(f, &cx, tol)?;
    Ok(rhs + ev.trace_diff * f.b)
}

/// One row of the truncated-contour table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub r: f64,
    pub value: C64,
    /// `(1/2π)∫_{Γ ∩ |z| ≤ R} |ξ φ′| |dz|`.
    pub abs_value: f64,
    /// `|I(R) − I(R/10)|`.
    pub diff: Option<f64>,
    /// `diff(R) / diff(R/10)`.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub function: String,
    pub lhs: C64,
    pub rows: Vec<TruncationRow>,
    /// Every successive-difference ratio is at least 0.9.
    pub divergent: bool,
    pub condition_star: bool,
    pub min_ratio: f64,
    /// Limit of the fit `I∞ + c₁/log R + c₂/log² R` to the signed values.
    pub extrapolated: C64,
    /// Successive-difference ratios of the absolute integrals.
    pub abs_ratios: Vec<f64>,
}

/// `(1/2π)∫ |ξ w| |dz|` over the truncated contour.
fn truncated_abs(cx: &ContourXi, w: &dyn Fn(C64) -> Result<C64>, tol: f64) -> Result<f64> {
    let mut total = 0.0;
    for (i, seg) in cx.path.segments.iter().enumerate() {
        let (a, b) = seg.range();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let f = |s: f64| -> Result<f64> {
            Ok((cx.xi(i, s) * w(seg.point(s))?).norm() * seg.tangent(s).norm())
        };
        let breaks: Vec<f64> = match seg {
            Segment::Ray { .. } => ray_grid(lo, hi),
            Segment::Arc { .. } => (1..8).map(|k| lo + (hi - lo) * k as f64 / 8.0).collect(),
        };
        total += quad::integrate(&f, lo, hi, &breaks, tol)?.value;
    }
    Ok(total / (2.0 * std::f64::consts::PI))
}

fn ray_grid(lo: f64, hi: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut x = lo.max(1e-3) * 2.0;
    while x < hi {
        v.push(x);
        x *= 2.0;
    }
    v
}

/// Truncated contour integrals `(1/2πi)∫_{Γ ∩ |z| ≤ R} ξ φ′ dz` for a
/// function the formula does not cover. `lhs` comes from pointwise values at
/// the diagonal, so both matrices must be upper triangular.
pub fn lk_negative_expect_fail(
    f: &CbfSpec,
    ev: &ShiftEvaluator,
    radii: &[f64],
    tol: f64,
) -> Result<DivergenceReport> {
    let (a, b) = (&ev.a.a, &ev.b.a);
    if !a.is_upper_triangular() || !b.is_upper_triangular() {
        return Err(Error::Invalid(
            "pointwise left-hand side needs triangular matrices".into(),
        ));
    }
    let mut lhs = ZERO;
    for (x, y) in a.diag().iter().zip(b.diag()) {
        lhs += f.eval(*x)? - f.eval(y)?;
    }
    let w = |z: C64| f.eval_derivative(z);
    let mut rows: Vec<TruncationRow> = Vec::new();
    for &r in radii {
        let mut g = ev.geom;
        g.r_trunc = r;
        let cx = ev.contour_xi(&contour(&g))?;
        let value = cx
            .integrate_split(&w, &f.feature_points(), tol, None)?
            .value;
        let abs_value = truncated_abs(&cx, &w, tol)?;
        let diff = rows.last().map(|p| (value - p.value).norm());
        let ratio = match (diff, rows.last().and_then(|p| p.diff)) {
            (Some(d), Some(p)) if p > 0.0 => Some(d / p),
            _ => None,
        };
        rows.push(TruncationRow {
            r,
            value,
            abs_value,
            diff,
            ratio,
        });
    }
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let abs_ratios = rows
        .windows(3)
        .map(|w| (w[2].abs_value - w[1].abs_value) / (w[1].abs_value - w[0].abs_value))
        .collect();
    Ok(DivergenceReport {
        function: f.name.clone(),
        lhs,
        divergent: !ratios.is_empty() && min_ratio >= 0.9,
        condition_star: f.check_condition_star().unwrap_or(false),
        min_ratio,
        extrapolated: log_fit(&rows)?,
        abs_ratios,
        rows,
    })
}

/// Least squares in the basis `1, 1/log R, 1/log² R`.
fn log_fit(rows: &[TruncationRow]) -> Result<C64> {
    let pts: Vec<(f64, C64)> = rows.iter().map(|r| (1.0 / r.r.ln(), r.value)).collect();
    fit_constant(&pts, |x| [1.0, x, x * x])
}

/// Constant term of a three-function least-squares fit.
fn fit_constant(pts: &[(f64, C64)], basis: impl Fn(f64) -> [f64; 3]) -> Result<C64> {
    if pts.len() < 3 {
        return Ok(pts.last().map(|p| p.1).unwrap_or(ZERO));
    }
    let mut g = CMatrix::zeros(3);
    let mut rhs = vec![ZERO; 3];
    for &(x, y) in pts {
        let phi = basis(x);
        for i in 0..3 {
            for j in 0..3 {
                g[(i, j)] += C64::new(phi[i] * phi[j], 0.0);
            }
            rhs[i] += y * phi[i];
        }
    }
    Ok(Lu::new(&g).solve_vec(&rhs)?[0])
}

pub const DEFAULT_EPS: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsRow {
    pub eps: f64,
    pub value: C64,
    pub err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonpositiveReport {
    pub function: String,
    pub lhs: C64,
    pub rows: Vec<EpsRow>,
    /// Limit of the fit `L + aε + bε log(1/ε)`.
    pub extrapolated: C64,
    pub monotone: bool,
    pub final_err: f64,
    pub tol: f64,
    pub pass: bool,
}

/// `I(ε) = (1/2πi)∫_{∂S_θ} ξ_{A−ε,B−ε}(z) φ′(z) dz`, which equals the
/// integral of `ξ(z+ε)φ′(z)` since `ε + L_z = L_{z+ε}`.
pub fn shifted_integral(
    f: &CbfSpec,
    a: &OperatorInstance,
    b: &OperatorInstance,
    geom: &SectorGeometry,
    eps: f64,
    tol: f64,
) -> Result<C64> {
    let shift = |m: &CMatrix| {
        let mut s = m.clone();
        s.axpy(C64::new(-eps, 0.0), &CMatrix::identity(m.n()));
        s
    };
    let ae = OperatorInstance::new(shift(&a.a), a.norm)?;
    let be = OperatorInstance::new(shift(&b.a), b.norm)?;
    let mut g = *geom;
    g.delta = 0.0;
    let ev = ShiftEvaluator::new(ae, be, g)?;
    let cx = ev.contour_xi(&contour(&g))?;
    let pure = f.without_affine_part();
    let w = |z: C64| pure.eval_derivative(z);
    Ok(cx.integrate(&w, &f.feature_points(), tol)?.value + ev.trace_diff * f.b)
}

/// ε-regularized formula for nonpositive pairs; passes when the error
/// decreases along the sequence and ends below `tol`.
pub fn lk_nonpositive(
    f: &CbfSpec,
    a: &OperatorInstance,
    b: &OperatorInstance,
    tol: f64,
    eps: &[f64],
) -> Result<NonpositiveReport> {
    check_hypotheses(f)?;
    if eps.windows(2).any(|w| w[1] >= w[0]) || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Invalid(
            "ε sequence must be positive and decreasing".into(),
        ));
    }
    let geom = build_sector_mode(a, b, Mode::Nonpositive)?;
    let lhs = lhs_trace(f, a, b)?;
    let values: Vec<Result<C64>> = eps
        .par_iter()
        .map(|&e| shifted_integral(f, a, b, &geom, e, tol * RHS_FRACTION))
        .collect();
    let mut rows = Vec::with_capacity(eps.len());
    for (&e, v) in eps.iter().zip(values) {
        let value = v?;
        rows.push(EpsRow {
            eps: e,
            value,
            err: (value - lhs).norm(),
        });
    }
    let floor = 1e-9 * lhs.norm().max(1.0);
    let monotone = rows
        .windows(2)
        .all(|w| w[1].err < w[0].err || w[1].err <= floor);
    let final_err = rows.last().map(|r| r.err).unwrap_or(f64::INFINITY);
    let extrapolated = fit_limit(&rows)?;
    Ok(NonpositiveReport {
        function: f.name.clone(),
        lhs,
        extrapolated,
        monotone,
        final_err,
        tol,
        pass: monotone && final_err <= tol,
        rows,
    })
}

/// Least-squares `L + aε + bε log(1/ε)`.
fn fit_limit(rows: &[EpsRow]) -> Result<C64> {
    let pts: Vec<(f64, C64)> = rows.iter().map(|r| (r.eps, r.value)).collect();
    fit_constant(&pts, |e| [1.0, e, e * (1.0 / e).ln()])
}

/// Behaviour of `ξ` at the vertex for `ε = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexReport {
    pub radii: Vec<f64>,
    pub xi_abs: Vec<f64>,
    /// Fitted exponent `p` in `|ξ(r e^{iθ})| ~ r^{−p}`.
    pub exponent: f64,
    /// `|ξ(r)| · r` at the smallest radius.
    pub weighted: f64,
    /// `∫_0 |ξ| dr` converges when `p < 1`.
    pub integrable: bool,
}

/// Probes `ξ` on the upper ray near `0` for an unshifted nonpositive pair.
pub fn vertex_check(ev: &ShiftEvaluator, tol: f64) -> Result<VertexReport> {
    let radii: Vec<f64> = (2..=8).map(|k| 10f64.powi(-k)).collect();
    let dir = C64::from_polar(1.0, ev.geom.theta);
    let mut xi_abs = Vec::with_capacity(radii.len());
    for &r in &radii {
        xi_abs.push(ev.xi_sector(dir * r, tol)?.norm());
    }
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = xi_abs
        .iter()
        .map(|x| x.max(f64::MIN_POSITIVE).ln())
        .collect();
    let exponent = -least_squares_slope(&lx, &ly);
    let last = radii.len() - 1;
    Ok(VertexReport {
        weighted: xi_abs[last] * radii[last],
        integrable: exponent < 1.0,
        exponent,
        radii,
        xi_abs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineRow {
    pub lambda: f64,
    /// `λ² η(λ)`.
    pub direct: C64,
    /// `λ² (1/2πi)∮ ξ(z)/(λ − z)² dz`.
    pub contour: C64,
    pub err: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineReport {
    pub trace: C64,
    pub rows: Vec<AffineRow>,
    /// `err(10λ)/err(λ)` for consecutive decades.
    pub ratios: Vec<f64>,
    pub routes_agree: bool,
    pub within_bound: bool,
    pub rate_ok: bool,
    /// `‖A − B‖₁(M′_A‖A‖ + M′_B‖B‖ + M′_A M′_B ‖A‖‖B‖)`.
    pub constant: f64,
    pub pass: bool,
}

/// Errors below this are treated as exact when checking the rate.
const RATE_FLOOR: f64 = 1e-14;

pub fn affine_limit(ev: &ShiftEvaluator, lambdas: &[f64], tol: f64) -> Result<AffineReport> {
    let cx = negative_contour(ev)?;
    let g = &ev.geom;
    let na = operator_norm(&ev.a.a, ev.a.norm)?;
    let nb = operator_norm(&ev.b.a, ev.b.norm)?;
    let nuclear = ev.c_bound / (g.m_prime_a * g.m_prime_b);
    let constant =
        nuclear * (g.m_prime_a * na + g.m_prime_b * nb + g.m_prime_a * g.m_prime_b * na * nb);
    let rows: Vec<Result<AffineRow>> = lambdas
        .par_iter()
        .map(|&lam| {
            let l2 = lam * lam;
            let direct = ev.eta_uncached(C64::new(lam, 0.0))? * l2;
            let w = |z: C64| Ok(ONE / ((z - lam) * (z - lam)));
            let contour = cx.integrate(&w, &[lam], tol * 1e-2 / l2)?.value * l2;
            let err = (direct - ev.trace_diff).norm();
            Ok(AffineRow {
                lambda: lam,
                direct,
                contour,
                err,
                bound: 5.0 * constant / lam,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let routes_agree = rows.iter().all(|r| (r.direct - r.contour).norm() <= tol);
    let within_bound = rows.iter().all(|r| r.err <= r.bound * (1.0 + 1e-9));
    let mut ratios = Vec::new();
    let mut rate_ok = true;
    for w in rows.windows(2) {
        if w[0].err < RATE_FLOOR || w[1].err < RATE_FLOOR {
            continue;
        }
        let q = w[1].err / w[0].err;
        ratios.push(q);
        let decade = (w[1].lambda / w[0].lambda - 10.0).abs() < 1e-9;
        if decade && !(0.05..=0.2).contains(&q) {
            rate_ok = false;
        }
    }
    Ok(AffineReport {
        trace: ev.trace_diff,
        pass: routes_agree && within_bound && rate_ok,
        rows,
        ratios,
        routes_agree,
        within_bound,
        rate_ok,
        constant,
    })
}

/// Pair built from bare matrices in the given norm, in negative mode.
pub fn negative_pair(a: CMatrix, b: CMatrix, norm: NormKind) -> Result<ShiftEvaluator> {
    let a = OperatorInstance::new(a, norm)?;
    let b = OperatorInstance::new(b, norm)?;
    let g = build_sector_mode(&a, &b, Mode::Negative)?;
    ShiftEvaluator::new(a, b, g)
}
