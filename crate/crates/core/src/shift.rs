//! Resolvent-trace function `η(z) = tr(R(z,A) − R(z,B))`, spectral shift
//! function `ξ = −∫_{L_z} η`, perturbation determinant `Δ = exp ξ`, and the
//! rank-one product formula.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{nuclear_norm, operator_norm, CMatrix, Lu, NormKind, C64, ONE, ZERO};
use crate::operator::{ContourPath, OperatorInstance, SectorGeometry, Segment};
use crate::quad::{self, ChebAntiderivative};

/// Default absolute tolerance for ξ along rays.
pub const XI_TOL: f64 = 1e-11;

/// Tolerance of Chebyshev panels used on contours.
pub const CHEB_TOL: f64 = 1e-14;

/// `η`, `ξ` and `Δ` for a pair `(A, B)` on a validated region.
#[derive(Debug)]
pub struct ShiftEvaluator {
    pub a: OperatorInstance,
    pub b: OperatorInstance,
    pub geom: SectorGeometry,
    v: CMatrix,
    trivial: bool,
    pub trace_diff: C64,
    /// `M′_A M′_B ‖A − B‖₁`, with the nuclear norm replaced by a rank-one
    /// bound outside the Euclidean setting.
    pub c_bound: f64,
    /// Scale beyond which rays are analytic in `1/s`.
    scale: f64,
    cache: RwLock<HashMap<(u64, u64), C64>>,
}

impl ShiftEvaluator {
    pub fn new(a: OperatorInstance, b: OperatorInstance, geom: SectorGeometry) -> Result<Self> {
        if a.n() != b.n() {
            return Err(Error::Invalid("operators differ in dimension".into()));
        }
        let v = &a.a - &b.a;
        let trivial = v.max_abs() == 0.0;
        let nuclear = match a.norm {
            NormKind::L2 => nuclear_norm(&v, NormKind::L2)?,
            k => RankOneDecomposition::from_difference(&v)?.nuclear_bound(k),
        };
        let scale = 1f64.max(a.op_norm()?).max(b.op_norm()?);
        Ok(ShiftEvaluator {
            trace_diff: v.trace(),
            c_bound: geom.m_prime_a * geom.m_prime_b * nuclear,
            a,
            b,
            geom,
            v,
            trivial,
            scale,
            cache: RwLock::new(HashMap::new()),
        })
    }

    /// Classifies both matrices and builds the region automatically.
    pub fn from_matrices(a: CMatrix, b: CMatrix, norm: NormKind) -> Result<Self> {
        let a = OperatorInstance::new(a, norm)?;
        let b = OperatorInstance::new(b, norm)?;
        let geom = crate::operator::build_sector(&a, &b)?;
        Self::new(a, b, geom)
    }

    pub fn difference(&self) -> &CMatrix {
        &self.v
    }

    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `tr(R(z,B) R(z,A) (A − B))` without caching.
    pub fn eta_uncached(&self, z: C64) -> Result<C64> {
        if self.trivial {
            return Ok(ZERO);
        }
        let la = Lu::new(&self.a.a.shifted_from(z));
        let x = la.solve(&self.v).map_err(|_| Error::SpectrumHit(z))?;
        let lb = Lu::new(&self.b.a.shifted_from(z));
        let y = lb.solve(&x).map_err(|_| Error::SpectrumHit(z))?;
        Ok(y.trace())
    }

    pub fn eta(&self, z: C64) -> Result<C64> {
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(v) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = self.eta_uncached(z)?;
        self.cache
            .write()
            .expect("cache lock")
            .entry(key)
            .or_insert(v);
        Ok(v)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    /// `−∫_0^∞ η(z + s e) e ds` split at `s1`, with the tail mapped to `(0, 1]`.
    fn ray_split(&self, z: C64, e: C64, s1: f64, tol: f64) -> Result<C64> {
        let g = |s: f64| -> Result<C64> { Ok(self.eta(z + e * s)? * e) };
        let breaks: Vec<f64> = (1..14).map(|k| s1 * 0.5f64.powi(k)).collect();
        let head = quad::integrate(&g, 0.0, s1, &breaks, 0.5 * tol)?.value;
        let tail = quad::integrate_to_infinity(&g, s1, 0.5 * tol)?.value;
        Ok(-(head + tail))
    }

    /// ξ along the ray `z + s e`, checked by moving the split point.
    pub fn xi_ray(&self, z: C64, e: C64, tol: f64) -> Result<C64> {
        if self.trivial {
            return Ok(ZERO);
        }
        let s1 = z.norm() + 4.0 * self.scale;
        let first = self.ray_split(z, e, s1, 0.05 * tol)?;
        let second = self.ray_split(z, e, 2.0 * s1, 0.05 * tol)?;
        let gap = (first - second).norm();
        if gap > 0.1 * tol {
            return Err(Error::Tail(gap));
        }
        Ok(second)
    }

    /// `ξ(λ) = −∫_λ^∞ η(t) dt` for real `λ > 0`.
    pub fn xi_real(&self, lambda: f64, tol: f64) -> Result<C64> {
        if !(lambda > 0.0) {
            return Err(Error::OutsideDomain(C64::new(lambda, 0.0)));
        }
        self.xi_ray(C64::new(lambda, 0.0), ONE, tol)
    }

    /// Whether `z` lies in the closed sector `|arg z| ≤ θ`.
    pub fn in_sector(&self, z: C64) -> bool {
        z == ZERO || z.arg().abs() <= self.geom.theta * (1.0 + 1e-12)
    }

    /// ξ at any point of the closed region, along a ray of angle `±θ`; disc
    /// points first travel straight to `δ/2`.
    pub fn xi_sector(&self, z: C64, tol: f64) -> Result<C64> {
        if self.trivial {
            return Ok(ZERO);
        }
        if self.in_sector(z) {
            let ang = if z.im >= 0.0 {
                self.geom.theta
            } else {
                -self.geom.theta
            };
            return self.xi_ray(z, C64::from_polar(1.0, ang), tol);
        }
        if z.norm() <= self.geom.delta * (1.0 + 1e-12) {
            let p0 = C64::new(0.5 * self.geom.delta, 0.0);
            let base = self.xi_ray(p0, ONE, tol)?;
            return self.xi_continue(p0, base, z, tol);
        }
        Err(Error::OutsideDomain(z))
    }

    /// Continues ξ from `(from, xi_from)` to `to` along a straight segment.
    pub fn xi_continue(&self, from: C64, xi_from: C64, to: C64, tol: f64) -> Result<C64> {
        if self.trivial {
            return Ok(ZERO);
        }
        let d = to - from;
        let g = |s: f64| -> Result<C64> { Ok(self.eta(from + d * s)? * d) };
        let q = quad::integrate(&g, 0.0, 1.0, &[0.5], tol)?;
        Ok(xi_from + q.value)
    }

    /// Continues ξ along a polyline starting at an in-domain anchor.
    pub fn xi_path(&self, path: &[C64], tol: f64) -> Result<Vec<C64>> {
        let mut out = Vec::with_capacity(path.len());
        let Some(&first) = path.first() else {
            return Ok(out);
        };
        let mut xi = self.xi_sector(first, tol)?;
        out.push(xi);
        for w in path.windows(2) {
            xi = self.xi_continue(w[0], xi, w[1], tol)?;
            out.push(xi);
        }
        Ok(out)
    }

    /// `Δ_{B/A}(z) = exp ξ(z)`.
    pub fn delta(&self, z: C64, tol: f64) -> Result<DeltaValue> {
        let xi = self.xi_sector(z, tol)?;
        Ok(DeltaValue::from_xi(xi))
    }

    /// Contour representation of ξ with shared antiderivatives.
    pub fn contour_xi(&self, path: &ContourPath) -> Result<ContourXi> {
        ContourXi::build(self, path)
    }
}

/// A determinant value with its logarithm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaValue {
    pub delta: C64,
    pub xi: C64,
    /// Where `|ξ| < log 2`, whether the principal `log Δ` reproduces `ξ`.
    pub log_consistent: Option<bool>,
}

impl DeltaValue {
    pub fn from_xi(xi: C64) -> Self {
        let delta = xi.exp();
        let log_consistent = (xi.norm() < std::f64::consts::LN_2)
            .then(|| (delta.ln() - xi).norm() <= 1e-12 * (1.0 + xi.norm()));
        DeltaValue {
            delta,
            xi,
            log_consistent,
        }
    }
}

/// ξ on one segment of a contour.
#[derive(Clone, Debug)]
enum SegmentXi {
    /// ξ(r e) = −(∫_r^R g + ∫_R^∞ g); the tail is stored in `u = R/s`.
    Ray {
        r_trunc: f64,
        head: ChebAntiderivative,
        tail: ChebAntiderivative,
    },
    /// ξ(δ e^{iα}) = ξ₀ + ∫_{α₀}^α η(z) z′.
    Arc {
        xi0: C64,
        anti: ChebAntiderivative,
    },
    Zero,
}

/// ξ along every segment of a contour, built once from cumulative Chebyshev
/// antiderivatives of η.
#[derive(Clone, Debug)]
pub struct ContourXi {
    pub path: ContourPath,
    parts: Vec<SegmentXi>,
    /// `|ξ_arc(end) − ξ_lower(δ)|`, or the vertex mismatch when `δ = 0`.
    pub closure_mismatch: f64,
    pub evals: usize,
}

fn ray_breaks(r0: f64, r1: f64, first: f64) -> Vec<f64> {
    let mut b = vec![r0];
    let mut x = if r0 > 0.0 { 2.0 * r0 } else { first };
    while x < r1 {
        b.push(x);
        x *= 2.0;
    }
    b.push(r1);
    b
}

impl ContourXi {
    pub fn build(ev: &ShiftEvaluator, path: &ContourPath) -> Result<ContourXi> {
        let mut parts = Vec::new();
        let mut evals = 0;
        if ev.trivial {
            return Ok(ContourXi {
                path: path.clone(),
                parts: path.segments.iter().map(|_| SegmentXi::Zero).collect(),
                closure_mismatch: 0.0,
                evals,
            });
        }
        let mut last_xi: Option<C64> = None;
        let mut gaps = Vec::new();
        for seg in &path.segments {
            match *seg {
                Segment::Ray { angle, from, to } => {
                    let (r0, r1) = if from <= to { (from, to) } else { (to, from) };
                    let dir = C64::from_polar(1.0, angle);
                    let g = |s: f64| -> Result<C64> { Ok(ev.eta_uncached(dir * s)? * dir) };
                    // First panel near a vertex stays well inside the distance
                    // from the origin to the spectra.
                    let first = if r0 > 0.0 { r0 } else { vertex_panel(ev) };
                    let head = ChebAntiderivative::build(&g, &ray_breaks(r0, r1, first), CHEB_TOL)?;
                    let h = |u: f64| -> Result<C64> {
                        if u == 0.0 {
                            return Ok(ev.trace_diff * dir / (dir * dir) / r1);
                        }
                        let s = r1 / u;
                        Ok(g(s)? * (r1 / (u * u)))
                    };
                    let tail = ChebAntiderivative::build(&h, &[0.0, 0.25, 0.5, 1.0], CHEB_TOL)?;
                    evals += head.evals + tail.evals;
                    let part = SegmentXi::Ray {
                        r_trunc: r1,
                        head,
                        tail,
                    };
                    if let Some(prev) = last_xi {
                        // Independent anchor at ∞: record the closure gap.
                        gaps.push((eval_part(&part, seg.range().0) - prev).norm());
                    }
                    last_xi = Some(eval_part(&part, seg.range().1));
                    parts.push(part);
                }
                Segment::Arc { radius, from, to } => {
                    let xi0 =
                        last_xi.ok_or_else(|| Error::Invalid("arc must follow a ray".into()))?;
                    let g = |a: f64| -> Result<C64> {
                        let z = C64::from_polar(radius, a);
                        Ok(ev.eta_uncached(z)? * C64::new(0.0, 1.0) * z)
                    };
                    let n = 8;
                    let breaks: Vec<f64> = (0..=n)
                        .map(|k| from + (to - from) * k as f64 / n as f64)
                        .collect();
                    let anti = ChebAntiderivative::build(&g, &breaks, CHEB_TOL)?;
                    evals += anti.evals;
                    let part = SegmentXi::Arc { xi0, anti };
                    last_xi = Some(eval_part(&part, to));
                    parts.push(part);
                }
            }
        }
        let closure_mismatch = gaps.into_iter().fold(0.0, f64::max);
        Ok(ContourXi {
            path: path.clone(),
            parts,
            closure_mismatch,
            evals,
        })
    }

    /// ξ at parameter `s` of segment `i`; rays accept any `s` up to ∞.
    pub fn xi(&self, i: usize, s: f64) -> C64 {
        eval_part(&self.parts[i], s)
    }

    /// `(1/2πi)∮ ξ(z) w(z) dz` over the contour, rays continued to ∞.
    pub fn integrate(
        &self,
        w: &dyn Fn(C64) -> Result<C64>,
        features: &[f64],
        tol: f64,
    ) -> Result<ContourIntegral> {
        self.integrate_split(w, features, tol, Some(1.0))
    }

    /// As `integrate`, with the rays split at `factor · R_trunc` and the rest
    /// mapped to `(0, 1]`; `None` drops everything beyond `R_trunc`.
    pub fn integrate_split(
        &self,
        w: &dyn Fn(C64) -> Result<C64>,
        features: &[f64],
        tol: f64,
        factor: Option<f64>,
    ) -> Result<ContourIntegral> {
        let mut total = ZERO;
        let mut tail_total = ZERO;
        let mut error = 0.0;
        let nseg = self.path.segments.len();
        let local_tol = tol / (2.0 * nseg as f64);
        for (i, seg) in self.path.segments.iter().enumerate() {
            let (a, b) = seg.range();
            match seg {
                Segment::Ray { angle, .. } => {
                    let dir = C64::from_polar(1.0, *angle);
                    let (r0, r1) = if a <= b { (a, b) } else { (b, a) };
                    let r_split = r1 * factor.unwrap_or(1.0);
                    let f = |s: f64| -> Result<C64> { Ok(self.xi(i, s) * w(dir * s)? * dir) };
                    let mut breaks = match &self.parts[i] {
                        SegmentXi::Ray { head, .. } => head.breakpoints(),
                        _ => ray_breaks(r0, r1, r0.max(1e-3)),
                    };
                    if r_split > r1 {
                        breaks.push(r1);
                        breaks.push(0.5 * (r1 + r_split));
                    }
                    let mut tail_breaks = vec![0.25, 0.5];
                    for &t in features {
                        // Closest approach of the ray to a real feature point.
                        let c = t * angle.cos();
                        for x in [0.5 * c, c, 1.5 * c] {
                            if x > r0 && x < r_split {
                                breaks.push(x);
                            } else if x >= r_split {
                                tail_breaks.push(r_split / x);
                            }
                        }
                    }
                    breaks.retain(|&x| x > r0 && x < r_split);
                    let sign = if a <= b { 1.0 } else { -1.0 };
                    let head = quad::integrate(&f, r0, r_split, &breaks, local_tol)?;
                    total += head.value * sign;
                    error += head.error;
                    if factor.is_some() {
                        let ft = |u: f64| -> Result<C64> {
                            if u == 0.0 {
                                return Ok(ZERO);
                            }
                            let s = r_split / u;
                            Ok(f(s)? * (r_split / (u * u)))
                        };
                        let tail = quad::integrate(&ft, 0.0, 1.0, &tail_breaks, local_tol)?;
                        total += tail.value * sign;
                        tail_total += tail.value * sign;
                        error += tail.error;
                    }
                }
                Segment::Arc { radius, .. } => {
                    let r = *radius;
                    let f = |al: f64| -> Result<C64> {
                        let z = C64::from_polar(r, al);
                        Ok(self.xi(i, al) * w(z)? * C64::new(0.0, 1.0) * z)
                    };
                    let n = 8;
                    let breaks: Vec<f64> =
                        (1..n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
                    let q = quad::integrate(&f, a, b, &breaks, local_tol)?;
                    total += q.value;
                    error += q.error;
                }
            }
        }
        let two_pi_i = C64::new(0.0, 2.0 * std::f64::consts::PI);
        Ok(ContourIntegral {
            value: total / two_pi_i,
            tail: tail_total / two_pi_i,
            error: error / (2.0 * std::f64::consts::PI),
        })
    }
}

/// First ray panel when the ray starts at the vertex.
fn vertex_panel(ev: &ShiftEvaluator) -> f64 {
    // Distance from 0 to the spectra is at least 1/‖R(0,·)‖ when 0 is resolvent.
    let inv = |op: &OperatorInstance| -> f64 {
        op.resolvent(ZERO)
            .and_then(|r| operator_norm(&r, op.norm))
            .map(|n| 1.0 / n)
            .unwrap_or(1e-6)
    };
    (0.25 * inv(&ev.a).min(inv(&ev.b))).clamp(1e-8, 1.0)
}

fn eval_part(p: &SegmentXi, s: f64) -> C64 {
    match p {
        SegmentXi::Ray {
            r_trunc,
            head,
            tail,
            ..
        } => {
            if s <= *r_trunc {
                -(head.to_end(s.max(head.start())) + tail.total())
            } else {
                -tail.from_start(r_trunc / s)
            }
        }
        SegmentXi::Arc { xi0, anti } => xi0 + anti.from_start(s),
        SegmentXi::Zero => ZERO,
    }
}

/// `(1/2πi) ∮ ξ w dz` with the part contributed beyond the split radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourIntegral {
    pub value: C64,
    pub tail: C64,
    pub error: f64,
}

/// One term `ℓ ⊗ v`: the operator `x ↦ ℓ(x) v`, with `ℓ` applied bilinearly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneTerm {
    pub l: Vec<C64>,
    pub v: Vec<C64>,
}

impl RankOneTerm {
    pub fn matrix(&self) -> CMatrix {
        CMatrix::outer(&self.v, &self.l)
    }
}

fn dot(l: &[C64], x: &[C64]) -> C64 {
    l.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// `A − B = Σ ℓ_j ⊗ v_j`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RankOneDecomposition {
    pub terms: Vec<RankOneTerm>,
}

impl RankOneDecomposition {
    /// Cross approximation with full pivoting; exact up to rounding.
    pub fn from_difference(d: &CMatrix) -> Result<Self> {
        let n = d.n();
        let mut r = d.clone();
        let scale = d.max_abs();
        let mut terms = Vec::new();
        if scale == 0.0 {
            return Ok(RankOneDecomposition { terms });
        }
        for _ in 0..n {
            let (mut pi, mut pj, mut best) = (0, 0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let m = r[(i, j)].norm();
                    if m > best {
                        best = m;
                        pi = i;
                        pj = j;
                    }
                }
            }
            if best <= 1e-13 * scale {
                break;
            }
            let p = r[(pi, pj)];
            let v: Vec<C64> = (0..n).map(|i| r[(i, pj)] / p).collect();
            let l: Vec<C64> = r.row(pi).to_vec();
            r = &r - &CMatrix::outer(&v, &l);
            terms.push(RankOneTerm { l, v });
        }
        Ok(RankOneDecomposition { terms })
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn sum(&self, n: usize) -> CMatrix {
        let mut s = CMatrix::zeros(n);
        for t in &self.terms {
            s = &s + &t.matrix();
        }
        s
    }

    /// `Σ ‖ℓ_j‖_* ‖v_j‖` with the dual norm on covectors.
    pub fn nuclear_bound(&self, norm: NormKind) -> f64 {
        self.terms
            .iter()
            .map(|t| norm.dual().vector_norm(&t.l) * norm.vector_norm(&t.v))
            .sum()
    }

    /// `A_k = B + Σ_{j ≤ k} ℓ_j ⊗ v_j`, for `k = 0..=rank`.
    pub fn intermediates(&self, b: &CMatrix) -> Vec<CMatrix> {
        let mut out = vec![b.clone()];
        let mut cur = b.clone();
        for t in &self.terms {
            cur = &cur + &t.matrix();
            out.push(cur.clone());
        }
        out
    }
}

/// Factors of the product formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductFormula {
    pub lambda: C64,
    pub lambda0: f64,
    /// `d_k = 1 − ℓ_k(R(λ, A_{k−1}) v_k)`.
    pub factors: Vec<C64>,
    pub logs: Vec<C64>,
    pub total: C64,
    /// `R(λ, A)` accumulated by rank-one updates.
    #[serde(skip)]
    pub resolvent: Option<CMatrix>,
}

/// `ξ(λ) = Σ log(1 − ℓ_k(R(λ, A_{k−1}) v_k))`, with each resolvent obtained
/// from the previous one by a rank-one update.
pub fn product_formula(
    b: &OperatorInstance,
    m_prime_b: f64,
    decomp: &RankOneDecomposition,
    lambda: C64,
) -> Result<ProductFormula> {
    let lambda0 = m_prime_b * decomp.nuclear_bound(b.norm);
    if lambda.norm() < 2.0 * lambda0 {
        return Err(Error::LambdaTooSmall {
            lambda: lambda.norm(),
            required: 2.0 * lambda0,
        });
    }
    let mut r = b.resolvent(lambda)?;
    let mut factors = Vec::with_capacity(decomp.rank());
    let mut logs = Vec::with_capacity(decomp.rank());
    let mut total = ZERO;
    for (k, t) in decomp.terms.iter().enumerate() {
        let rv = r.mat_vec(&t.v);
        let d = ONE - dot(&t.l, &rv);
        if !(d.re > 0.0) {
            return Err(Error::BranchViolation {
                index: k,
                factor: d,
            });
        }
        let lr = r.vec_mat(&t.l);
        r.axpy(ONE / d, &CMatrix::outer(&rv, &lr));
        let lg = d.ln();
        factors.push(d);
        logs.push(lg);
        total += lg;
    }
    Ok(ProductFormula {
        lambda,
        lambda0,
        factors,
        logs,
        total,
        resolvent: Some(r),
    })
}

/// `tr(R(λ, B + ℓ⊗v) − R(λ, B)) = ℓ(R²v) / (1 − ℓ(Rv))`.
pub fn trace_rank_one(b: &CMatrix, l: &[C64], v: &[C64], lambda: C64) -> Result<C64> {
    if l.iter().all(|x| *x == ZERO) || v.iter().all(|x| *x == ZERO) {
        return Ok(ZERO);
    }
    let lu = Lu::new(&b.shifted_from(lambda));
    let rv = lu.solve_vec(v).map_err(|_| Error::SpectrumHit(lambda))?;
    let r2v = lu.solve_vec(&rv).map_err(|_| Error::SpectrumHit(lambda))?;
    let den = ONE - dot(l, &rv);
    if den.norm() < 1e-14 {
        return Err(Error::DegenerateFactor);
    }
    Ok(dot(l, &r2v) / den)
}

/// Checks of the determinant's structural properties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterminantReport {
    /// `max |Δ_{B/A} Δ_{A/B} − 1|`.
    pub reciprocity: f64,
    /// `max |Δ_{B/A} Δ_{C/B} − Δ_{C/A}|`, relative.
    pub chain: f64,
    /// `|Δ(10^k) − 1|` for k = 1..6.
    pub decay: Vec<f64>,
    pub decay_monotone: bool,
    /// Fitted slope of `log|Δ|` against `log|z − z₁|`.
    pub order: Option<f64>,
}

/// Reciprocity and chain rule at the given points, decay along the real axis.
pub fn determinant_properties(
    ab: &ShiftEvaluator,
    ba: &ShiftEvaluator,
    bc: Option<(&ShiftEvaluator, &ShiftEvaluator)>,
    points: &[C64],
    tol: f64,
) -> Result<DeterminantReport> {
    let mut reciprocity = 0.0f64;
    let mut chain = 0.0f64;
    for &z in points {
        let d1 = ab.delta(z, tol)?.delta;
        let d2 = ba.delta(z, tol)?.delta;
        reciprocity = reciprocity.max((d1 * d2 - ONE).norm());
        if let Some((bc, ac)) = bc {
            let d3 = bc.delta(z, tol)?.delta;
            let d4 = ac.delta(z, tol)?.delta;
            chain = chain.max((d1 * d3 - d4).norm() / d4.norm().max(1e-300));
        }
    }
    let mut decay = Vec::new();
    for k in 1..=6 {
        let z = C64::new(10f64.powi(k), 0.0);
        decay.push((ab.delta(z, tol)?.delta - ONE).norm());
    }
    let decay_monotone = decay.windows(2).all(|w| w[1] <= w[0] || w[1] < 1e-15);
    Ok(DeterminantReport {
        reciprocity,
        chain,
        decay,
        decay_monotone,
        order: None,
    })
}

/// Order of the zero (positive) or pole (negative) of `Δ` at `z1`, from the
/// slope of `log|Δ(z₁ + iρ)|` over `ρ = 10⁻¹ … 10⁻⁴`. `anchor` is an
/// in-domain real point; the path climbs to height `h` before descending.
pub fn pole_zero_order(ev: &ShiftEvaluator, z1: C64, anchor: f64, h: f64, tol: f64) -> Result<f64> {
    let start = C64::new(anchor, 0.0);
    let mut path = vec![start, C64::new(anchor, h), C64::new(z1.re, z1.im + h)];
    let rhos = [1e-1, 1e-2, 1e-3, 1e-4];
    for &r in &rhos {
        path.push(z1 + C64::new(0.0, r));
    }
    let xs = ev.xi_path(&path, tol)?;
    let ys: Vec<f64> = xs[3..].iter().map(|x| x.re).collect();
    let ls: Vec<f64> = rhos.iter().map(|r| r.ln()).collect();
    Ok(least_squares_slope(&ls, &ys))
}

pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
