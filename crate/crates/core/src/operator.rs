//! Nonpositive and negative operators: resolvents, the constants `M_A`,
//! `M′_A`, and the validated region `S_θ ∪ B_δ(0)` with its boundary contour.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{operator_norm, CMatrix, Lu, NormKind, C64};

/// Which resolvent bound is in force.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `sup t‖R(t,A)‖ < ∞` over `t > 0`.
    Nonpositive,
    /// `sup (1+t)‖R(t,A)‖ < ∞` over `t ≥ 0`.
    Negative,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Nonpositive => "nonpositive",
            Mode::Negative => "negative",
        })
    }
}

/// `(zI − A)^{-1}`.
pub fn resolvent(a: &CMatrix, z: C64) -> Result<CMatrix> {
    Lu::new(&a.shifted_from(z))
        .inverse()
        .map_err(|_| Error::SpectrumHit(z))
}

pub fn resolvent_norm(a: &CMatrix, z: C64, norm: NormKind) -> Result<f64> {
    operator_norm(&resolvent(a, z)?, norm)
}

const GRID_POINTS: usize = 200;
const GRID_LO: f64 = 1e-6;
const GRID_HI: f64 = 1e8;
const UNBOUNDED_CAP: f64 = 1e12;
const GOLDEN_REL: f64 = 1e-6;

/// Sampled supremum of `w(t)‖R(t,A)‖`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MEstimate {
    pub value: f64,
    /// Maximizer (`f64::INFINITY` when the limit `t → ∞` dominates).
    pub t_star: f64,
    /// Relative width of the final golden-section bracket.
    pub bracket: f64,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Estimates `M_A` (nonpositive) or the negative-mode constant by a log grid
/// on `[1e-6, 1e8]` refined by golden section. Always at least 1, the limit
/// of both weights times `‖R(t,A)‖` as `t → ∞`.
pub fn estimate_m(a: &CMatrix, norm: NormKind, mode: Mode) -> Result<MEstimate> {
    let weight = |t: f64| match mode {
        Mode::Nonpositive => t,
        Mode::Negative => 1.0 + t,
    };
    let g = |t: f64| -> Result<f64> {
        let r = resolvent(a, C64::new(t, 0.0))
            .map_err(|_| Error::Unbounded(format!("resolvent fails at t = {t:e}")))?;
        Ok(weight(t) * operator_norm(&r, norm)?)
    };
    let mut best = MEstimate {
        value: 1.0,
        t_star: f64::INFINITY,
        bracket: 0.0,
    };
    if mode == Mode::Negative {
        let at0 = resolvent(a, C64::new(0.0, 0.0))
            .map_err(|_| Error::Unbounded("0 lies in the spectrum".into()))?;
        let v = operator_norm(&at0, norm)?;
        if v > UNBOUNDED_CAP {
            return Err(Error::Unbounded("‖R(0,A)‖ exceeds cap".into()));
        }
        if v > best.value {
            best = MEstimate {
                value: v,
                t_star: 0.0,
                bracket: 0.0,
            };
        }
    }
    let ts = log_grid(GRID_LO, GRID_HI, GRID_POINTS);
    let vals: Vec<f64> = ts.iter().map(|&t| g(t)).collect::<Result<_>>()?;
    if vals.iter().any(|v| !v.is_finite() || *v > UNBOUNDED_CAP) {
        return Err(Error::Unbounded("sampled values exceed 1e12".into()));
    }
    let k = vals
        .iter()
        .enumerate()
        .fold(0, |acc, (i, v)| if *v > vals[acc] { i } else { acc });
    let slope = |i: usize, j: usize| (vals[j].ln() - vals[i].ln()) / (ts[j].ln() - ts[i].ln());
    if k == 0 && slope(0, 1) < -0.5 {
        return Err(Error::Unbounded("growth towards t = 0".into()));
    }
    if k == GRID_POINTS - 1 && slope(GRID_POINTS - 2, GRID_POINTS - 1) > 0.5 {
        return Err(Error::Unbounded("growth towards t = ∞".into()));
    }
    if vals[k] > best.value {
        best = MEstimate {
            value: vals[k],
            t_star: ts[k],
            bracket: 0.0,
        };
    }
    // Golden section in log t around the grid maximizer.
    let lo = ts[k.saturating_sub(1)].ln();
    let hi = ts[(k + 1).min(GRID_POINTS - 1)].ln();
    let (mut x0, mut x1) = (lo, hi);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = x1 - ratio * (x1 - x0);
    let mut d = x0 + ratio * (x1 - x0);
    let mut gc = g(c.exp())?;
    let mut gd = g(d.exp())?;
    while x1 - x0 > GOLDEN_REL {
        if gc > gd {
            x1 = d;
            d = c;
            gd = gc;
            c = x1 - ratio * (x1 - x0);
            gc = g(c.exp())?;
        } else {
            x0 = c;
            c = d;
            gc = gd;
            d = x0 + ratio * (x1 - x0);
            gd = g(d.exp())?;
        }
    }
    let (xm, gm) = if gc > gd { (c, gc) } else { (d, gd) };
    if gm > best.value {
        best = MEstimate {
            value: gm,
            t_star: xm.exp(),
            bracket: (x1 - x0).exp() - 1.0,
        };
    } else if best.t_star.is_finite() && best.t_star > 0.0 {
        best.bracket = (x1 - x0).exp() - 1.0;
    }
    Ok(best)
}

/// A matrix together with its norm and classification constants.
#[derive(Clone, Debug)]
pub struct OperatorInstance {
    pub a: CMatrix,
    pub norm: NormKind,
    pub m_nonpositive: f64,
    /// `None` when the operator is nonpositive but not negative.
    pub m_negative: Option<f64>,
}

impl OperatorInstance {
    /// Classifies `a`; fails with `Unbounded` if it is not even nonpositive.
    pub fn new(a: CMatrix, norm: NormKind) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::Invalid("matrix has non-finite entries".into()));
        }
        let m_nonpositive = estimate_m(&a, norm, Mode::Nonpositive)?.value;
        let m_negative = match estimate_m(&a, norm, Mode::Negative) {
            Ok(m) => Some(m.value),
            Err(Error::Unbounded(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(OperatorInstance {
            a,
            norm,
            m_nonpositive,
            m_negative,
        })
    }

    pub fn is_negative(&self) -> bool {
        self.m_negative.is_some()
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn m(&self, mode: Mode) -> Result<f64> {
        match mode {
            Mode::Nonpositive => Ok(self.m_nonpositive),
            Mode::Negative => self
                .m_negative
                .ok_or_else(|| Error::HypothesisViolated("operator is not negative".into())),
        }
    }

    pub fn resolvent(&self, z: C64) -> Result<CMatrix> {
        resolvent(&self.a, z)
    }

    pub fn resolvent_norm(&self, z: C64) -> Result<f64> {
        resolvent_norm(&self.a, z, self.norm)
    }

    pub fn norm_of(&self, m: &CMatrix) -> Result<f64> {
        operator_norm(m, self.norm)
    }

    pub fn op_norm(&self) -> Result<f64> {
        operator_norm(&self.a, self.norm)
    }
}

/// Validated region `S_θ ∪ B_δ(0)` for a pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorGeometry {
    pub theta: f64,
    pub delta: f64,
    /// Pair constant: max of the two operator constants below.
    pub m_prime: f64,
    pub m_prime_a: f64,
    pub m_prime_b: f64,
    pub r_trunc: f64,
    pub mode: Mode,
    pub halvings: usize,
}

const MAX_HALVINGS: usize = 20;
const RAY_SAMPLES: usize = 150;
const LINE_SAMPLES: usize = 40;
const ARC_SAMPLES: usize = 60;
const SAMPLE_R_MAX: f64 = 1e6;
const STABILITY: f64 = 0.05;

impl SectorGeometry {
    /// Points of the closed region used for validation.
    pub fn validation_points(&self) -> Vec<C64> {
        validation_points(self.theta, self.delta)
    }

    /// Whether `z` lies in the closure of `S_θ ∪ B_δ(0)`.
    pub fn contains(&self, z: C64) -> bool {
        let tol = 1e-12 * (1.0 + z.norm());
        z.norm() <= self.delta + tol
            || (z.norm() > 0.0 && z.arg().abs() <= self.theta + 1e-12)
            || z.norm() <= tol
    }

    /// Weight `w(λ)` in the bound `w(λ)‖R(λ,·)‖ ≤ M′`.
    pub fn weight(&self, z: C64) -> f64 {
        match self.mode {
            Mode::Negative => 1.0 + z.norm(),
            Mode::Nonpositive => z.norm(),
        }
    }

    pub fn contour(&self) -> ContourPath {
        contour(self)
    }

    /// Same geometry with a different angle or radius, revalidated.
    pub fn rescaled(
        &self,
        a: &OperatorInstance,
        b: &OperatorInstance,
        theta: f64,
        delta: f64,
    ) -> Result<SectorGeometry> {
        let (ma, mb) =
            sample_constants(a, b, theta, delta, self.mode)?.ok_or(Error::NoSector(0))?;
        Ok(SectorGeometry {
            theta,
            delta,
            m_prime: ma.max(mb),
            m_prime_a: ma,
            m_prime_b: mb,
            ..*self
        })
    }
}

fn validation_points(theta: f64, delta: f64) -> Vec<C64> {
    let mut pts = Vec::new();
    let r0 = if delta > 0.0 { delta } else { 1e-6 };
    let radii = log_grid(r0, SAMPLE_R_MAX, RAY_SAMPLES);
    for &ang in &[theta, -theta] {
        let e = C64::from_polar(1.0, ang);
        pts.extend(radii.iter().map(|&r| e * r));
    }
    let inner = log_grid(r0, SAMPLE_R_MAX, LINE_SAMPLES);
    for &ang in &[0.5 * theta, 0.0, -0.5 * theta] {
        let e = C64::from_polar(1.0, ang);
        pts.extend(inner.iter().map(|&r| e * r));
    }
    if delta > 0.0 {
        pts.push(C64::new(0.0, 0.0));
        for i in 0..ARC_SAMPLES {
            let ang = theta
                + (2.0 * std::f64::consts::PI - 2.0 * theta) * i as f64 / (ARC_SAMPLES - 1) as f64;
            pts.push(C64::from_polar(delta, ang));
            if i % 3 == 0 {
                pts.push(C64::from_polar(0.5 * delta, ang));
            }
        }
    }
    pts
}

/// Sup of `w(λ)‖R(λ,·)‖` over the validation points for both operators, or
/// `None` if the samples do not certify the region.
fn sample_constants(
    a: &OperatorInstance,
    b: &OperatorInstance,
    theta: f64,
    delta: f64,
    mode: Mode,
) -> Result<Option<(f64, f64)>> {
    let pts = validation_points(theta, delta);
    let mut out = [0.0f64; 2];
    for (slot, op) in [a, b].into_iter().enumerate() {
        let (mut even, mut odd) = (0.0f64, 0.0f64);
        for (i, &z) in pts.iter().enumerate() {
            let w = match mode {
                Mode::Negative => 1.0 + z.norm(),
                Mode::Nonpositive => z.norm(),
            };
            if w == 0.0 {
                continue;
            }
            let r = match op.resolvent(z) {
                Ok(r) => r,
                Err(_) => return Ok(None),
            };
            let v = w * op.norm_of(&r)?;
            if !v.is_finite() || v > UNBOUNDED_CAP {
                return Ok(None);
            }
            if i % 2 == 0 {
                even = even.max(v);
            } else {
                odd = odd.max(v);
            }
        }
        let hi = even.max(odd);
        if (even - odd).abs() > STABILITY * hi {
            return Ok(None);
        }
        out[slot] = hi.max(1.0);
    }
    Ok(Some((out[0], out[1])))
}

/// Default truncation radius: several times the largest operator norm.
pub fn default_r_trunc(a: &OperatorInstance, b: &OperatorInstance) -> Result<f64> {
    Ok(8.0 * 1f64.max(a.op_norm()?).max(b.op_norm()?))
}

/// Builds and validates `S_θ ∪ B_δ(0)`. Negative mode needs both operators
/// negative; nonpositive mode uses `δ = 0`.
pub fn build_sector_mode(
    a: &OperatorInstance,
    b: &OperatorInstance,
    mode: Mode,
) -> Result<SectorGeometry> {
    if a.n() != b.n() {
        return Err(Error::Invalid("operators differ in dimension".into()));
    }
    let m = a.m(mode)?.max(b.m(mode)?);
    let mut theta = 0.9 * (1.0 / (2.0 * m)).asin();
    let mut delta = match mode {
        Mode::Negative => {
            // Neumann radius: ‖zR(0,A)‖ < 1 keeps zI − A invertible.
            let ra = a.norm_of(&a.resolvent(C64::new(0.0, 0.0))?)?;
            let rb = b.norm_of(&b.resolvent(C64::new(0.0, 0.0))?)?;
            0.5 * (1.0 / ra).min(1.0 / rb)
        }
        Mode::Nonpositive => 0.0,
    };
    for halvings in 0..=MAX_HALVINGS {
        if let Some((ma, mb)) = sample_constants(a, b, theta, delta, mode)? {
            return Ok(SectorGeometry {
                theta,
                delta,
                m_prime: ma.max(mb),
                m_prime_a: ma,
                m_prime_b: mb,
                r_trunc: default_r_trunc(a, b)?,
                mode,
                halvings,
            });
        }
        if halvings % 2 == 0 || delta == 0.0 {
            theta *= 0.5;
        } else {
            delta *= 0.5;
        }
    }
    Err(Error::NoSector(MAX_HALVINGS))
}

/// Negative mode when both operators are negative, nonpositive otherwise.
pub fn build_sector(a: &OperatorInstance, b: &OperatorInstance) -> Result<SectorGeometry> {
    let mode = if a.is_negative() && b.is_negative() {
        Mode::Negative
    } else {
        Mode::Nonpositive
    };
    build_sector_mode(a, b, mode)
}

/// One smooth piece of the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Segment {
    /// `r e^{i angle}` for `r` running from `from` to `to`.
    Ray { angle: f64, from: f64, to: f64 },
    /// `radius e^{iα}` for `α` running from `from` to `to`.
    Arc { radius: f64, from: f64, to: f64 },
}

impl Segment {
    pub fn point(&self, s: f64) -> C64 {
        match *self {
            Segment::Ray { angle, .. } => C64::from_polar(s, angle),
            Segment::Arc { radius, .. } => C64::from_polar(radius, s),
        }
    }

    /// `dz/ds`.
    pub fn tangent(&self, s: f64) -> C64 {
        match *self {
            Segment::Ray { angle, .. } => C64::from_polar(1.0, angle),
            Segment::Arc { radius, .. } => C64::new(0.0, 1.0) * C64::from_polar(radius, s),
        }
    }

    pub fn range(&self) -> (f64, f64) {
        match *self {
            Segment::Ray { from, to, .. } | Segment::Arc { from, to, .. } => (from, to),
        }
    }
}

/// Positively oriented boundary of `S_θ ∪ B_δ(0)` truncated at `R_trunc`:
/// the upper ray inwards, the arc through `−δ`, the lower ray outwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourPath {
    pub segments: Vec<Segment>,
}

impl ContourPath {
    pub fn start(&self) -> C64 {
        let s = &self.segments[0];
        s.point(s.range().0)
    }

    pub fn end(&self) -> C64 {
        let s = self.segments.last().expect("nonempty");
        s.point(s.range().1)
    }
}

pub fn contour(geom: &SectorGeometry) -> ContourPath {
    let (t, d, r) = (geom.theta, geom.delta, geom.r_trunc);
    let mut segments = vec![Segment::Ray {
        angle: t,
        from: r,
        to: d,
    }];
    if d > 0.0 {
        segments.push(Segment::Arc {
            radius: d,
            from: t,
            to: 2.0 * std::f64::consts::PI - t,
        });
    }
    segments.push(Segment::Ray {
        angle: -t,
        from: d,
        to: r,
    });
    ContourPath { segments }
}

/// Outcome of the small-perturbation test `‖V‖ < 1/M′_A`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// `M′_A / (1 − M′_A‖V‖)` when admissible.
    pub bound: Option<f64>,
    pub v_norm: f64,
}

pub fn shift_is_admissible(m_prime_a: f64, v: &CMatrix, norm: NormKind) -> Result<Admissibility> {
    let v_norm = operator_norm(v, norm)?;
    let admissible = m_prime_a * v_norm < 1.0;
    Ok(Admissibility {
        admissible,
        bound: admissible.then(|| m_prime_a / (1.0 - m_prime_a * v_norm)),
        v_norm,
    })
}

/// `sup w(λ)‖R(λ,A)‖` over the validation points of a given region.
pub fn resolvent_constant(a: &OperatorInstance, theta: f64, delta: f64, mode: Mode) -> Result<f64> {
    let mut sup = 0.0f64;
    for z in validation_points(theta, delta) {
        let w = match mode {
            Mode::Negative => 1.0 + z.norm(),
            Mode::Nonpositive => z.norm(),
        };
        if w > 0.0 {
            sup = sup.max(w * a.resolvent_norm(z)?);
        }
    }
    Ok(sup.max(1.0))
}
