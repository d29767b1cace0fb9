//! Quadrature: adaptive 16-point Gauss–Legendre on finite and half-infinite
//! intervals, and Chebyshev panels that carry a running antiderivative.
//!
//! Results are summed left to right in panel order so repeated runs are
//! bit-identical.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};

pub const GL_ORDER: usize = 16;
pub const MAX_DEPTH: usize = 40;

/// Evaluation budget of one adaptive integral.
pub const MAX_EVALS: usize = 2_000_000;

const QUAD_NOISE: f64 = 1e-14;

/// Relative size below which an error estimate that stopped shrinking under
/// bisection is taken to be rounding in the integrand.
const STALL_REL: f64 = 1e-10;

/// Values that can be integrated: complex scalars, reals and matrices.
pub trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    /// `self += s * other`
    fn add_scaled(&mut self, other: &Self, s: f64);
    /// Max-entry distance, used as the error norm.
    fn dist(&self, other: &Self) -> f64;
}

impl QuadValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, other: &Self, s: f64) {
        *self += s * other;
    }
    fn dist(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
}

impl QuadValue for C64 {
    fn zero_like(&self) -> Self {
        ZERO
    }
    fn add_scaled(&mut self, other: &Self, s: f64) {
        *self += other * s;
    }
    fn dist(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
}

impl QuadValue for CMatrix {
    fn zero_like(&self) -> Self {
        CMatrix::zeros(self.n())
    }
    fn add_scaled(&mut self, other: &Self, s: f64) {
        self.axpy(C64::new(s, 0.0), other);
    }
    fn dist(&self, other: &Self) -> f64 {
        self.max_abs_diff(other)
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], computed once by Newton iteration.
pub fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_rule(GL_ORDER))
}

pub fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// P_n(z) and P_n'(z) by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Outcome of an adaptive integration.
#[derive(Clone, Debug)]
pub struct Quadrature<T> {
    pub value: T,
    pub error: f64,
    pub evals: usize,
}

fn panel<T: QuadValue>(f: &dyn Fn(f64) -> Result<T>, a: f64, b: f64) -> Result<T> {
    let (x, w) = gauss_legendre();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc: Option<T> = None;
    for (xi, wi) in x.iter().zip(w) {
        let v = f(mid + half * xi)?;
        match acc.as_mut() {
            None => {
                let mut z = v.zero_like();
                z.add_scaled(&v, wi * half);
                acc = Some(z);
            }
            Some(s) => s.add_scaled(&v, wi * half),
        }
    }
    Ok(acc.expect("rule has nodes"))
}

struct State<T> {
    value: Option<T>,
    error: f64,
    evals: usize,
    overflow: bool,
}

impl<T: QuadValue> State<T> {
    fn push(&mut self, v: &T, err: f64) {
        match self.value.as_mut() {
            None => self.value = Some(v.clone()),
            Some(s) => s.add_scaled(v, 1.0),
        }
        self.error += err;
    }
}

#[allow(clippy::too_many_arguments)]
fn refine<T: QuadValue>(
    f: &dyn Fn(f64) -> Result<T>,
    a: f64,
    b: f64,
    whole: T,
    tol: f64,
    prev_err: f64,
    depth: usize,
    st: &mut State<T>,
) -> Result<()> {
    let m = 0.5 * (a + b);
    let left = panel(f, a, m)?;
    let right = panel(f, m, b)?;
    st.evals += 2 * GL_ORDER;
    let mut halves = left.clone();
    halves.add_scaled(&right, 1.0);
    let err = halves.dist(&whole);
    let zero = whole.zero_like();
    // Rounding level of the panel relative to the size of its parts.
    let noise = QUAD_NOISE * (left.dist(&zero) + right.dist(&zero));
    let scale_floor = (1e-15 * (b - a).abs()).max(noise);
    let stalled = err > 0.5 * prev_err && err <= STALL_REL * noise / QUAD_NOISE;
    if err <= tol.max(scale_floor) || stalled || !err.is_finite() {
        st.push(&halves, err);
        return Ok(());
    }
    if depth >= MAX_DEPTH || m == a || m == b || st.evals >= MAX_EVALS {
        st.overflow = true;
        st.push(&halves, err);
        return Ok(());
    }
    refine(f, a, m, left, 0.5 * tol, err, depth + 1, st)?;
    refine(f, m, b, right, 0.5 * tol, err, depth + 1, st)
}

/// Adaptive Gauss–Legendre over `[a, b]`, starting from the given interior
/// breakpoints. `tol` is an absolute error target for the whole interval.
pub fn integrate<T: QuadValue>(
    f: &dyn Fn(f64) -> Result<T>,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<Quadrature<T>> {
    let mut pts = vec![a];
    pts.extend(
        breaks
            .iter()
            .copied()
            .filter(|&x| x > a.min(b) && x < a.max(b)),
    );
    pts.push(b);
    let last = pts.len() - 1;
    if b < a {
        pts[1..last].sort_by(|x, y| y.total_cmp(x));
    } else {
        pts[1..last].sort_by(|x, y| x.total_cmp(y));
    }
    pts.dedup();
    let total = (b - a).abs().max(f64::MIN_POSITIVE);
    let mut st = State {
        value: None,
        error: 0.0,
        evals: 0,
        overflow: false,
    };
    for w in pts.windows(2) {
        let (p, q) = (w[0], w[1]);
        if p == q {
            continue;
        }
        let whole = panel(f, p, q)?;
        st.evals += GL_ORDER;
        let local = tol * (q - p).abs() / total;
        refine(f, p, q, whole, local, f64::INFINITY, 0, &mut st)?;
    }
    let value = match st.value {
        Some(v) => v,
        None => {
            let probe = f(a)?;
            probe.zero_like()
        }
    };
    if st.overflow && st.error > tol {
        return Err(Error::Quadrature {
            tol,
            estimate: st.error,
        });
    }
    if !st.error.is_finite() {
        return Err(Error::Quadrature {
            tol,
            estimate: st.error,
        });
    }
    Ok(Quadrature {
        value,
        error: st.error,
        evals: st.evals,
    })
}

/// Integral over `[a, ∞)` with `a > 0`, via `t = a / u` on `(0, 1]`.
pub fn integrate_to_infinity<T: QuadValue>(
    f: &dyn Fn(f64) -> Result<T>,
    a: f64,
    tol: f64,
) -> Result<Quadrature<T>> {
    assert!(a > 0.0, "lower limit must be positive");
    let g = |u: f64| -> Result<T> {
        let t = a / u;
        let v = f(t)?;
        let mut out = v.zero_like();
        out.add_scaled(&v, a / (u * u));
        Ok(out)
    };
    integrate(&g, 0.0, 1.0, &[0.5, 0.125], tol)
}

/// Degree used for Chebyshev antiderivative panels.
pub const CHEB_POINTS: usize = 32;

/// Chebyshev interpolant of `g` on `[a, b]` together with its antiderivative
/// `F(x) = ∫_a^x g`.
#[derive(Clone, Debug)]
pub struct ChebPanel {
    pub a: f64,
    pub b: f64,
    anti: Vec<C64>,
    coef: Vec<C64>,
}

impl ChebPanel {
    fn from_samples(a: f64, b: f64, vals: &[C64]) -> ChebPanel {
        let n = vals.len();
        let mut coef = vec![ZERO; n];
        for (k, ck) in coef.iter_mut().enumerate() {
            let mut s = ZERO;
            for (j, v) in vals.iter().enumerate() {
                let ang = std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / n as f64;
                s += v * ang.cos();
            }
            *ck = s * (2.0 / n as f64);
        }
        coef[0] *= 0.5;
        // Antiderivative in x ∈ [-1, 1], then scaled to t.
        let get = |k: usize| if k < n { coef[k] } else { ZERO };
        let mut anti = vec![ZERO; n + 1];
        anti[1] = get(0) - get(2) * 0.5;
        for k in 2..=n {
            anti[k] = (get(k - 1) - get(k + 1)) / (2.0 * k as f64);
        }
        let mut at_minus_one = ZERO;
        for (k, v) in anti.iter().enumerate().skip(1) {
            if k % 2 == 0 {
                at_minus_one += v;
            } else {
                at_minus_one -= v;
            }
        }
        anti[0] = -at_minus_one;
        let half = 0.5 * (b - a);
        for v in anti.iter_mut() {
            *v *= half;
        }
        ChebPanel { a, b, anti, coef }
    }

    fn tail(&self) -> f64 {
        let n = self.coef.len();
        (self.coef[n - 1].norm() + self.coef[n - 2].norm()) * 0.5 * (self.b - self.a).abs()
    }

    /// Rounding level of the trailing coefficients.
    fn noise(&self) -> f64 {
        let top = self.coef.iter().map(|c| c.norm()).fold(0.0, f64::max);
        CHEB_NOISE * top * 0.5 * (self.b - self.a).abs()
    }

    fn x_of(&self, t: f64) -> f64 {
        ((2.0 * t - self.a - self.b) / (self.b - self.a)).clamp(-1.0, 1.0)
    }

    /// `∫_a^t g`.
    pub fn integral_to(&self, t: f64) -> C64 {
        clenshaw(&self.anti, self.x_of(t))
    }

    pub fn total(&self) -> C64 {
        self.anti.iter().sum()
    }

    /// The interpolant of `g` itself.
    pub fn value(&self, t: f64) -> C64 {
        clenshaw(&self.coef, self.x_of(t))
    }
}

fn clenshaw(c: &[C64], x: f64) -> C64 {
    let (mut b1, mut b2) = (ZERO, ZERO);
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + b1 * (2.0 * x) - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + b1 * x - b2
}

/// Chebyshev nodes of the first kind mapped to `[a, b]`.
pub fn cheb_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let x = (std::f64::consts::PI * (j as f64 + 0.5) / n as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * x
        })
        .collect()
}

/// Piecewise Chebyshev antiderivative of `g` over `[a, b]`.
#[derive(Clone, Debug)]
pub struct ChebAntiderivative {
    panels: Vec<ChebPanel>,
    /// `cum[i] = ∫_a^{panels[i].a} g`
    cum: Vec<C64>,
    pub evals: usize,
}

impl ChebAntiderivative {
    /// Builds panels starting from `breaks` (including both ends, increasing),
    /// splitting any panel whose trailing coefficients exceed `tol`.
    pub fn build(g: &dyn Fn(f64) -> Result<C64>, breaks: &[f64], tol: f64) -> Result<Self> {
        let mut panels = Vec::new();
        let mut evals = 0;
        for w in breaks.windows(2) {
            if w[1] > w[0] {
                split_build(g, w[0], w[1], tol, 0, &mut panels, &mut evals)?;
            }
        }
        let mut cum = Vec::with_capacity(panels.len());
        let mut acc = ZERO;
        for p in &panels {
            cum.push(acc);
            acc += p.total();
        }
        Ok(ChebAntiderivative { panels, cum, evals })
    }

    pub fn start(&self) -> f64 {
        self.panels.first().map_or(0.0, |p| p.a)
    }

    pub fn end(&self) -> f64 {
        self.panels.last().map_or(0.0, |p| p.b)
    }

    fn locate(&self, t: f64) -> usize {
        let i = self.panels.partition_point(|p| p.b < t);
        i.min(self.panels.len().saturating_sub(1))
    }

    /// `∫_start^t g`.
    pub fn from_start(&self, t: f64) -> C64 {
        if self.panels.is_empty() {
            return ZERO;
        }
        let i = self.locate(t);
        self.cum[i] + self.panels[i].integral_to(t)
    }

    /// `∫_t^end g`.
    pub fn to_end(&self, t: f64) -> C64 {
        self.total() - self.from_start(t)
    }

    pub fn total(&self) -> C64 {
        match (self.panels.last(), self.cum.last()) {
            (Some(p), Some(c)) => c + p.total(),
            _ => ZERO,
        }
    }

    pub fn value(&self, t: f64) -> C64 {
        if self.panels.is_empty() {
            return ZERO;
        }
        self.panels[self.locate(t)].value(t)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.panels.iter().map(|p| p.a).collect();
        if let Some(p) = self.panels.last() {
            v.push(p.b);
        }
        v
    }
}

const CHEB_MAX_DEPTH: usize = 30;

/// Trailing coefficients below this multiple of the largest one are rounding.
const CHEB_NOISE: f64 = 1e-13;

fn split_build(
    g: &dyn Fn(f64) -> Result<C64>,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
    out: &mut Vec<ChebPanel>,
    evals: &mut usize,
) -> Result<()> {
    let nodes = cheb_nodes(a, b, CHEB_POINTS);
    let mut vals = Vec::with_capacity(CHEB_POINTS);
    for &t in &nodes {
        vals.push(g(t)?);
    }
    *evals += CHEB_POINTS;
    let p = ChebPanel::from_samples(a, b, &vals);
    if p.tail() <= tol.max(p.noise()) || depth >= CHEB_MAX_DEPTH {
        if p.tail() > tol && p.tail() > 1e-8 {
            return Err(Error::Quadrature {
                tol,
                estimate: p.tail(),
            });
        }
        out.push(p);
        return Ok(());
    }
    let m = 0.5 * (a + b);
    split_build(g, a, m, tol, depth + 1, out, evals)?;
    split_build(g, m, b, tol, depth + 1, out, evals)
}
