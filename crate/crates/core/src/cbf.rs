//! Negative complete Bernstein functions
//! `φ(z) = c + b z + ∫ z/(t − z) dμ(t)` and their classification.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::quad;

/// Point mass `w δ_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: f64,
    pub w: f64,
}

/// Absolutely continuous part of a representing measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityPiece {
    /// `dμ = dt / t` on `[λ, ∞)`; generates `log λ − log(λ − z)`.
    #[serde(rename = "reciprocal_t_on_tail")]
    ReciprocalTail { lambda: f64 },
    /// A density given only through quadrature nodes and weights. The power
    /// laws `t^p` of the density near the ends of its support drive the
    /// integrability classification; a missing exponent means "unknown".
    #[serde(rename = "generic_tabulated")]
    Tabulated {
        nodes: Vec<f64>,
        weights: Vec<f64>,
        lower: f64,
        /// `None` for an unbounded support.
        #[serde(default)]
        upper: Option<f64>,
        #[serde(default)]
        exponent_at_zero: Option<f64>,
        #[serde(default)]
        exponent_at_infinity: Option<f64>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub densities: Vec<DensityPiece>,
}

/// Functions known only through a pointwise formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pointwise {
    /// `(s log(−s) − s − 1) / log²(−s)`: in the class, slope 0 at the origin,
    /// but `|φ(−x)|/(1 + x²)` is not integrable.
    LogSquared,
}

/// `φ′(−0) = ∫ dμ(t)/t`, possibly infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeAtZero {
    Finite(f64),
    Infinite,
}

impl SlopeAtZero {
    pub fn finite(self) -> Option<f64> {
        match self {
            SlopeAtZero::Finite(v) => Some(v),
            SlopeAtZero::Infinite => None,
        }
    }
}

impl fmt::Display for SlopeAtZero {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlopeAtZero::Finite(v) => write!(f, "{v}"),
            SlopeAtZero::Infinite => f.write_str("inf"),
        }
    }
}

/// A negative complete Bernstein function.
#[derive(Clone, Debug, PartialEq)]
pub struct CbfSpec {
    pub c: f64,
    pub b: f64,
    pub mu: Option<MeasureSpec>,
    pub pointwise: Option<Pointwise>,
    pub name: String,
}

/// Absolute tolerance of the mapped-tail quadrature used for cross-checks.
pub const TAIL_TOL: f64 = 1e-12;

impl CbfSpec {
    pub fn from_measure(c: f64, b: f64, mu: MeasureSpec, name: impl Into<String>) -> Result<Self> {
        let f = CbfSpec {
            c,
            b,
            mu: Some(mu),
            pointwise: None,
            name: name.into(),
        };
        f.validate()?;
        Ok(f)
    }

    /// Finite atomic measure; `φ(z) = Σ w z/(t − z)`.
    pub fn rational(atoms: &[(f64, f64)]) -> Result<Self> {
        let name = atoms
            .iter()
            .map(|(t, w)| format!("{t},{w}"))
            .collect::<Vec<_>>()
            .join(";");
        let mu = MeasureSpec {
            atoms: atoms.iter().map(|&(t, w)| Atom { t, w }).collect(),
            densities: vec![],
        };
        Self::from_measure(0.0, 0.0, mu, format!("rational:{name}"))
    }

    /// `ψ_λ(z) = log λ − log(λ − z)`.
    pub fn psi(lambda: f64) -> Result<Self> {
        let mu = MeasureSpec {
            atoms: vec![],
            densities: vec![DensityPiece::ReciprocalTail { lambda }],
        };
        Self::from_measure(0.0, 0.0, mu, format!("psi:{lambda}"))
    }

    pub fn log_squared() -> Self {
        CbfSpec {
            c: 0.0,
            b: 0.0,
            mu: None,
            pointwise: Some(Pointwise::LogSquared),
            name: "logsq".into(),
        }
    }

    /// `−(−z)^α` through a tabulated density `sin(πα)/π · t^(α−1)`.
    pub fn fractional_power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Invalid(format!("exponent {alpha} outside (0, 1)")));
        }
        // t = e^x, dμ = sin(πα)/π e^{αx} dx on x ∈ [−60, 60].
        let (gx, gw) = quad::gauss_legendre();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let panels = 60;
        let (lo, hi) = (-60.0, 60.0);
        let h = (hi - lo) / panels as f64;
        let k = (std::f64::consts::PI * alpha).sin() / std::f64::consts::PI;
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * h;
            for (x, w) in gx.iter().zip(gw) {
                let xx = mid + 0.5 * h * x;
                nodes.push(xx.exp());
                weights.push(k * (alpha * xx).exp() * 0.5 * h * w);
            }
        }
        let mu = MeasureSpec {
            atoms: vec![],
            densities: vec![DensityPiece::Tabulated {
                nodes,
                weights,
                lower: 0.0,
                upper: None,
                exponent_at_zero: Some(alpha - 1.0),
                exponent_at_infinity: Some(alpha - 1.0),
            }],
        };
        Self::from_measure(0.0, 0.0, mu, format!("power:{alpha}"))
    }

    /// Parses `rational:t1,w1;t2,w2`, `psi:L`, `remark43` or `power:ALPHA`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match head {
            "rational" => {
                let mut atoms = Vec::new();
                for pair in rest.split(';').filter(|p| !p.trim().is_empty()) {
                    let (t, w) = pair
                        .split_once(',')
                        .ok_or_else(|| Error::Invalid(format!("atom `{pair}` is not `t,w`")))?;
                    atoms.push((parse_f64(t)?, parse_f64(w)?));
                }
                if atoms.is_empty() {
                    return Err(Error::Invalid(
                        "rational function needs at least one atom".into(),
                    ));
                }
                Self::rational(&atoms)
            }
            "psi" => Self::psi(parse_f64(rest)?),
            "power" => Self::fractional_power(parse_f64(rest)?),
            "remark43" | "logsq" if rest.is_empty() => Ok(Self::log_squared()),
            _ => Err(Error::Invalid(format!("unknown function spec `{spec}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c <= 0.0) || !(self.b >= 0.0) {
            return Err(Error::Invalid(format!(
                "need c <= 0 and b >= 0, got c={}, b={}",
                self.c, self.b
            )));
        }
        let Some(mu) = &self.mu else {
            return Ok(());
        };
        for a in &mu.atoms {
            if !(a.t > 0.0 && a.t.is_finite() && a.w > 0.0 && a.w.is_finite()) {
                return Err(Error::Invalid(format!(
                    "atom ({}, {}) outside (0,∞)×(0,∞)",
                    a.t, a.w
                )));
            }
        }
        for d in &mu.densities {
            match d {
                DensityPiece::ReciprocalTail { lambda } => {
                    if !(*lambda > 0.0 && lambda.is_finite()) {
                        return Err(Error::Invalid(format!(
                            "tail start {lambda} must be positive"
                        )));
                    }
                }
                DensityPiece::Tabulated {
                    nodes,
                    weights,
                    lower,
                    upper,
                    exponent_at_zero,
                    exponent_at_infinity,
                } => {
                    if nodes.len() != weights.len() {
                        return Err(Error::Invalid(
                            "tabulated nodes and weights differ in length".into(),
                        ));
                    }
                    let hi = upper.unwrap_or(f64::INFINITY);
                    if !(*lower >= 0.0 && hi > *lower) {
                        return Err(Error::Invalid(
                            "tabulated support must lie in [0, ∞)".into(),
                        ));
                    }
                    if nodes
                        .iter()
                        .any(|&t| !(t > 0.0 && t.is_finite() && t >= *lower && t <= hi))
                        || weights.iter().any(|&w| !(w >= 0.0 && w.is_finite()))
                    {
                        return Err(Error::Invalid("tabulated node outside its support".into()));
                    }
                    // ∫ dμ/(1+t) < ∞ where the exponents are known.
                    if *lower == 0.0 && exponent_at_zero.is_some_and(|p| p <= -1.0) {
                        return Err(Error::Invalid("density not integrable at 0".into()));
                    }
                    if upper.is_none() && exponent_at_infinity.is_some_and(|p| p >= 0.0) {
                        return Err(Error::Invalid(
                            "density not integrable against 1/(1+t) at ∞".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_quadrature_eligible(&self) -> bool {
        self.mu.is_some()
    }

    /// The representing measure, or `MeasureUnavailable`.
    pub fn measure(&self) -> Result<&MeasureSpec> {
        self.mu
            .as_ref()
            .ok_or_else(|| Error::MeasureUnavailable(self.name.clone()))
    }

    /// True when the function was built with `c = b = 0`.
    pub fn is_pure(&self) -> bool {
        self.c == 0.0 && self.b == 0.0
    }

    /// The same function with `c` and `b` removed.
    pub fn without_affine_part(&self) -> Self {
        CbfSpec {
            c: 0.0,
            b: 0.0,
            ..self.clone()
        }
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        check_domain(z)?;
        let mut s = C64::new(self.c, 0.0) + z * self.b;
        if let Some(Pointwise::LogSquared) = self.pointwise {
            return Ok(s + log_squared(z));
        }
        let mu = self.measure()?;
        for a in &mu.atoms {
            s += z / (a.t - z) * a.w;
        }
        for d in &mu.densities {
            s += match d {
                DensityPiece::ReciprocalTail { lambda } => {
                    C64::new(lambda.ln(), 0.0) - (C64::new(*lambda, 0.0) - z).ln()
                }
                DensityPiece::Tabulated { nodes, weights, .. } => nodes
                    .iter()
                    .zip(weights)
                    .map(|(&t, &w)| z / (t - z) * w)
                    .sum(),
            };
        }
        Ok(s)
    }

    /// `φ′(z) = b + ∫ t/(t − z)² dμ(t)`.
    pub fn eval_derivative(&self, z: C64) -> Result<C64> {
        check_domain(z)?;
        let mut s = C64::new(self.b, 0.0);
        if let Some(Pointwise::LogSquared) = self.pointwise {
            return Ok(s + log_squared_derivative(z));
        }
        let mu = self.measure()?;
        for a in &mu.atoms {
            let d = a.t - z;
            s += a.t * a.w / (d * d);
        }
        for d in &mu.densities {
            s += match d {
                DensityPiece::ReciprocalTail { lambda } => 1.0 / (C64::new(*lambda, 0.0) - z),
                DensityPiece::Tabulated { nodes, weights, .. } => nodes
                    .iter()
                    .zip(weights)
                    .map(|(&t, &w)| {
                        let d = t - z;
                        t * w / (d * d)
                    })
                    .sum(),
            };
        }
        Ok(s)
    }

    /// Value by quadrature of the representing integral instead of closed forms.
    pub fn eval_by_quadrature(&self, z: C64) -> Result<C64> {
        check_domain(z)?;
        let mu = self.measure()?;
        let mut s = C64::new(self.c, 0.0) + z * self.b;
        for a in &mu.atoms {
            s += z / (a.t - z) * a.w;
        }
        for d in &mu.densities {
            match d {
                DensityPiece::ReciprocalTail { lambda } => {
                    // t = λ/u: ∫_λ^∞ z/(t − z) dt/t = ∫_0^1 z/(λ − z u) du.
                    let lam = *lambda;
                    let g = move |u: f64| Ok(z / (lam - z * u));
                    s += quad::integrate(&g, 0.0, 1.0, &[], TAIL_TOL)?.value;
                }
                DensityPiece::Tabulated { nodes, weights, .. } => {
                    s += nodes
                        .iter()
                        .zip(weights)
                        .map(|(&t, &w)| z / (t - z) * w)
                        .sum::<C64>();
                }
            }
        }
        Ok(s)
    }

    /// `φ′(−0) = ∫ dμ(t)/t`.
    pub fn derivative_at_zero_minus(&self) -> SlopeAtZero {
        if let Some(Pointwise::LogSquared) = self.pointwise {
            return SlopeAtZero::Finite(self.b);
        }
        let Some(mu) = &self.mu else {
            return SlopeAtZero::Infinite;
        };
        let mut s = self.b;
        for a in &mu.atoms {
            s += a.w / a.t;
        }
        for d in &mu.densities {
            match d {
                DensityPiece::ReciprocalTail { lambda } => s += 1.0 / lambda,
                DensityPiece::Tabulated {
                    nodes,
                    weights,
                    lower,
                    exponent_at_zero,
                    ..
                } => {
                    // ∫_0 t^{p−1} dt needs p > 0; unknown behaviour at 0 is not assumed finite.
                    if *lower == 0.0 && !exponent_at_zero.is_some_and(|p| p > 0.0) {
                        return SlopeAtZero::Infinite;
                    }
                    s += nodes.iter().zip(weights).map(|(t, w)| w / t).sum::<f64>();
                }
            }
        }
        SlopeAtZero::Finite(s)
    }

    /// Whether `∫ (2t log t + π)/(1 + t²) dμ(t) < ∞`, piece by piece.
    pub fn check_condition_star(&self) -> Result<bool> {
        if let Some(Pointwise::LogSquared) = self.pointwise {
            return Ok(false);
        }
        let mu = self.measure()?;
        for d in &mu.densities {
            if let DensityPiece::Tabulated {
                lower,
                upper,
                exponent_at_zero,
                exponent_at_infinity,
                ..
            } = d
            {
                if *lower == 0.0 {
                    // Weight → π near 0: need ∫_0 t^p dt finite.
                    let p = exponent_at_zero.ok_or(Error::UnknownTail)?;
                    if p <= -1.0 {
                        return Ok(false);
                    }
                }
                if upper.is_none() {
                    // Weight ~ 2 log t / t: need t^{p−1} log t integrable.
                    let p = exponent_at_infinity.ok_or(Error::UnknownTail)?;
                    if p >= 0.0 {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Largest finite feature of the measure (atom position or tail start).
    pub fn measure_scale(&self) -> f64 {
        let Some(mu) = &self.mu else {
            return 1.0;
        };
        let mut s: f64 = 0.0;
        for a in &mu.atoms {
            s = s.max(a.t);
        }
        for d in &mu.densities {
            if let DensityPiece::ReciprocalTail { lambda } = d {
                s = s.max(*lambda);
            }
        }
        s
    }

    /// Positions where `φ′` is singular or sharply peaked.
    pub fn feature_points(&self) -> Vec<f64> {
        let Some(mu) = &self.mu else {
            return vec![];
        };
        let mut v: Vec<f64> = mu.atoms.iter().map(|a| a.t).collect();
        for d in &mu.densities {
            if let DensityPiece::ReciprocalTail { lambda } = d {
                v.push(*lambda);
            }
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Invalid(format!("`{s}` is not a number")))
}

fn check_domain(z: C64) -> Result<()> {
    if z.im == 0.0 && z.re > 0.0 {
        return Err(Error::Domain(z));
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Invalid(format!("non-finite argument {z}")));
    }
    Ok(())
}

const SERIES_RADIUS: f64 = 0.05;
const SERIES_TERMS: usize = 18;

/// `(s log(−s) − s − 1)/log²(−s)`, with the removable point `s = −1` handled
/// by the series `Σ_{k≥2} (1−k)/k! u^{k−2}`, `u = log(−s)`.
pub fn log_squared(s: C64) -> C64 {
    if s == ZERO {
        return ZERO;
    }
    let u = (-s).ln();
    if u.norm() < SERIES_RADIUS {
        let mut acc = ZERO;
        let mut upow = C64::new(1.0, 0.0);
        let mut fact = 2.0;
        for k in 2..SERIES_TERMS {
            if k > 2 {
                fact *= k as f64;
                upow *= u;
            }
            acc += upow * ((1.0 - k as f64) / fact);
        }
        return acc;
    }
    (s * u - s - 1.0) / (u * u)
}

pub fn log_squared_derivative(s: C64) -> C64 {
    if s == ZERO {
        return ZERO;
    }
    let u = (-s).ln();
    if u.norm() < SERIES_RADIUS {
        // dφ/du = Σ_{k≥3} (1−k)(k−2)/k! u^{k−3}; du/ds = 1/s.
        let mut acc = ZERO;
        let mut upow = C64::new(1.0, 0.0);
        let mut fact = 6.0;
        for k in 3..SERIES_TERMS + 1 {
            if k > 3 {
                fact *= k as f64;
                upow *= u;
            }
            acc += upow * ((1.0 - k as f64) * (k as f64 - 2.0) / fact);
        }
        return acc / s;
    }
    let n = s * u - s - 1.0;
    1.0 / u - 2.0 * n / (s * u * u * u)
}

/// On-disk function description, `{"c":0,"b":0,"atoms":[...],"densities":[...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CbfFile {
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub densities: Vec<DensityPiece>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl CbfFile {
    pub fn into_spec(self) -> Result<CbfSpec> {
        let name = self.name.unwrap_or_else(|| "custom".into());
        CbfSpec::from_measure(
            self.c,
            self.b,
            MeasureSpec {
                atoms: self.atoms,
                densities: self.densities,
            },
            name,
        )
    }
}

/// Named functions available everywhere: rational, logarithmic tails,
/// a tabulated fractional power and the evaluation-only counterexample.
pub fn catalog() -> Vec<CbfSpec> {
    vec![
        CbfSpec::rational(&[(1.0, 1.0)]).expect("valid"),
        CbfSpec::rational(&[(0.5, 1.0), (4.0, 2.0)]).expect("valid"),
        CbfSpec::rational(&[(0.2, 0.3), (2.0, 0.5), (10.0, 1.0)]).expect("valid"),
        CbfSpec::psi(3.0).expect("valid"),
        CbfSpec::psi(10.0).expect("valid"),
        CbfSpec::fractional_power(0.5).expect("valid"),
        CbfSpec::log_squared(),
    ]
}

/// The catalog members that satisfy the trace-formula hypotheses.
pub fn trace_suite() -> Vec<CbfSpec> {
    catalog()
        .into_iter()
        .filter(|f| {
            f.derivative_at_zero_minus().finite().is_some()
                && f.check_condition_star().unwrap_or(false)
        })
        .collect()
}

/// Catalog lookup by family name.
pub fn lookup(name: &str, lambda: Option<f64>, atoms: Option<&[(f64, f64)]>) -> Result<CbfSpec> {
    match name {
        "psi" => CbfSpec::psi(lambda.ok_or_else(|| Error::Invalid("psi needs λ".into()))?),
        "rational" => {
            CbfSpec::rational(atoms.ok_or_else(|| Error::Invalid("rational needs atoms".into()))?)
        }
        "remark43" | "logsq" => Ok(CbfSpec::log_squared()),
        other => Err(Error::Invalid(format!("no catalog entry `{other}`"))),
    }
}
