//! Seeded instances `A = P D_A P⁻¹`, `B = P D_B P⁻¹` with chosen spectra, and
//! closed-form answers computed from those spectra alone.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cbf::CbfSpec;
use crate::error::{Error, Result};
use crate::linalg::{det, singular_values, CMatrix, NormKind, C64, ZERO};
use crate::operator::{Mode, OperatorInstance};
use crate::shift::{RankOneDecomposition, RankOneTerm};

pub const MAX_RETRIES: usize = 100;

/// Generation parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n: usize,
    pub mode: Mode,
    pub rank: usize,
    pub cond_cap: f64,
    /// Put conjugate pairs in the shared part of the spectrum.
    pub complex_pairs: bool,
}

impl GenConfig {
    pub fn new(n: usize, mode: Mode, rank: usize, cond_cap: f64) -> Self {
        GenConfig {
            n,
            mode,
            rank,
            cond_cap,
            complex_pairs: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleInstance {
    pub seed: u64,
    pub config: GenConfig,
    pub p: CMatrix,
    pub p_inv: CMatrix,
    pub d_a: Vec<C64>,
    pub d_b: Vec<C64>,
    pub a: CMatrix,
    pub b: CMatrix,
    pub decomposition: RankOneDecomposition,
    pub cond: f64,
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Columns of a complex Gaussian matrix orthonormalized twice.
fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<C64> = (0..n).map(|_| gaussian(rng)).collect();
        for _ in 0..2 {
            for q in &cols {
                let p: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= p * y;
                }
            }
        }
        let nrm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / nrm).collect());
        }
    }
    CMatrix::from_fn(n, |i, j| cols[j][i])
}

/// Seeded Haar-like unitary matrix.
pub fn seeded_unitary(seed: u64, n: usize) -> CMatrix {
    random_unitary(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Seeded complex Gaussian vector.
pub fn seeded_vector(seed: u64, n: usize) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| gaussian(&mut rng)).collect()
}

fn draw_real(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-10.0..-0.1), 0.0)
}

/// `−r e^{±iα}` with `|α| < π/4`.
fn draw_pair(rng: &mut ChaCha8Rng) -> (C64, C64) {
    let r: f64 = rng.random_range(0.5..10.0);
    let a: f64 = rng.random_range(0.05..0.7);
    let z = -C64::from_polar(r, a);
    (z, z.conj())
}

fn spectra(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> (Vec<C64>, Vec<C64>) {
    let n = cfg.n;
    let mut d_b: Vec<C64> = (0..n).map(|_| draw_real(rng)).collect();
    if cfg.complex_pairs {
        let mut i = cfg.rank;
        while i + 1 < n {
            let (z, w) = draw_pair(rng);
            d_b[i] = z;
            d_b[i + 1] = w;
            i += 2;
        }
    }
    let mut d_a = d_b.clone();
    for x in d_a.iter_mut().take(cfg.rank) {
        let mut y = draw_real(rng);
        while (y - *x).norm() < 0.05 {
            y = draw_real(rng);
        }
        *x = y;
    }
    if cfg.mode == Mode::Nonpositive && n > 0 {
        let last = n - 1;
        d_b[last] = ZERO;
        if last >= cfg.rank {
            d_a[last] = ZERO;
        }
    }
    (d_a, d_b)
}

/// Seeded deterministic instance with `cond(P) ≤ cond_cap`.
pub fn generate(
    seed: u64,
    n: usize,
    mode: Mode,
    rank: usize,
    cond_cap: f64,
) -> Result<OracleInstance> {
    generate_with(seed, GenConfig::new(n, mode, rank, cond_cap))
}

pub fn generate_with(seed: u64, cfg: GenConfig) -> Result<OracleInstance> {
    if cfg.n == 0 || cfg.n > 64 || cfg.rank > cfg.n || !(cfg.cond_cap >= 1.0) {
        return Err(Error::Invalid(format!(
            "need 1 ≤ n ≤ 64, rank ≤ n, cond_cap ≥ 1 (got n={}, rank={}, cond_cap={})",
            cfg.n, cfg.rank, cfg.cond_cap
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n;
    let (d_a, d_b) = spectra(&cfg, &mut rng);
    for _ in 0..MAX_RETRIES {
        let q1 = random_unitary(n, &mut rng);
        let q2 = random_unitary(n, &mut rng);
        let exps: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let (lo, hi) = exps
            .iter()
            .fold((f64::MAX, f64::MIN), |(l, h), &e| (l.min(e), h.max(e)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        // Spread the scaling exactly over [1, cond_cap].
        let s: Vec<f64> = exps
            .iter()
            .map(|e| cfg.cond_cap.powf((e - lo) / span))
            .collect();
        let p = q1
            .matmul(&CMatrix::from_real_diag(&s))
            .matmul(&q2.adjoint());
        let inv_s: Vec<f64> = s.iter().map(|x| 1.0 / x).collect();
        let p_inv = q2
            .matmul(&CMatrix::from_real_diag(&inv_s))
            .matmul(&q1.adjoint());
        let sv = singular_values(&p)?;
        let cond = sv[0] / sv[n - 1];
        if !(cond <= cfg.cond_cap * (1.0 + 1e-8)) {
            continue;
        }
        let a = p.matmul(&CMatrix::from_diag(&d_a)).matmul(&p_inv);
        let b = p.matmul(&CMatrix::from_diag(&d_b)).matmul(&p_inv);
        let mut terms = Vec::new();
        for j in 0..n {
            let w = d_a[j] - d_b[j];
            if w != ZERO {
                terms.push(RankOneTerm {
                    l: p_inv.row(j).iter().map(|x| x * w).collect(),
                    v: p.col(j),
                });
            }
        }
        return Ok(OracleInstance {
            seed,
            config: cfg,
            p,
            p_inv,
            d_a,
            d_b,
            a,
            b,
            decomposition: RankOneDecomposition { terms },
            cond,
        });
    }
    Err(Error::GenerationFailed(MAX_RETRIES))
}

impl OracleInstance {
    /// Builds an instance directly from spectra and a similarity.
    pub fn from_spectra(p: CMatrix, d_a: Vec<C64>, d_b: Vec<C64>) -> Result<Self> {
        let n = p.n();
        let p_inv = crate::linalg::inverse(&p)?;
        let a = p.matmul(&CMatrix::from_diag(&d_a)).matmul(&p_inv);
        let b = p.matmul(&CMatrix::from_diag(&d_b)).matmul(&p_inv);
        let rank = d_a.iter().zip(&d_b).filter(|(x, y)| x != y).count();
        let mode = if d_a.iter().chain(&d_b).any(|d| d.norm() == 0.0) {
            Mode::Nonpositive
        } else {
            Mode::Negative
        };
        let terms = (0..n)
            .filter(|&j| d_a[j] != d_b[j])
            .map(|j| RankOneTerm {
                l: p_inv.row(j).iter().map(|x| x * (d_a[j] - d_b[j])).collect(),
                v: p.col(j),
            })
            .collect();
        let sv = singular_values(&p)?;
        Ok(OracleInstance {
            seed: 0,
            config: GenConfig::new(n, mode, rank, sv[0] / sv[n - 1]),
            cond: sv[0] / sv[n - 1],
            p,
            p_inv,
            d_a,
            d_b,
            a,
            b,
            decomposition: RankOneDecomposition { terms },
        })
    }

    /// Diagonal instance with `P = I`.
    pub fn diagonal(d_a: &[f64], d_b: &[f64]) -> Result<Self> {
        let c = |d: &[f64]| d.iter().map(|x| C64::new(*x, 0.0)).collect::<Vec<_>>();
        Self::from_spectra(CMatrix::identity(d_a.len()), c(d_a), c(d_b))
    }

    pub fn n(&self) -> usize {
        self.p.n()
    }

    pub fn instances(&self, norm: NormKind) -> Result<(OperatorInstance, OperatorInstance)> {
        Ok((
            OperatorInstance::new(self.a.clone(), norm)?,
            OperatorInstance::new(self.b.clone(), norm)?,
        ))
    }

    /// Number of singular values of `A − B` above `1e−10` relative.
    pub fn measured_rank(&self) -> Result<usize> {
        let sv = singular_values(&(&self.a - &self.b))?;
        let top = sv.first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return Ok(0);
        }
        Ok(sv.iter().filter(|s| **s > 1e-10 * top.max(1.0)).count())
    }

    pub fn to_pair_file(&self, norm: NormKind) -> PairFile {
        PairFile {
            a: self.a.clone(),
            b: self.b.clone(),
            norm,
            decomposition: Some(self.decomposition.clone()),
            spectrum_a: Some(self.d_a.clone()),
            spectrum_b: Some(self.d_b.clone()),
            seed: Some(self.seed),
        }
    }
}

/// `Σ f(d_A,i) − Σ f(d_B,i)`.
pub fn oracle_trace_diff(inst: &OracleInstance, f: &CbfSpec) -> Result<C64> {
    spectral_trace_diff(&inst.d_a, &inst.d_b, f)
}

pub fn spectral_trace_diff(d_a: &[C64], d_b: &[C64], f: &CbfSpec) -> Result<C64> {
    let mut s = ZERO;
    for (x, y) in d_a.iter().zip(d_b) {
        if x != y {
            s += f.eval(*x)? - f.eval(*y)?;
        }
    }
    Ok(s)
}

/// `Σ log(z − d_A,i) − Σ log(z − d_B,i)` with principal logarithms, which is
/// the branch continuous from `+∞` wherever every `z − d` avoids `(−∞, 0]`.
pub fn oracle_xi(inst: &OracleInstance, z: C64) -> Result<C64> {
    spectral_xi(&inst.d_a, &inst.d_b, z)
}

pub fn spectral_xi(d_a: &[C64], d_b: &[C64], z: C64) -> Result<C64> {
    let mut s = ZERO;
    for (x, y) in d_a.iter().zip(d_b) {
        if z == *x || z == *y {
            return Err(Error::SpectrumHit(z));
        }
        if x != y {
            s += (z - x).ln() - (z - y).ln();
        }
    }
    Ok(s)
}

/// `det(zI − A) / det(zI − B)` by LU.
pub fn oracle_delta(inst: &OracleInstance, z: C64) -> Result<C64> {
    let da = det(&inst.a.shifted_from(z));
    let db = det(&inst.b.shifted_from(z));
    if db == ZERO {
        return Err(Error::SpectrumHit(z));
    }
    Ok(da / db)
}

/// `{"matrix": …, "norm": "l2"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub matrix: CMatrix,
    #[serde(default)]
    pub norm: NormKind,
}

/// A pair of matrices with optional structure known by construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairFile {
    pub a: CMatrix,
    pub b: CMatrix,
    #[serde(default)]
    pub norm: NormKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<RankOneDecomposition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_a: Option<Vec<C64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_b: Option<Vec<C64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl PairFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let f: PairFile = serde_json::from_str(&text)?;
        if f.a.n() != f.b.n() {
            return Err(Error::Invalid("pair matrices differ in dimension".into()));
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// The oracle view, when both spectra are present.
    pub fn oracle(&self) -> Option<(Vec<C64>, Vec<C64>)> {
        Some((self.spectrum_a.clone()?, self.spectrum_b.clone()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_and_low_rank() {
        let x = generate(1, 2, Mode::Negative, 1, 50.0).unwrap();
        let y = generate(1, 2, Mode::Negative, 1, 50.0).unwrap();
        assert_eq!(x.a, y.a);
        assert_eq!(x.b, y.b);
        assert_eq!(x.measured_rank().unwrap(), 1);
        assert!(x.decomposition.sum(2).max_abs_diff(&(&x.a - &x.b)) < 1e-12);
        let z = generate(7, 4, Mode::Negative, 0, 50.0).unwrap();
        assert_eq!(z.a, z.b);
        assert_eq!(z.decomposition.rank(), 0);
    }

    #[test]
    fn unit_cap_gives_unitary() {
        let x = generate(3, 5, Mode::Negative, 2, 1.0).unwrap();
        let g = x.p.adjoint().matmul(&x.p);
        assert!(g.max_abs_diff(&CMatrix::identity(5)) < 1e-12);
    }

    #[test]
    fn scalar_oracles() {
        let i = OracleInstance::diagonal(&[-1.0], &[-2.0]).unwrap();
        let atom = CbfSpec::rational(&[(1.0, 1.0)]).unwrap();
        assert!((oracle_trace_diff(&i, &atom).unwrap() - C64::new(1.0 / 6.0, 0.0)).norm() < 1e-15);
        let z = ZERO;
        assert!((oracle_delta(&i, z).unwrap() - C64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((oracle_xi(&i, z).unwrap() + C64::new(2f64.ln(), 0.0)).norm() < 1e-15);
        let p = OracleInstance::diagonal(&[-2.0], &[-4.0]).unwrap();
        let psi = CbfSpec::psi(2.0).unwrap();
        assert!((oracle_trace_diff(&p, &psi).unwrap() - C64::new(1.5f64.ln(), 0.0)).norm() < 1e-14);
        let r = OracleInstance::diagonal(&[-1.0, -1.0], &[-1.0, 0.0]).unwrap();
        assert!(
            (oracle_xi(&r, C64::new(1.0, 0.0)).unwrap() - C64::new(2f64.ln(), 0.0)).norm() < 1e-15
        );
        assert_eq!(r.config.mode, Mode::Nonpositive);
    }

    #[test]
    fn nonpositive_has_zero() {
        let x = generate(2, 4, Mode::Nonpositive, 2, 10.0).unwrap();
        assert!(x.d_b.contains(&ZERO));
    }

    #[test]
    fn pair_file_round_trip() {
        let x = generate(5, 3, Mode::Negative, 2, 5.0).unwrap();
        let f = x.to_pair_file(NormKind::L2);
        let text = serde_json::to_string(&f).unwrap();
        let g: PairFile = serde_json::from_str(&text).unwrap();
        assert_eq!(g.a, x.a);
        assert_eq!(g.decomposition.unwrap().rank(), 2);
    }
}
