//! Command-line front end. Every subcommand writes one JSON report (or CSV
//! table) and maps its outcome to the exit status: 0 pass, 1 I/O, 2 refused
//! hypothesis, 3 numerical failure or a failed check.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::calculus::{
    check_commutator, check_commuting_vector, check_difference_norm, check_difference_nuclear,
    check_vector_bounds, Ideal,
};
use crate::cbf::CbfSpec;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, NormKind, C64};
use crate::operator::{build_sector, Mode, OperatorInstance};
use crate::oracle::{
    generate_with, seeded_unitary, seeded_vector, spectral_trace_diff, spectral_xi, GenConfig,
    PairFile,
};
use crate::shift::{product_formula, RankOneDecomposition, ShiftEvaluator, XI_TOL};
use crate::trace::{affine_limit, lk_negative, lk_nonpositive, negative_pair, DEFAULT_EPS};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_FAIL: i32 = 3;

pub const SCHEMA: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "specshift",
    version,
    about = "Spectral shift functions and trace formulas for matrix pairs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check tr(φ(A) − φ(B)) = (1/2πi)∮ ξ φ′ dz for a negative pair.
    VerifyLk(VerifyLk),
    /// Tabulate η, ξ and Δ along a ray.
    /// CSV columns: z_re,z_im,eta_re,eta_im,xi_re,xi_im,delta_re,delta_im.
    ShiftTable(ShiftTable),
    /// Product formula factors for a finite rank-one decomposition.
    DetProduct(DetProduct),
    /// ε-regularized formula for a nonpositive pair.
    /// CSV columns: eps,value_re,value_im,err.
    VerifyNonpositive(VerifyNonpositive),
    /// λ²η(λ) against tr(A − B) along a λ sequence.
    /// CSV columns: lambda,value_re,value_im,err.
    AffineLimit(AffineLimit),
    /// Perturbation, vector and commutator inequalities.
    Bounds(Bounds),
    /// Export a seeded oracle pair.
    GenInstance(GenInstance),
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum ModeArg {
    Negative,
    Nonpositive,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Negative => Mode::Negative,
            ModeArg::Nonpositive => Mode::Nonpositive,
        }
    }
}

/// Where the pair comes from: a file, or a seeded oracle instance.
#[derive(Args, Debug, Clone)]
pub struct Source {
    /// Pair file with matrices `a`, `b` and optional decomposition/spectra.
    #[arg(long, conflicts_with_all = ["seed", "n", "rank"])]
    pub pair: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Negative)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 50.0)]
    pub cond_cap: f64,
    /// Norm used for all operator constants.
    #[arg(long, default_value = "l2")]
    pub norm: NormKind,
}

#[derive(Args, Debug, Clone)]
pub struct Output {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct VerifyLk {
    #[command(flatten)]
    pub source: Source,
    /// `rational:t,w;…`, `psi:λ`, `power:α` or `remark43`.
    #[arg(long)]
    pub function: String,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct ShiftTable {
    #[command(flatten)]
    pub source: Source,
    /// Ray angle in radians; 0 gives the positive real axis.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub angle: f64,
    #[arg(long, default_value_t = 0.1)]
    pub from: f64,
    #[arg(long, default_value_t = 100.0)]
    pub to: f64,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    /// Agreement required with the spectral oracle when spectra are known.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct DetProduct {
    #[command(flatten)]
    pub source: Source,
    /// Evaluation points; defaults to 2λ₀·{1, 4, 16}.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct VerifyNonpositive {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub function: String,
    #[arg(long, value_delimiter = ',')]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct AffineLimit {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_delimiter = ',', default_values_t = [1e2, 1e3, 1e4])]
    pub lambdas: Vec<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct Bounds {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub function: String,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct GenInstance {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Negative)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 50.0)]
    pub cond_cap: f64,
    /// Place conjugate pairs in the shared part of the spectrum.
    #[arg(long)]
    pub complex_pairs: bool,
    #[arg(long, default_value = "l2")]
    pub norm: NormKind,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cx(z: C64) -> Value {
    json!({"re": z.re, "im": z.im})
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "tolerance must be positive, got {tol}"
        )))
    }
}

impl Source {
    fn load(&self) -> Result<PairFile> {
        match &self.pair {
            Some(path) => PairFile::load(path),
            None => {
                let cfg = GenConfig::new(self.n, self.mode.into(), self.rank, self.cond_cap);
                Ok(generate_with(self.seed, cfg)?.to_pair_file(self.norm))
            }
        }
    }

    fn norm(&self, file: &PairFile) -> NormKind {
        if self.pair.is_some() {
            file.norm
        } else {
            self.norm
        }
    }
}

/// What a subcommand produced.
struct Outcome {
    report: Value,
    csv: Option<String>,
    pass: bool,
}

fn emit(out: &Output, o: &Outcome) -> Result<()> {
    let text = match (out.format, &o.csv) {
        (Format::Csv, Some(csv)) => csv.clone(),
        _ => serde_json::to_string_pretty(&o.report)? + "\n",
    };
    match &out.out {
        Some(p) => std::fs::write(p, text)?,
        None => write_stdout(&text)?,
    }
    Ok(())
}

fn write_stdout(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::HypothesisViolated(_) => EXIT_HYPOTHESIS,
        _ => EXIT_FAIL,
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("SPECSHIFT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // A second configuration attempt in the same process is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FAIL } else { EXIT_PASS };
        }
    };
    configure_threads();
    match run(&cli.command) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("specshift: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cmd: &Command) -> Result<bool> {
    let (out, outcome) = match cmd {
        Command::VerifyLk(c) => (&c.output, verify_lk(c)?),
        Command::ShiftTable(c) => (&c.output, shift_table(c)?),
        Command::DetProduct(c) => (&c.output, det_product(c)?),
        Command::VerifyNonpositive(c) => (&c.output, verify_nonpositive(c)?),
        Command::AffineLimit(c) => (&c.output, affine(c)?),
        Command::Bounds(c) => (&c.output, bounds(c)?),
        Command::GenInstance(c) => return gen_instance(c).map(|_| true),
    };
    emit(out, &outcome)?;
    Ok(outcome.pass)
}

fn verify_lk(c: &VerifyLk) -> Result<Outcome> {
    check_tol(c.tol)?;
    let f = CbfSpec::parse(&c.function)?;
    crate::trace::check_hypotheses(&f)?;
    let file = c.source.load()?;
    let norm = c.source.norm(&file);
    let ev = negative_pair(file.a.clone(), file.b.clone(), norm)?;
    let r = lk_negative(&f, &ev, c.tol)?;
    let oracle = match file.oracle() {
        Some((da, db)) => Some(spectral_trace_diff(&da, &db, &f)?),
        None => None,
    };
    let report = json!({
        "schema": SCHEMA,
        "command": "verify-lk",
        "function": r.function,
        "lhs": cx(r.lhs),
        "rhs": cx(r.rhs),
        "abs_err": r.abs_err,
        "rel_err": r.rel_err,
        "r_trunc": r.r_trunc,
        "tail_est": r.tail_est,
        "closure_mismatch": r.closure_mismatch,
        "oracle": oracle.map(cx),
        "tol": r.tol,
        "pass": r.pass,
    });
    let csv = format!(
        "lhs_re,lhs_im,rhs_re,rhs_im,abs_err,rel_err,r_trunc,tail_est,pass\n{:.15e},{:.15e},{:.15e},{:.15e},{:.6e},{:.6e},{:.6e},{:.6e},{}\n",
        r.lhs.re, r.lhs.im, r.rhs.re, r.rhs.im, r.abs_err, r.rel_err, r.r_trunc, r.tail_est, r.pass
    );
    Ok(Outcome {
        report,
        csv: Some(csv),
        pass: r.pass,
    })
}

fn evaluator(source: &Source) -> Result<(PairFile, ShiftEvaluator)> {
    let file = source.load()?;
    let norm = source.norm(&file);
    let a = OperatorInstance::new(file.a.clone(), norm)?;
    let b = OperatorInstance::new(file.b.clone(), norm)?;
    let g = build_sector(&a, &b)?;
    let ev = ShiftEvaluator::new(a, b, g)?;
    Ok((file, ev))
}

fn shift_table(c: &ShiftTable) -> Result<Outcome> {
    check_tol(c.tol)?;
    if !(c.from > 0.0 && c.to > c.from && c.points >= 2) {
        return Err(Error::Invalid(
            "need 0 < from < to and at least two points".into(),
        ));
    }
    let (file, ev) = evaluator(&c.source)?;
    let dir = C64::from_polar(1.0, c.angle);
    let oracle = file.oracle();
    let mut csv = String::from("z_re,z_im,eta_re,eta_im,xi_re,xi_im,delta_re,delta_im\n");
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for k in 0..c.points {
        let r = c.from * (c.to / c.from).powf(k as f64 / (c.points - 1) as f64);
        let z = dir * r;
        let eta = ev.eta(z)?;
        let d = ev.delta(z, XI_TOL)?;
        if let Some((da, db)) = &oracle {
            worst = worst.max((d.xi - spectral_xi(da, db, z)?).norm());
        }
        let _ = writeln!(
            csv,
            "{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}",
            z.re, z.im, eta.re, eta.im, d.xi.re, d.xi.im, d.delta.re, d.delta.im
        );
        rows.push(json!({"z": cx(z), "eta": cx(eta), "xi": cx(d.xi), "delta": cx(d.delta)}));
    }
    let checked = oracle.is_some();
    let pass = !checked || worst <= c.tol;
    Ok(Outcome {
        report: json!({
            "schema": SCHEMA,
            "command": "shift-table",
            "rows": rows,
            "oracle_checked": checked,
            "max_oracle_err": worst,
            "tol": c.tol,
            "pass": pass,
        }),
        csv: Some(csv),
        pass,
    })
}

fn det_product(c: &DetProduct) -> Result<Outcome> {
    check_tol(c.tol)?;
    let (file, ev) = evaluator(&c.source)?;
    let decomp = match &file.decomposition {
        Some(d) => d.clone(),
        None => RankOneDecomposition::from_difference(ev.difference())?,
    };
    let lambda0 = ev.geom.m_prime_b * decomp.nuclear_bound(ev.b.norm);
    let lambdas: Vec<f64> = if c.lambda.is_empty() {
        [1.0, 4.0, 16.0]
            .iter()
            .map(|k| (2.0 * lambda0).max(1.0) * k)
            .collect()
    } else {
        c.lambda.clone()
    };
    let exact = decomp.sum(ev.a.n()).max_abs_diff(ev.difference());
    let mut rows = Vec::new();
    let mut csv = String::from("lambda,total_re,total_im,xi_re,xi_im,err,resolvent_err\n");
    let mut pass = exact <= 1e-12 * ev.difference().max_abs().max(1.0);
    for &l in &lambdas {
        let z = C64::new(l, 0.0);
        let p = product_formula(&ev.b, ev.geom.m_prime_b, &decomp, z)?;
        let xi = ev.xi_real(l, XI_TOL)?;
        let err = (p.total - xi).norm();
        let fresh = ev.a.resolvent(z)?;
        let res_err = p
            .resolvent
            .as_ref()
            .map_or(f64::INFINITY, |r| r.max_abs_diff(&fresh));
        pass &= err <= c.tol && res_err <= 1e-10;
        let _ = writeln!(
            csv,
            "{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.6e},{:.6e}",
            l, p.total.re, p.total.im, xi.re, xi.im, err, res_err
        );
        rows.push(json!({
            "lambda": l,
            "factors": p.factors.iter().map(|f| cx(*f)).collect::<Vec<_>>(),
            "total": cx(p.total),
            "xi": cx(xi),
            "abs_err": err,
            "resolvent_err": res_err,
        }));
    }
    Ok(Outcome {
        report: json!({
            "schema": SCHEMA,
            "command": "det-product",
            "rank": decomp.rank(),
            "lambda0": lambda0,
            "decomposition_err": exact,
            "rows": rows,
            "tol": c.tol,
            "pass": pass,
        }),
        csv: Some(csv),
        pass,
    })
}

fn verify_nonpositive(c: &VerifyNonpositive) -> Result<Outcome> {
    check_tol(c.tol)?;
    let f = CbfSpec::parse(&c.function)?;
    crate::trace::check_hypotheses(&f)?;
    let file = c.source.load()?;
    let norm = c.source.norm(&file);
    let a = OperatorInstance::new(file.a.clone(), norm)?;
    let b = OperatorInstance::new(file.b.clone(), norm)?;
    let eps = if c.eps.is_empty() {
        DEFAULT_EPS.to_vec()
    } else {
        c.eps.clone()
    };
    let r = lk_nonpositive(&f, &a, &b, c.tol, &eps)?;
    let mut csv = String::from("eps,value_re,value_im,err\n");
    for row in &r.rows {
        let _ = writeln!(
            csv,
            "{:.6e},{:.15e},{:.15e},{:.6e}",
            row.eps, row.value.re, row.value.im, row.err
        );
    }
    Ok(Outcome {
        report: json!({
            "schema": SCHEMA,
            "command": "verify-nonpositive",
            "function": r.function,
            "lhs": cx(r.lhs),
            "rows": r.rows.iter().map(|x| json!({"eps": x.eps, "value": cx(x.value), "err": x.err})).collect::<Vec<_>>(),
            "extrapolated": cx(r.extrapolated),
            "monotone": r.monotone,
            "final_err": r.final_err,
            "tol": r.tol,
            "pass": r.pass,
        }),
        csv: Some(csv),
        pass: r.pass,
    })
}

fn affine(c: &AffineLimit) -> Result<Outcome> {
    check_tol(c.tol)?;
    let file = c.source.load()?;
    let norm = c.source.norm(&file);
    let ev = negative_pair(file.a.clone(), file.b.clone(), norm)?;
    let r = affine_limit(&ev, &c.lambdas, c.tol)?;
    let mut csv = String::from("lambda,value_re,value_im,err\n");
    for row in &r.rows {
        let _ = writeln!(
            csv,
            "{:.6e},{:.15e},{:.15e},{:.6e}",
            row.lambda, row.direct.re, row.direct.im, row.err
        );
    }
    Ok(Outcome {
        report: json!({
            "schema": SCHEMA,
            "command": "affine-limit",
            "trace": cx(r.trace),
            "rows": r.rows.iter().map(|x| json!({
                "lambda": x.lambda,
                "direct": cx(x.direct),
                "contour": cx(x.contour),
                "err": x.err,
                "bound": x.bound,
            })).collect::<Vec<_>>(),
            "ratios": r.ratios,
            "constant": r.constant,
            "routes_agree": r.routes_agree,
            "within_bound": r.within_bound,
            "rate_ok": r.rate_ok,
            "tol": c.tol,
            "pass": r.pass,
        }),
        csv: Some(csv),
        pass: r.pass,
    })
}

fn bounds(c: &Bounds) -> Result<Outcome> {
    check_tol(c.tol)?;
    let f = CbfSpec::parse(&c.function)?;
    let file = c.source.load()?;
    let norm = c.source.norm(&file);
    let a = OperatorInstance::new(file.a.clone(), norm)?;
    let b = OperatorInstance::new(file.b.clone(), norm)?;
    let n = a.n();
    let x = seeded_vector(c.source.seed ^ 0x5eed, n);
    let mut reports = vec![serde_json::to_value(check_difference_norm(
        &f, &a, &b, c.tol,
    )?)?];
    let mut pass = reports[0]["pass"].as_bool().unwrap_or(false);
    let mut push = |v: Value| {
        pass &= v["pass"].as_bool().unwrap_or(false);
        reports.push(v);
    };
    match check_difference_nuclear(&f, &a, &b, c.tol) {
        Ok(r) => push(serde_json::to_value(r)?),
        Err(Error::UnsupportedNorm | Error::HypothesisViolated(_)) => {}
        Err(e) => return Err(e),
    }
    match check_commuting_vector(&f, &a, &b, &x, c.tol) {
        Ok(r) => push(serde_json::to_value(r)?),
        Err(Error::NotCommuting(_)) => {}
        Err(e) => return Err(e),
    }
    let (v1, v2) = check_vector_bounds(&f, &a, &x, c.tol)?;
    push(serde_json::to_value(v1)?);
    push(serde_json::to_value(v2)?);
    if f.derivative_at_zero_minus().finite().is_some() {
        let u = seeded_unitary(c.source.seed ^ 0xc0, n);
        let r = check_commutator(&f, &a, &u, Ideal::Operator, c.tol)?;
        let mut v = serde_json::to_value(&r)?;
        v["name"] = json!("commutator");
        push(v);
    }
    Ok(Outcome {
        report: json!({
            "schema": SCHEMA,
            "command": "bounds",
            "function": f.name,
            "reports": reports,
            "pass": pass,
        }),
        csv: None,
        pass,
    })
}

fn gen_instance(c: &GenInstance) -> Result<()> {
    let cfg = GenConfig {
        n: c.n,
        mode: c.mode.into(),
        rank: c.rank,
        cond_cap: c.cond_cap,
        complex_pairs: c.complex_pairs,
    };
    let file = generate_with(c.seed, cfg)?.to_pair_file(c.norm);
    match &c.out {
        Some(p) => file.save(p),
        None => write_stdout(&(serde_json::to_string_pretty(&file)? + "\n")),
    }
}

/// Matrix pair for callers that build files by hand.
pub fn pair_file(a: CMatrix, b: CMatrix, norm: NormKind) -> PairFile {
    PairFile {
        a,
        b,
        norm,
        decomposition: None,
        spectrum_a: None,
        spectrum_b: None,
        seed: None,
    }
}
