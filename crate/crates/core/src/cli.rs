//! Command-line front end. `main` only parses arguments and maps errors to
//! exit codes; everything else is here so it can be tested in-process.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::exec::Mode;
use crate::lfun::{euler_factor_check, unit_moment_by_subtraction, LfunError, PadicMeasure};
use crate::lift::{Case, Checkpoint, FinishedLift, LedgerEntry, LiftError, LiftOptions, LiftPlan, Lifter, VerifyReport};
use crate::manin::p1::num_cusps;
use crate::manin::{cuspidal_eigensymbols, EigenSymbol, ManinError, SymbolSpace};
use crate::padic::{is_prime, set_binom_sign_fault};
use crate::selftest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Precondition(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => 2,
            CliError::Precondition(_) => 3,
        }
    }
}

impl From<LiftError> for CliError {
    fn from(e: LiftError) -> Self {
        CliError::Precondition(format!("lift: {e}"))
    }
}

impl From<ManinError> for CliError {
    fn from(e: ManinError) -> Self {
        CliError::Precondition(format!("symbols: {e}"))
    }
}

impl From<LfunError> for CliError {
    fn from(e: LfunError) -> Self {
        CliError::Precondition(format!("measure: {e}"))
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Precondition(format!("{}: {e}", path.display()))
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "padiclf", version, about = "p-adic L-functions from overconvergent modular symbols")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Size of the Manin presentation and of the symbol space.
    Space(SpaceArgs),
    /// Rational cuspidal Hecke eigensystems.
    Eigen(EigenArgs),
    /// Lift an eigensymbol and write a checkpoint.
    Lift(LiftArgs),
    /// Class moment table of a finished lift.
    Moments(MomentsArgs),
    /// Teichmüller-twisted values and Euler factor checks.
    Lvalue(LvalueArgs),
    /// Run the pinned-seed property corpus.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SpaceArgs {
    #[arg(long)]
    pub level: u64,
    #[arg(long, default_value_t = 2)]
    pub weight: u32,
}

#[derive(Debug, Clone, Args)]
pub struct EigenArgs {
    #[arg(long)]
    pub level: u64,
    #[arg(long, default_value_t = 2)]
    pub weight: u32,
    #[arg(long, default_value_t = 13)]
    pub hecke_bound: u64,
    #[arg(long, default_value_t = 0)]
    pub eigen_index: usize,
    /// Write the selected eigensymbol in text form.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaseArg {
    Auto,
    Ordinary,
    Supersingular,
    Semistable,
}

impl CaseArg {
    fn to_case(self) -> Option<Case> {
        match self {
            CaseArg::Auto => None,
            CaseArg::Ordinary => Some(Case::Ordinary),
            CaseArg::Supersingular => Some(Case::Supersingular),
            CaseArg::Semistable => Some(Case::Semistable),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct LiftArgs {
    #[arg(long)]
    pub level: u64,
    #[arg(long, default_value_t = 2)]
    pub weight: u32,
    #[arg(long)]
    pub p: u64,
    #[arg(long)]
    pub depth: u32,
    #[arg(long, default_value_t = 13)]
    pub hecke_bound: u64,
    #[arg(long, value_enum, default_value_t = CaseArg::Auto)]
    pub case: CaseArg,
    #[arg(long, default_value_t = 0)]
    pub eigen_index: usize,
    /// Verification report (JSON); stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Written after every round; an unfinished checkpoint is resumed.
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub class_exponent: u32,
    #[arg(long, default_value_t = 4)]
    pub jmax: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LvalueArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Power `i` of the Teichmüller character.
    #[arg(long, default_value_t = 0)]
    pub twist: u64,
    #[arg(long, default_value_t = 4)]
    pub jmax: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    BinomSign,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = selftest::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<Fault>,
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => writeln!(out, "{text}").map_err(|e| CliError::Precondition(e.to_string())),
    }
}

fn check_space(level: u64, k: u32) -> Result<()> {
    if level == 0 {
        return Err(CliError::Precondition("level must be positive".into()));
    }
    if k < 2 {
        return Err(CliError::Precondition("weight must be at least 2".into()));
    }
    if k % 2 == 1 {
        eprintln!("warning: odd weight {k} has no nonzero symbols with trivial character");
    }
    Ok(())
}

fn select(level: u64, k: u32, bound: u64, index: usize) -> Result<EigenSymbol> {
    let space = SymbolSpace::for_level(level, k);
    let mut all = cuspidal_eigensymbols(&space, bound)?;
    if index >= all.len() {
        return Err(CliError::Precondition(format!(
            "eigen index {index} out of range: {} rational cuspidal eigensystems",
            all.len()
        )));
    }
    Ok(all.swap_remove(index))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Space(a) => cmd_space(&a, out),
        Command::Eigen(a) => cmd_eigen(&a, out),
        Command::Lift(a) => cmd_lift(&a, out),
        Command::Moments(a) => cmd_moments(&a, out),
        Command::Lvalue(a) => cmd_lvalue(&a, out),
        Command::Selftest(a) => cmd_selftest(&a, out),
    }
}

pub fn cmd_space(a: &SpaceArgs, out: &mut dyn Write) -> Result<()> {
    check_space(a.level, a.weight)?;
    let space = SymbolSpace::for_level(a.level, a.weight);
    let pres = space.presentation();
    let text = format!(
        "level {}\nweight {}\ncosets {}\ngenerators {}\nrelations {}\ncusps {}\ndimension {}\ncuspidal dimension {}",
        a.level,
        a.weight,
        pres.num_generators(),
        pres.num_generators(),
        pres.relations().len(),
        num_cusps(a.level),
        space.dimension(),
        space.cuspidal_dimension()
    );
    emit(out, None, &text)
}

pub fn cmd_eigen(a: &EigenArgs, out: &mut dyn Write) -> Result<()> {
    check_space(a.level, a.weight)?;
    let space = SymbolSpace::for_level(a.level, a.weight);
    let all = cuspidal_eigensymbols(&space, a.hecke_bound)?;
    let mut text = String::new();
    for (i, e) in all.iter().enumerate() {
        let evs: Vec<String> = e.eigenvalues.iter().map(|(l, v)| format!("a{l}={v}")).collect();
        text.push_str(&format!("{i}: {} multiplicity {} scale {}\n", evs.join(" "), e.multiplicity, e.scale));
    }
    if all.is_empty() {
        text.push_str("no cuspidal eigensystems\n");
    }
    emit(out, None, text.trim_end())?;
    if let Some(path) = &a.out {
        let e = all.get(a.eigen_index).ok_or_else(|| CliError::Precondition(format!("eigen index {} out of range", a.eigen_index)))?;
        fs::write(path, e.symbol.to_text()).map_err(|err| io_err(path, err))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct LiftReport {
    level: u64,
    k: u32,
    p: u64,
    case: Case,
    a_p: String,
    d: usize,
    plan: LiftPlan,
    rounds: u32,
    ledger: Vec<LedgerEntry>,
    verify: VerifyReport,
}

fn write_checkpoint(path: &Path, cp: &Checkpoint) -> Result<()> {
    let json = serde_json::to_string(cp).map_err(|e| io_err(path, e))?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, json).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

pub fn cmd_lift(a: &LiftArgs, out: &mut dyn Write) -> Result<()> {
    check_space(a.level, a.weight)?;
    if !is_prime(a.p) {
        return Err(CliError::Precondition(format!("{} is not prime", a.p)));
    }
    if a.depth == 0 {
        return Err(CliError::Precondition("depth must be at least 1".into()));
    }
    let eig = select(a.level, a.weight, a.hecke_bound, a.eigen_index)?;
    let psi = &eig.symbol;
    let fresh = Lifter::for_prime(psi, a.p, a.case.to_case(), a.depth, LiftOptions::default())?;

    let resumable = a
        .checkpoint
        .exists()
        .then(|| read_checkpoint(&a.checkpoint))
        .transpose()?
        .filter(|cp| cp.result.is_none() && cp.plan == fresh.plan && cp.classical == psi.to_text() && cp.p == a.p);
    let (mut lifter, state) = match resumable {
        Some(cp) => {
            eprintln!("resuming at round {}", cp.round);
            cp.resume(Mode::Parallel)?
        }
        None => {
            let s = fresh.initial_state();
            (fresh, s)
        }
    };

    let mut cp = Checkpoint::new(&lifter, psi, &eig.scale, &state);
    let mut state = state;
    while state.round < lifter.plan.n_star {
        state = lifter.step(&state);
        cp.round = state.round;
        cp.state = crate::lift::values_to_repr(&state.values);
        cp.ledger.clone_from(&lifter.ledger);
        write_checkpoint(&a.checkpoint, &cp)?;
    }
    let phi = lifter.finish(&state)?;
    let report = lifter.verify(&phi);
    cp.result = Some(FinishedLift {
        den_exp: phi.den_exp,
        m_achieved: phi.m_achieved,
        values: crate::lift::values_to_repr(&phi.values),
        report,
    });
    write_checkpoint(&a.checkpoint, &cp)?;

    let params = lifter.setup.params;
    let rep = LiftReport {
        level: a.level,
        k: a.weight,
        p: a.p,
        case: params.case,
        a_p: lifter.setup.a_p.to_string(),
        d: params.d,
        plan: lifter.plan,
        rounds: state.round,
        ledger: lifter.ledger.clone(),
        verify: report,
    };
    let json = serde_json::to_string_pretty(&rep).expect("serializable");
    emit(out, a.out.as_deref(), &json)?;
    if !report.ok() || !lifter.ledger.iter().all(LedgerEntry::ok) {
        return Err(CliError::Invariant(format!("lift verification failed: {report:?}")));
    }
    Ok(())
}

fn load_finished(path: &Path) -> Result<(Checkpoint, crate::lift::OverconvergentSymbol)> {
    if !path.exists() {
        return Err(CliError::Precondition(format!("{}: no such checkpoint", path.display())));
    }
    let cp = read_checkpoint(path)?;
    let (lifter, _) = cp.resume(Mode::Parallel)?;
    let phi = cp.overconvergent(&lifter)?;
    Ok((cp, phi))
}

fn normalization(cp: &Checkpoint) -> String {
    format!("primitive integral eigensymbol = {} * rref eigenvector", cp.eigen_scale)
}

pub fn cmd_moments(a: &MomentsArgs, out: &mut dyn Write) -> Result<()> {
    let (cp, phi) = load_finished(&a.checkpoint)?;
    let measure = PadicMeasure::new(&phi, a.class_exponent, a.jmax, &normalization(&cp), Mode::Parallel)?;
    let mut failures = Vec::new();
    if a.class_exponent >= 2 {
        let coarse = PadicMeasure::new(&phi, a.class_exponent - 1, a.jmax, "", Mode::Parallel)?;
        if !measure.refines(&coarse)? {
            failures.push(format!("classes mod p^{} do not add up to p^{}", a.class_exponent, a.class_exponent - 1));
        }
    }
    for j in 0..=a.jmax {
        let sum = measure.class_sum(j)?;
        let other = unit_moment_by_subtraction(&phi, j)?;
        let agree = |x: &[crate::padic::ScaledScalar], y: &[crate::padic::ScaledScalar]| {
            x.iter().zip(y).all(|(u, v)| u.agrees_with(v).unwrap_or(false))
        };
        if !agree(&sum, &measure.unit_moments[j]) {
            failures.push(format!("class sum differs from unit moment {j}"));
        }
        if !agree(&other, &measure.unit_moments[j]) {
            failures.push(format!("unit moment {j} differs between routes"));
        }
    }
    let json = serde_json::to_string(&measure.to_json()).expect("serializable");
    emit(out, a.out.as_deref(), &json)?;
    if !failures.is_empty() {
        return Err(CliError::Invariant(failures.join("; ")));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct TwistReport {
    p: u64,
    k: u32,
    twist: u64,
    den_exp: u32,
    /// `values[j]` is the `d`-tuple for `z^j`.
    values: Vec<Vec<crate::padic::ScalarRepr>>,
    euler: Vec<EulerLine>,
}

#[derive(Debug, Serialize)]
struct EulerLine {
    j: usize,
    identity_holds: bool,
    factor: crate::padic::ScalarRepr,
    factor_den_exp: u32,
    ordinary_factor_agrees: Option<bool>,
}

pub fn cmd_lvalue(a: &LvalueArgs, out: &mut dyn Write) -> Result<()> {
    let (cp, phi) = load_finished(&a.checkpoint)?;
    let measure = PadicMeasure::new(&phi, 1, a.jmax, &normalization(&cp), Mode::Parallel)?;
    let values: Vec<_> = (0..=a.jmax).map(|j| measure.twist_value(a.twist, j)).collect::<std::result::Result<_, _>>()?;
    let den = values.iter().flatten().map(|x| x.den_exp).max().unwrap_or(0);
    let values = values
        .iter()
        .map(|m| m.iter().map(|x| x.lift_to(den).expect("same prime").to_pair()).collect())
        .collect();
    let mut euler = Vec::new();
    let mut failed = false;
    if phi.setup.case() != Case::Semistable {
        for j in 0..=(cp.k as usize - 2) {
            let r = euler_factor_check(&phi.setup, j)?;
            failed |= !r.identity_holds || r.ordinary_factor_agrees == Some(false);
            euler.push(EulerLine {
                j,
                identity_holds: r.identity_holds,
                factor: r.factor.value.to_pair(),
                factor_den_exp: r.factor.den_exp,
                ordinary_factor_agrees: r.ordinary_factor_agrees,
            });
        }
    }
    let rep = TwistReport { p: cp.p, k: cp.k, twist: a.twist % (cp.p - 1), den_exp: den, values, euler };
    emit(out, a.out.as_deref(), &serde_json::to_string(&rep).expect("serializable"))?;
    if failed {
        return Err(CliError::Invariant("Euler factor identity".into()));
    }
    Ok(())
}

pub fn cmd_selftest(a: &SelftestArgs, out: &mut dyn Write) -> Result<()> {
    set_binom_sign_fault(a.inject_fault == Some(Fault::BinomSign));
    let results = selftest::run_all(a.seed);
    set_binom_sign_fault(false);
    let mut failed = 0;
    for r in &results {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        let line = match &r.first_failure {
            Some(f) => format!("{status} {} ({}/{} failed; first: {f})", r.name, r.failures, r.cases),
            None => format!("{status} {} ({} cases)", r.name, r.cases),
        };
        emit(out, None, &line)?;
        failed += usize::from(!r.passed());
    }
    if failed > 0 {
        return Err(CliError::Invariant(format!("{failed} self-test checks failed")));
    }
    Ok(())
}
