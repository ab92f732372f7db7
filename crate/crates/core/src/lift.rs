//! Overconvergent lifting of a classical eigensymbol by `U_p` iteration.
//!
//! A classical eigensymbol `Ψ` of level `N` gives a symbol `Φ` with values in
//! `Q_p[X]_{k-2} ⊗ D` satisfying `U_p Φ = (1 ⊗ φ^{-1}) Φ`. Any integral lift
//! `Φ_0` of `Φ` to distributions converges under `Φ ↦ (1 ⊗ φ^h) U_p^h Φ` to
//! the unique eigen-lift `Φ_∞`, losing at most `λ` digits per round to the
//! denominators of `φ^h` while gaining `h(k-1)` from the contraction of
//! `U_p` on `Fil^0`.
//!
//! The iteration runs on the integral symbol `Φ̄_n = p^{r0+λn} Φ_n`, so all
//! arithmetic stays inside `Z/p^W`.

use std::sync::Arc;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Mode};
use crate::manin::{operator_pieces, ClassicalSymbol, ManinError, Presentation, Q};
use crate::moments::{ActionMatrix, IntMatrix2, MomentDistribution, MomentError, MomentRepr};
use crate::padic::{quadratic_unit_root, PadicContext, PadicError, PadicScalar, ScaledScalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LiftError {
    #[error("case hypothesis violated: {0}")]
    CaseHypothesisViolated(String),
    #[error("no convergence: lambda = {lambda} >= h(k-1) = {bound}")]
    LedgerStall { lambda: u32, bound: u32 },
    #[error("p-adic denominators of the initial symbol cannot be cleared")]
    NonIntegralAfterScaling,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Manin(#[from] ManinError),
}

pub type Result<T> = std::result::Result<T, LiftError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Ordinary,
    Supersingular,
    Semistable,
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Case::Ordinary => "ordinary",
            Case::Supersingular => "supersingular",
            Case::Semistable => "semistable",
        };
        f.write_str(s)
    }
}

/// Case data that does not depend on the working precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseParams {
    pub case: Case,
    pub p: u64,
    pub k: u32,
    pub d: usize,
    pub h: u32,
    pub lambda: u32,
}

fn ord_p(q: &BigRational, p: u64) -> Option<i64> {
    if q.is_zero() {
        return None;
    }
    let pb = BigInt::from(p);
    let f = |x: &BigInt| {
        let mut x = x.abs();
        let mut v = 0i64;
        while (&x % &pb).is_zero() {
            x /= &pb;
            v += 1;
        }
        v
    };
    Some(f(q.numer()) - f(q.denom()))
}

/// Chooses (or validates) the case for `a_p` at the given level.
pub fn case_parameters(case: Option<Case>, p: u64, k: u32, a_p: &BigRational, level: u64) -> Result<CaseParams> {
    let v = ord_p(a_p, p);
    let case = case.unwrap_or_else(|| {
        if level % p == 0 {
            Case::Semistable
        } else if v.is_some_and(|v| 2 * v < k as i64 - 1) {
            Case::Ordinary
        } else {
            Case::Supersingular
        }
    });
    let bad = |m: String| Err(LiftError::CaseHypothesisViolated(m));
    if !a_p.is_integer() {
        return bad(format!("a_p = {a_p} is not an integer"));
    }
    match case {
        Case::Ordinary => {
            if level % p == 0 {
                return bad(format!("p = {p} divides the level"));
            }
            match v {
                Some(v) if 2 * v < k as i64 - 1 => Ok(CaseParams { case, p, k, d: 1, h: 1, lambda: v as u32 }),
                _ => bad(format!("ord_p(a_p) >= (k-1)/2 for a_p = {a_p}")),
            }
        }
        Case::Supersingular => {
            if level % p == 0 {
                return bad(format!("p = {p} divides the level"));
            }
            let m = v.map_or(k as i64 - 1, |v| v.min(k as i64 - 1));
            Ok(CaseParams { case, p, k, d: 2, h: 2, lambda: (2 * (k as i64 - 1) - m) as u32 })
        }
        Case::Semistable => {
            if level % p != 0 || (level / p) % p == 0 {
                return bad(format!("p = {p} must exactly divide the level {level}"));
            }
            if a_p.abs() != BigRational::one() {
                return bad(format!("a_p = {a_p} is not +1 or -1"));
            }
            Ok(CaseParams { case, p, k, d: 1, h: 1, lambda: 0 })
        }
    }
}

/// Matrices over `p^{-e} Z_p`, used for `φ`.
pub type ScaledMatrix = Vec<Vec<ScaledScalar>>;

pub fn smat_identity(d: usize, ctx: &PadicContext) -> ScaledMatrix {
    (0..d)
        .map(|i| (0..d).map(|j| ScaledScalar::integral(if i == j { ctx.one() } else { ctx.zero() })).collect())
        .collect()
}

pub fn smat_mul(a: &ScaledMatrix, b: &ScaledMatrix) -> std::result::Result<ScaledMatrix, PadicError> {
    let d = a.len();
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let mut row = Vec::with_capacity(d);
        for j in 0..d {
            let mut acc = a[i][0].mul(&b[0][j])?;
            for l in 1..d {
                acc = acc.add(&a[i][l].mul(&b[l][j])?)?;
            }
            row.push(acc);
        }
        out.push(row);
    }
    Ok(out)
}

pub fn smat_add(a: &ScaledMatrix, b: &ScaledMatrix) -> std::result::Result<ScaledMatrix, PadicError> {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x.add(y)).collect())
        .collect()
}

pub fn smat_scale(a: &ScaledMatrix, c: &ScaledScalar) -> std::result::Result<ScaledMatrix, PadicError> {
    a.iter().map(|r| r.iter().map(|x| c.mul(x)).collect()).collect()
}

pub fn smat_agrees(a: &ScaledMatrix, b: &ScaledMatrix) -> std::result::Result<bool, PadicError> {
    for (r, s) in a.iter().zip(b) {
        for (x, y) in r.iter().zip(s) {
            if !x.agrees_with(y)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `p^e` as a scaled scalar; negative `e` gives a denominator.
pub fn p_power(e: i64, ctx: &PadicContext) -> ScaledScalar {
    if e >= 0 {
        let v = if e as u32 >= ctx.w() { 0 } else { ctx.pow_p(e as u32) };
        ScaledScalar::integral(PadicScalar::new(ctx.p(), ctx.w(), v, ctx.w()))
    } else {
        ScaledScalar { value: ctx.one(), den_exp: (-e) as u32 }
    }
}

/// The data `(D, φ, h, λ)` of one case at a fixed working precision.
#[derive(Debug, Clone)]
pub struct PhiSetup {
    pub params: CaseParams,
    pub a_p: BigRational,
    pub alpha: Option<PadicScalar>,
    pub phi: ScaledMatrix,
    pub phi_inv: ScaledMatrix,
    /// `φ^{-1}` reduced mod `p^W` (integral by construction).
    phi_inv_int: Vec<Vec<u64>>,
    /// `p^λ φ^h` reduced mod `p^W` (integral by construction).
    phi_h_scaled: Vec<Vec<u64>>,
    ctx: PadicContext,
}

impl PhiSetup {
    pub fn new(params: CaseParams, a_p: &BigRational, ctx: &PadicContext) -> Result<Self> {
        let p = params.p;
        let k = params.k;
        let ap_int = a_p.to_integer();
        let ap_res = ctx.from_bigint(&ap_int).residue();
        let sc = |q: BigRational| ScaledScalar::from_rational(&q, ctx);
        let rat = |n: BigInt| BigRational::from_integer(n);
        let pk1 = BigInt::from(p).pow(k - 1);
        let setup = match params.case {
            Case::Ordinary => {
                let alpha = quadratic_unit_root(a_p, k, ctx)?;
                let lam = params.lambda;
                let unit = alpha.div(&PadicScalar::new(p, ctx.w(), ctx.pow_p(lam), ctx.w()))?;
                let u_inv = ctx.inv(unit.residue())?;
                let phi = vec![vec![ScaledScalar { value: PadicScalar::new(p, ctx.w(), u_inv, unit.precision()), den_exp: lam }]];
                PhiSetup {
                    params,
                    a_p: a_p.clone(),
                    alpha: Some(alpha),
                    phi,
                    phi_inv: vec![vec![ScaledScalar::integral(alpha)]],
                    phi_inv_int: vec![vec![alpha.residue()]],
                    phi_h_scaled: vec![vec![u_inv]],
                    ctx: ctx.clone(),
                }
            }
            Case::Supersingular => {
                let inv_p = BigRational::new(BigInt::one(), pk1.clone());
                let phi = vec![
                    vec![sc(BigRational::zero())?, sc(inv_p.clone())?],
                    vec![sc(-BigRational::one())?, sc(a_p * &inv_p)?],
                ];
                let phi_inv_q = [[rat(ap_int.clone()), rat(BigInt::from(-1))], [rat(pk1.clone()), BigRational::zero()]];
                let phi_inv = phi_inv_q.iter().map(|r| r.iter().map(|q| sc(q.clone())).collect()).collect::<std::result::Result<_, _>>()?;
                let phi_inv_int = phi_inv_q
                    .iter()
                    .map(|r| r.iter().map(|q| ctx.from_bigint(&q.to_integer()).residue()).collect())
                    .collect();
                // p^λ φ^2 = p^{-m} [[-p^{k-1}, a_p], [-a_p p^{k-1}, a_p^2 - p^{k-1}]]
                let m = 2 * (k - 1) - params.lambda;
                let pm = BigInt::from(p).pow(m);
                let raw = [
                    [-pk1.clone(), ap_int.clone()],
                    [-&ap_int * &pk1, &ap_int * &ap_int - &pk1],
                ];
                let phi_h_scaled = raw
                    .iter()
                    .map(|r| {
                        r.iter()
                            .map(|x| {
                                debug_assert!((x % &pm).is_zero());
                                ctx.from_bigint(&(x / &pm)).residue()
                            })
                            .collect()
                    })
                    .collect();
                PhiSetup { params, a_p: a_p.clone(), alpha: None, phi, phi_inv, phi_inv_int, phi_h_scaled, ctx: ctx.clone() }
            }
            Case::Semistable => {
                let s = sc(a_p.clone())?;
                PhiSetup {
                    params,
                    a_p: a_p.clone(),
                    alpha: None,
                    phi: vec![vec![s]],
                    phi_inv: vec![vec![s]],
                    phi_inv_int: vec![vec![ap_res]],
                    phi_h_scaled: vec![vec![ap_res]],
                    ctx: ctx.clone(),
                }
            }
        };
        Ok(setup)
    }

    pub fn ctx(&self) -> &PadicContext {
        &self.ctx
    }

    pub fn case(&self) -> Case {
        self.params.case
    }

    pub fn d(&self) -> usize {
        self.params.d
    }

    /// `p^{k-1} φ^2 - a_p φ + 1 = 0`.
    pub fn quadratic_identity_holds(&self) -> std::result::Result<bool, PadicError> {
        let ctx = &self.ctx;
        let d = self.d();
        let phi2 = smat_mul(&self.phi, &self.phi)?;
        let a = smat_scale(&phi2, &p_power(self.params.k as i64 - 1, ctx))?;
        let b = smat_scale(&self.phi, &ScaledScalar::from_rational(&-self.a_p.clone(), ctx)?)?;
        let lhs = smat_add(&smat_add(&a, &b)?, &smat_identity(d, ctx))?;
        let zero: ScaledMatrix = vec![vec![ScaledScalar::integral(ctx.zero()); d]; d];
        smat_agrees(&lhs, &zero)
    }

    /// `φ^{-1} φ = 1` and `p^λ φ^h` integral, checked against the stored
    /// residue matrices.
    pub fn lattice_invariants_hold(&self) -> std::result::Result<bool, PadicError> {
        let ctx = &self.ctx;
        let d = self.d();
        if !smat_agrees(&smat_mul(&self.phi_inv, &self.phi)?, &smat_identity(d, ctx))? {
            return Ok(false);
        }
        let mut ph = smat_identity(d, ctx);
        for _ in 0..self.params.h {
            ph = smat_mul(&ph, &self.phi)?;
        }
        let ph = smat_scale(&ph, &p_power(self.params.lambda as i64, ctx))?;
        let stored: ScaledMatrix = self
            .phi_h_scaled
            .iter()
            .map(|r| r.iter().map(|&x| ScaledScalar::integral(PadicScalar::new(ctx.p(), ctx.w(), x, ctx.w()))).collect())
            .collect();
        smat_agrees(&ph, &stored)
    }
}

/// Round count and precision budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftPlan {
    pub m_target: u32,
    pub n_star: u32,
    pub m_work: u32,
    pub w: u32,
    pub r0: u32,
    pub m_achieved: u32,
}

/// `t_n = (h(k-1) - λ) n - λ`.
pub fn ledger_bound(params: &CaseParams, n: u32) -> i64 {
    let gain = (params.h * (params.k - 1)) as i64 - params.lambda as i64;
    gain * n as i64 - params.lambda as i64
}

pub fn plan(params: &CaseParams, m_target: u32, r0: u32) -> Result<LiftPlan> {
    let bound = params.h * (params.k - 1);
    if params.lambda >= bound {
        return Err(LiftError::LedgerStall { lambda: params.lambda, bound });
    }
    let gain = bound - params.lambda;
    let n_star = (m_target + params.lambda).div_ceil(gain) + 1;
    let m_work = m_target + r0 + params.lambda * (n_star + 1);
    let w = m_work + params.k;
    let m_achieved = ((m_work - r0 - params.lambda * n_star) as i64).min(ledger_bound(params, n_star)) as u32;
    Ok(LiftPlan { m_target, n_star, m_work, w, r0, m_achieved })
}

/// Moment coordinates `μ_j = (-1)^j P_j / C(k-2, j)` of a polynomial value.
pub fn moment_coords(poly: &[Q], k: u32) -> Vec<Q> {
    let k2 = k as u64 - 2;
    poly.iter()
        .enumerate()
        .map(|(j, c)| {
            let b = num_integer::binomial(BigInt::from(k2), BigInt::from(j as u64));
            let q = c / Q::from_integer(b);
            if j % 2 == 1 {
                -q
            } else {
                q
            }
        })
        .collect()
}

fn den_exponent(q: &Q, p: u64) -> u32 {
    ord_p(q, p).map_or(0, |v| (-v).max(0) as u32)
}

/// Level at which the lift runs: `Np` if `p ∤ N`, else `N`.
pub fn lift_level(level: u64, p: u64) -> u64 {
    if level % p == 0 {
        level
    } else {
        level * p
    }
}

/// The classical symbols (at the lift level) whose p-adic combinations make
/// up the components of `Φ`.
struct InitialShape {
    pres: Arc<Presentation>,
    sources: Vec<ClassicalSymbol>,
    r0: u32,
}

fn initial_shape(psi: &ClassicalSymbol, params: &CaseParams) -> InitialShape {
    let p = params.p;
    let level = lift_level(psi.level(), p);
    let (pres, sources) = if level == psi.level() {
        (psi.presentation().clone(), vec![psi.clone()])
    } else {
        let pres = Arc::new(Presentation::build(level));
        let res = psi.transform(&pres, &[IntMatrix2::IDENTITY]);
        let vp = psi.transform(&pres, &[IntMatrix2::v_p(p as i64)]);
        (pres, vec![res, vp])
    };
    let e = sources
        .iter()
        .flat_map(|s| s.values().iter().flat_map(|v| moment_coords(v, params.k)))
        .map(|q| den_exponent(&q, p))
        .max()
        .unwrap_or(0);
    let r0 = e + if params.case == Case::Ordinary { params.lambda } else { 0 };
    InitialShape { pres, sources, r0 }
}

/// Options for the initial lift.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftOptions {
    /// Adds pseudo-random integral noise in `Fil^level` to every generator
    /// value of the initial lift.
    pub noise: Option<(u64, u32)>,
    pub mode: Mode,
}

/// One line of the convergence ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub round: u32,
    /// Filtration level of `Φ_{n+1} - Φ_n` (normalized by `p^{r0}`).
    pub gap_level: i64,
    /// `t_n`, capped by what the working depth can show.
    pub gap_expected: i64,
    /// Level of `U_p Φ̄_n - (1⊗φ^{-1}) Φ̄_n`.
    pub eigen_level: i64,
    pub eigen_expected: i64,
    /// Worst relation residual level of `Φ̄_n`.
    pub relation_level: i64,
    #[serde(skip)]
    pub millis: u64,
}

impl LedgerEntry {
    pub fn ok(&self) -> bool {
        self.gap_level >= self.gap_expected && self.eigen_level >= self.eigen_expected
    }
}

type Values = Vec<Vec<MomentDistribution>>;

/// Per-generator sparse operator: `out[x] = Σ_(y, A) A · in[y]`.
type SparseOperator = Vec<Vec<(usize, ActionMatrix)>>;

fn sparse_operator(
    ctx: &PadicContext,
    k: u32,
    depth: u32,
    pieces: &[Vec<(i64, usize, IntMatrix2)>],
    mode: Mode,
) -> Result<SparseOperator> {
    let rows = exec::map_range(mode, pieces.len(), |x| -> Result<Vec<(usize, ActionMatrix)>> {
        let mut acc: Vec<(usize, ActionMatrix)> = Vec::new();
        for (s, y, m) in &pieces[x] {
            let a = ActionMatrix::new(ctx, k, depth, m)?;
            match acc.iter_mut().find(|(yy, _)| yy == y) {
                Some((_, b)) => b.add_assign(&a, *s, ctx),
                None => {
                    let mut b = ActionMatrix::zero(k, depth);
                    b.add_assign(&a, *s, ctx);
                    acc.push((*y, b));
                }
            }
        }
        Ok(acc)
    });
    rows.into_iter().collect()
}

fn apply_sparse(op: &SparseOperator, values: &Values, mode: Mode) -> Values {
    exec::map_range(mode, op.len(), |x| {
        let d = values[0].len();
        (0..d)
            .map(|i| {
                let proto = &values[0][i];
                let mut acc = MomentDistribution::zero(proto.ctx(), proto.weight(), proto.depth());
                for (y, a) in &op[x] {
                    acc = acc.add(&values[*y][i].apply(a)).expect("same shape");
                }
                acc
            })
            .collect()
    })
}

/// `out_i = Σ_j A[i][j] v_j` on each generator.
fn apply_d_matrix(a: &[Vec<u64>], values: &Values) -> Values {
    values
        .iter()
        .map(|v| {
            (0..v.len())
                .map(|i| {
                    let mut acc = v[0].scale(a[i][0]);
                    for (j, vj) in v.iter().enumerate().skip(1) {
                        acc = acc.add(&vj.scale(a[i][j])).expect("same shape");
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn sub_values(a: &Values, b: &Values) -> Values {
    a.iter()
        .zip(b)
        .map(|(u, v)| u.iter().zip(v).map(|(x, y)| x.sub(y).expect("same shape")).collect())
        .collect()
}

fn zero_level(values: &Values) -> i64 {
    values.iter().flatten().map(|m| m.zero_level()).min().unwrap_or(i64::MAX)
}

/// Iteration state after `round` rounds: `Φ̄_round`.
#[derive(Debug, Clone)]
pub struct LiftState {
    pub round: u32,
    pub values: Values,
}

/// The eigen-lift `Φ_∞ = p^{-den_exp} · values`, known modulo
/// `Fil^{m_achieved}`.
#[derive(Debug, Clone)]
pub struct OverconvergentSymbol {
    pub setup: PhiSetup,
    pub pres: Arc<Presentation>,
    pub values: Values,
    pub den_exp: u32,
    pub m_achieved: u32,
    /// Low moments of the integral initial symbol `p^{r0} Φ`.
    pub anchor: Values,
    pub r0: u32,
}

/// Residual filtration levels of a finished lift, normalized to `Φ_∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub m_achieved: u32,
    pub relation_level: i64,
    pub eigen_level: i64,
    /// Moments `0..=k-2` of `Φ_∞` agree with the classical symbol modulo
    /// `p^{anchor_level + 1}`.
    pub anchor_level: i64,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        let m = self.m_achieved as i64;
        self.relation_level >= m && self.eigen_level >= m && self.anchor_level >= m
    }
}

/// Drives the iteration for one eigensymbol.
pub struct Lifter {
    pub setup: PhiSetup,
    pub plan: LiftPlan,
    pub pres: Arc<Presentation>,
    up: SparseOperator,
    relations: SparseOperator,
    initial: Values,
    mode: Mode,
    pub ledger: Vec<LedgerEntry>,
}

impl Lifter {
    pub fn with_params(
        psi: &ClassicalSymbol,
        a_p: &BigRational,
        params: CaseParams,
        m_target: u32,
        options: LiftOptions,
    ) -> Result<Self> {
        let k = params.k;
        if m_target == 0 {
            return Err(LiftError::CaseHypothesisViolated("target depth must be at least 1".into()));
        }
        let shape = initial_shape(psi, &params);
        let plan = plan(&params, m_target, shape.r0)?;
        let ctx = PadicContext::new(params.p, plan.w)?;
        let setup = PhiSetup::new(params, a_p, &ctx)?;
        let initial = initial_values(&shape, &setup, &plan, options.noise)?;

        let p = params.p as i64;
        let betas: Vec<IntMatrix2> = (0..p).map(|b| IntMatrix2::beta(b, p)).collect();
        let up_pieces = operator_pieces(&shape.pres, &shape.pres, &betas);
        let up = sparse_operator(&ctx, k, plan.m_work, &up_pieces, options.mode)?;
        let rel_pieces: Vec<_> = shape.pres.relations().iter().map(|r| r.terms.clone()).collect();
        let relations = sparse_operator(&ctx, k, plan.m_work, &rel_pieces, options.mode)?;
        Ok(Lifter { setup, plan, pres: shape.pres, up, relations, initial, mode: options.mode, ledger: Vec::new() })
    }

    pub fn initial_state(&self) -> LiftState {
        LiftState { round: 0, values: self.initial.clone() }
    }

    pub fn initial_values(&self) -> &Values {
        &self.initial
    }

    /// Generator-wise `U_p`: `(U_p F)(a_x) = Σ_b F(β_b a_x)|β_b`, with the
    /// right side evaluated through the deterministic decomposition.
    pub fn apply_up(&self, values: &Values) -> Values {
        apply_sparse(&self.up, values, self.mode)
    }

    pub fn relation_residuals(&self, values: &Values) -> Values {
        let depth = values[0][0].depth();
        if depth == self.plan.m_work {
            return apply_sparse(&self.relations, values, self.mode);
        }
        let ops: SparseOperator = self
            .relations
            .iter()
            .map(|row| row.iter().map(|(y, a)| (*y, a.truncate(MomentDistribution::len_for(self.setup.params.k, depth)))).collect())
            .collect();
        apply_sparse(&ops, values, self.mode)
    }

    fn eigen_residual(&self, values: &Values, up: &Values) -> Values {
        sub_values(up, &apply_d_matrix(&self.setup.phi_inv_int, values))
    }

    /// One round `Φ̄_{n+1} = (1 ⊗ p^λ φ^h) U_p^h Φ̄_n`, appending a ledger line.
    pub fn step(&mut self, state: &LiftState) -> LiftState {
        let start = Instant::now();
        let params = self.setup.params;
        let n = state.round;
        let first = self.apply_up(&state.values);
        let eigen_level = zero_level(&self.eigen_residual(&state.values, &first));
        let mut cur = first;
        for _ in 1..params.h {
            cur = self.apply_up(&cur);
        }
        let next = apply_d_matrix(&self.setup.phi_h_scaled, &cur);

        let pl = self.setup.ctx.pow_p(params.lambda);
        let scaled_prev: Values = state.values.iter().map(|v| v.iter().map(|m| m.scale(pl)).collect()).collect();
        let lam_next = (params.lambda * (n + 1)) as i64;
        let gap_level = zero_level(&sub_values(&next, &scaled_prev)) - lam_next;
        let depth_cap = self.plan.m_work as i64 - lam_next;
        let relation_level = zero_level(&self.relation_residuals(&state.values));
        self.ledger.push(LedgerEntry {
            round: n,
            gap_level,
            gap_expected: ledger_bound(&params, n).min(depth_cap),
            eigen_level,
            eigen_expected: ((params.h * (params.k - 1) * n) as i64).min(self.plan.m_work as i64),
            relation_level,
            millis: start.elapsed().as_millis() as u64,
        });
        LiftState { round: n + 1, values: next }
    }

    /// Runs all remaining rounds from `state`, calling `on_round` after each.
    pub fn run_from(&mut self, mut state: LiftState, mut on_round: impl FnMut(&LiftState)) -> LiftState {
        while state.round < self.plan.n_star {
            state = self.step(&state);
            on_round(&state);
        }
        state
    }

    pub fn run(&mut self) -> Result<OverconvergentSymbol> {
        let state = self.run_from(self.initial_state(), |_| {});
        self.finish(&state)
    }

    /// Extracts `Φ_∞` from `Φ̄_{n*}`, dividing out the common power of `p`
    /// that the denominators allow.
    pub fn finish(&self, state: &LiftState) -> Result<OverconvergentSymbol> {
        let params = self.setup.params;
        let total = self.plan.r0 + params.lambda * state.round;
        let min_val = state.values.iter().flatten().flat_map(|m| m.moments().iter().map(|x| x.valuation())).min().unwrap_or(0);
        let shift = min_val.min(total).min(self.plan.m_work);
        let den_exp = total - shift;
        let m_achieved = ((self.plan.m_work - total) as i64).min(ledger_bound(&params, state.round)).max(0) as u32;
        let depth = m_achieved + den_exp;
        let values = state
            .values
            .iter()
            .map(|v| v.iter().map(|m| Ok(m.scale_shift(-(shift as i64))?.truncate(depth))).collect::<Result<Vec<_>>>())
            .collect::<Result<Values>>()?;
        let anchor = self.initial.iter().map(|v| v.iter().map(|m| m.truncate(0)).collect()).collect();
        Ok(OverconvergentSymbol {
            setup: self.setup.clone(),
            pres: self.pres.clone(),
            values,
            den_exp,
            m_achieved,
            anchor,
            r0: self.plan.r0,
        })
    }

    /// Recomputes relation, eigen and anchoring residuals of a finished lift.
    pub fn verify(&self, phi: &OverconvergentSymbol) -> VerifyReport {
        let r = phi.den_exp as i64;
        let relation_level = zero_level(&self.relation_residuals(&phi.values)) - r;
        let up = self.apply_up_at_depth(&phi.values);
        let eigen_level = zero_level(&self.eigen_residual(&phi.values, &up)) - r;
        VerifyReport { m_achieved: phi.m_achieved, relation_level, eigen_level, anchor_level: anchor_level(phi) }
    }

    fn apply_up_at_depth(&self, values: &Values) -> Values {
        let depth = values[0][0].depth();
        if depth == self.plan.m_work {
            return self.apply_up(values);
        }
        let len = MomentDistribution::len_for(self.setup.params.k, depth);
        let ops: SparseOperator =
            self.up.iter().map(|row| row.iter().map(|(y, a)| (*y, a.truncate(len))).collect()).collect();
        apply_sparse(&ops, values, self.mode)
    }
}

impl Lifter {
    /// Reads `a_p` off `ψ` and prepares the lift at `p`.
    pub fn for_prime(psi: &ClassicalSymbol, p: u64, case: Option<Case>, m_target: u32, options: LiftOptions) -> Result<Self> {
        let a_p = psi.eigenvalue(p)?;
        let params = case_parameters(case, p, psi.weight(), &a_p, psi.level())?;
        Self::with_params(psi, &a_p, params, m_target, options)
    }
}

/// Level to which the low moments of `p^{r0} Φ_∞` match the stored initial
/// symbol: every difference vanishes modulo `p^{level+1}`.
pub fn anchor_level(phi: &OverconvergentSymbol) -> i64 {
    let ctx = phi.setup.ctx();
    let k2 = phi.setup.params.k as usize - 2;
    let (r, r0) = (phi.den_exp, phi.r0);
    let mut worst = i64::MAX;
    for (v, a) in phi.values.iter().zip(&phi.anchor) {
        for (m, an) in v.iter().zip(a) {
            for j in 0..=k2 {
                let lhs = mul_p_power(m.moment(j), r0, ctx);
                let rhs = mul_p_power(an.moment(j), r, ctx);
                let diff = lhs.sub(&rhs).expect("same prime");
                worst = worst.min(diff.valuation() as i64 - (r + r0) as i64 - 1);
            }
        }
    }
    worst
}

fn mul_p_power(x: PadicScalar, e: u32, ctx: &PadicContext) -> PadicScalar {
    if e == 0 {
        return x;
    }
    let pe = if e >= ctx.w() { 0 } else { ctx.pow_p(e) };
    PadicScalar::new(ctx.p(), ctx.w(), ctx.mul(x.residue(), pe), x.precision() + e)
}

fn initial_values(shape: &InitialShape, setup: &PhiSetup, plan: &LiftPlan, noise: Option<(u64, u32)>) -> Result<Values> {
    let ctx = setup.ctx();
    let params = setup.params;
    let k = params.k;
    let one = ScaledScalar::integral(ctx.one());
    let zero = ScaledScalar::integral(ctx.zero());
    // coefficient of source r in component i
    let coeffs: Vec<Vec<ScaledScalar>> = match params.case {
        Case::Ordinary => vec![vec![one, setup.phi[0][0].neg()]],
        Case::Supersingular => vec![vec![one, zero], vec![zero, one]],
        Case::Semistable => vec![vec![one]],
    };
    let mut rng = noise.map(|(seed, _)| ChaCha8Rng::seed_from_u64(seed));
    let t = shape.pres.num_generators();
    let mut out = Vec::with_capacity(t);
    for x in 0..t {
        let coords: Vec<Vec<ScaledScalar>> = shape
            .sources
            .iter()
            .map(|s| moment_coords(s.value(x), k).iter().map(|q| ScaledScalar::from_rational(q, ctx)).collect())
            .collect::<std::result::Result<_, _>>()?;
        let mut comps = Vec::with_capacity(params.d);
        for row in &coeffs {
            let mut mu = MomentDistribution::zero(ctx, k, plan.m_work);
            for j in 0..=(k as usize - 2) {
                let mut acc = ctx.zero();
                for (c, src) in row.iter().zip(&coords) {
                    let term = c.mul(&src[j])?;
                    if term.den_exp > plan.r0 {
                        return Err(LiftError::NonIntegralAfterScaling);
                    }
                    acc = acc.add(&mul_p_power(term.value, plan.r0 - term.den_exp, ctx))?;
                }
                mu.set_moment(j, acc);
            }
            if let (Some(rng), Some((_, level))) = (rng.as_mut(), noise) {
                let extra = MomentDistribution::random_in_fil(ctx, k, plan.m_work, level.min(plan.m_work), rng);
                mu = mu.add(&extra)?;
            }
            comps.push(mu);
        }
        out.push(comps);
    }
    Ok(out)
}

/// JSON checkpoint: enough to resume an interrupted lift or to analyze a
/// finished one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub level: u64,
    pub k: u32,
    pub p: u64,
    pub a_p: String,
    pub case: Case,
    pub plan: LiftPlan,
    pub eigen_scale: String,
    /// Classical eigensymbol at level `N` in the text format.
    pub classical: String,
    pub round: u32,
    pub state: Vec<Vec<MomentRepr>>,
    pub ledger: Vec<LedgerEntry>,
    pub result: Option<FinishedLift>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinishedLift {
    pub den_exp: u32,
    pub m_achieved: u32,
    pub values: Vec<Vec<MomentRepr>>,
    pub report: VerifyReport,
}

pub fn values_to_repr(values: &Values) -> Vec<Vec<MomentRepr>> {
    values.iter().map(|v| v.iter().map(|m| m.to_repr()).collect()).collect()
}

pub fn values_from_repr(repr: &[Vec<MomentRepr>]) -> Result<Values> {
    repr.iter()
        .map(|v| v.iter().map(|m| Ok(MomentDistribution::from_repr(m)?)).collect())
        .collect()
}

impl Checkpoint {
    pub fn new(lifter: &Lifter, psi: &ClassicalSymbol, eigen_scale: &Q, state: &LiftState) -> Self {
        let params = lifter.setup.params;
        Checkpoint {
            level: psi.level(),
            k: params.k,
            p: params.p,
            a_p: lifter.setup.a_p.to_string(),
            case: params.case,
            plan: lifter.plan,
            eigen_scale: eigen_scale.to_string(),
            classical: psi.to_text(),
            round: state.round,
            state: values_to_repr(&state.values),
            ledger: lifter.ledger.clone(),
            result: None,
        }
    }

    pub fn classical_symbol(&self) -> Result<ClassicalSymbol> {
        let pres = Arc::new(Presentation::build(self.level));
        Ok(ClassicalSymbol::from_text(pres, &self.classical)?)
    }

    pub fn a_p(&self) -> Result<BigRational> {
        self.a_p.parse().map_err(|_| LiftError::Checkpoint(format!("bad a_p {:?}", self.a_p)))
    }

    /// Rebuilds the lifter and the saved state.
    pub fn resume(&self, mode: Mode) -> Result<(Lifter, LiftState)> {
        let psi = self.classical_symbol()?;
        let a_p = self.a_p()?;
        let params = case_parameters(Some(self.case), self.p, self.k, &a_p, self.level)?;
        let mut lifter = Lifter::with_params(&psi, &a_p, params, self.plan.m_target, LiftOptions { noise: None, mode })?;
        if lifter.plan != self.plan {
            return Err(LiftError::Checkpoint("plan differs from the rebuilt one".into()));
        }
        lifter.ledger = self.ledger.clone();
        let values = values_from_repr(&self.state)?;
        Ok((lifter, LiftState { round: self.round, values }))
    }

    /// The finished lift stored in the checkpoint.
    pub fn overconvergent(&self, lifter: &Lifter) -> Result<OverconvergentSymbol> {
        let fin = self.result.as_ref().ok_or_else(|| LiftError::Checkpoint("lift not finished".into()))?;
        let anchor = lifter.initial.iter().map(|v| v.iter().map(|m| m.truncate(0)).collect()).collect();
        Ok(OverconvergentSymbol {
            setup: lifter.setup.clone(),
            pres: lifter.pres.clone(),
            values: values_from_repr(&fin.values)?,
            den_exp: fin.den_exp,
            m_achieved: fin.m_achieved,
            anchor,
            r0: lifter.plan.r0,
        })
    }
}
