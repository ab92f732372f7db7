//! The measure attached to an eigen-lift: class moments on `a + p^n Z_p`,
//! restriction to `Z_p^×`, tame twists and the Cauchy series.
//!
//! All moments are global: the class moment `j` of `a + p^n Z_p` is
//! `∫_{a+p^n Z_p} z^j dμ`, obtained as `φ^n` applied to the moments of
//! `Φ_∞((∞ → a/p^n)) | [[1,a],[0,p^n]]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Mode};
use crate::lift::{p_power, smat_add, smat_agrees, smat_identity, smat_mul, smat_scale, Case, OverconvergentSymbol, PhiSetup, ScaledMatrix};
use crate::manin::{decompose, Cusp, Divisor};
use crate::moments::{MomentDistribution, MomentError};
use crate::padic::{teichmuller, PadicContext, PadicError, PadicScalar, ScalarRepr, ScaledScalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LfunError {
    #[error("moment index {j} exceeds the known range 0..={max}")]
    MomentOutOfRange { j: usize, max: usize },
    #[error("class moments at exponent {0} have no precision left")]
    PrecisionExhausted(u32),
    #[error("class exponent must be at least 1")]
    ZeroExponent,
    #[error("twists need a measure at class exponent 1, got {0}")]
    NotTame(u32),
    #[error("the Euler factor identity needs an ordinary or supersingular setup")]
    SemistableEuler,
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Moment(#[from] MomentError),
}

pub type Result<T> = std::result::Result<T, LfunError>;

/// A `d`-tuple of moments in `Q_p`.
pub type Moment = Vec<ScaledScalar>;

/// Value `Φ_∞(D)` on a degree-zero divisor, in the integral scaling
/// `p^{den_exp} Φ_∞`.
pub fn evaluate(phi: &OverconvergentSymbol, divisor: &Divisor) -> Result<Vec<MomentDistribution>> {
    let dec = decompose(divisor, &phi.pres);
    let d = phi.values[0].len();
    let proto = &phi.values[0][0];
    let mut out = vec![MomentDistribution::zero(proto.ctx(), proto.weight(), proto.depth()); d];
    for (s, y, m) in &dec.pieces {
        for (i, acc) in out.iter_mut().enumerate() {
            let v = phi.values[*y][i].act(m)?;
            for _ in 0..s.unsigned_abs() {
                *acc = if *s >= 0 { acc.add(&v)? } else { acc.sub(&v)? };
            }
        }
    }
    Ok(out)
}

fn max_index(phi: &OverconvergentSymbol) -> usize {
    phi.m_achieved as usize + phi.setup.params.k as usize - 2
}

fn check_index(phi: &OverconvergentSymbol, j: usize) -> Result<()> {
    let max = max_index(phi);
    if j > max {
        return Err(LfunError::MomentOutOfRange { j, max });
    }
    Ok(())
}

fn mat_vec(a: &ScaledMatrix, v: &[ScaledScalar]) -> Result<Moment> {
    a.iter()
        .map(|row| {
            let mut acc = row[0].mul(&v[0])?;
            for (x, y) in row.iter().zip(v).skip(1) {
                acc = acc.add(&x.mul(y)?)?;
            }
            Ok(acc)
        })
        .collect()
}

fn vec_add(a: &[ScaledScalar], b: &[ScaledScalar]) -> Result<Moment> {
    a.iter().zip(b).map(|(x, y)| Ok(x.add(y)?)).collect()
}

fn vec_sub(a: &[ScaledScalar], b: &[ScaledScalar]) -> Result<Moment> {
    a.iter().zip(b).map(|(x, y)| Ok(x.sub(y)?)).collect()
}

fn vec_agrees(a: &[ScaledScalar], b: &[ScaledScalar]) -> Result<bool> {
    for (x, y) in a.iter().zip(b) {
        if !x.agrees_with(y)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn phi_power(setup: &PhiSetup, n: u32) -> Result<ScaledMatrix> {
    let mut m = smat_identity(setup.d(), setup.ctx());
    for _ in 0..n {
        m = smat_mul(&m, &setup.phi)?;
    }
    Ok(m)
}

fn read_moment(comps: &[MomentDistribution], j: usize, den_exp: u32) -> Moment {
    comps.iter().map(|m| ScaledScalar { value: m.moment(j), den_exp }).collect()
}

/// Moment `j` of `Φ_∞((∞ → 0))`, i.e. `∫_{Z_p} z^j dμ̃`.
pub fn full_moments(phi: &OverconvergentSymbol, j_max: usize) -> Result<Vec<Moment>> {
    check_index(phi, j_max)?;
    let base = evaluate(phi, &Divisor::path(Cusp::Infinity, Cusp::integer(0)))?;
    Ok((0..=j_max).map(|j| read_moment(&base, j, phi.den_exp)).collect())
}

/// `∫_{Z_p^×} z^j dμ = (1 - p^j φ) ∫_{Z_p} z^j dμ̃`.
pub fn unit_moment(phi: &OverconvergentSymbol, j: usize) -> Result<Moment> {
    let full = full_moments(phi, j)?.pop().expect("nonempty");
    unit_from_full(&phi.setup, j, &full)
}

fn unit_from_full(setup: &PhiSetup, j: usize, full: &[ScaledScalar]) -> Result<Moment> {
    let ctx = setup.ctx();
    let pj_phi = smat_scale(&setup.phi, &p_power(j as i64, ctx))?;
    let minus = smat_scale(&pj_phi, &ScaledScalar::integral(ctx.one().neg()))?;
    let op = smat_add(&smat_identity(setup.d(), ctx), &minus)?;
    mat_vec(&op, full)
}

/// The subtraction route: full moment minus the `p Z_p` class.
pub fn unit_moment_by_subtraction(phi: &OverconvergentSymbol, j: usize) -> Result<Moment> {
    check_index(phi, j)?;
    let base = evaluate(phi, &Divisor::path(Cusp::Infinity, Cusp::integer(0)))?;
    let full = read_moment(&base, j, phi.den_exp);
    let shifted: Vec<_> = base.iter().map(|m| m.act_beta(0, 1)).collect();
    let p_part = mat_vec(&phi.setup.phi, &read_moment(&shifted, j, phi.den_exp))?;
    vec_sub(&full, &p_part)
}

/// Per-class moments of the measure restricted to `Z_p^×`.
#[derive(Debug, Clone)]
pub struct PadicMeasure {
    pub p: u64,
    pub k: u32,
    pub m_achieved: u32,
    pub n: u32,
    pub d: usize,
    pub j_max: usize,
    pub case: Case,
    pub normalization: String,
    /// Class `a` (with `p ∤ a`) to moments `0..=j_max`.
    pub classes: BTreeMap<u64, Vec<Moment>>,
    pub unit_moments: Vec<Moment>,
    setup: PhiSetup,
}

/// Moments `0..=j_max` of `∫_{a + p^n Z_p}` for one class, units or not.
pub fn class_moment(phi: &OverconvergentSymbol, a: u64, n: u32, j_max: usize) -> Result<Vec<Moment>> {
    let phin = phi_power(&phi.setup, n)?;
    class_moment_with(phi, &phin, a, n, j_max)
}

fn class_moment_with(phi: &OverconvergentSymbol, phin: &ScaledMatrix, a: u64, n: u32, j_max: usize) -> Result<Vec<Moment>> {
    let pn = phi.setup.params.p.pow(n);
    let target = Cusp::new(a as i64, pn as i64);
    let comps = evaluate(phi, &Divisor::path(Cusp::Infinity, target))?;
    let moved: Vec<_> = comps.iter().map(|m| m.act_beta(a, n)).collect();
    (0..=j_max).map(|j| mat_vec(phin, &read_moment(&moved, j, phi.den_exp))).collect()
}

impl PadicMeasure {
    /// Builds the table for all unit classes mod `p^n`.
    pub fn new(phi: &OverconvergentSymbol, n: u32, j_max: usize, normalization: &str, mode: Mode) -> Result<Self> {
        if n == 0 {
            return Err(LfunError::ZeroExponent);
        }
        check_index(phi, j_max)?;
        let p = phi.setup.params.p;
        let pn = p.checked_pow(n).ok_or(LfunError::PrecisionExhausted(n))?;
        let phin = phi_power(&phi.setup, n)?;
        let units: Vec<u64> = (0..pn).filter(|a| a % p != 0).collect();
        let rows = exec::map_range(mode, units.len(), |i| class_moment_with(phi, &phin, units[i], n, j_max));
        let mut classes = BTreeMap::new();
        for (a, row) in units.iter().zip(rows) {
            let row = row?;
            if row[0].iter().all(|x| x.absolute_precision() <= 0) {
                return Err(LfunError::PrecisionExhausted(n));
            }
            classes.insert(*a, row);
        }
        let full = full_moments(phi, j_max)?;
        let unit_moments = full.iter().enumerate().map(|(j, m)| unit_from_full(&phi.setup, j, m)).collect::<Result<_>>()?;
        Ok(PadicMeasure {
            p,
            k: phi.setup.params.k,
            m_achieved: phi.m_achieved,
            n,
            d: phi.setup.d(),
            j_max,
            case: phi.setup.case(),
            normalization: normalization.to_string(),
            classes,
            unit_moments,
            setup: phi.setup.clone(),
        })
    }

    pub fn ctx(&self) -> &PadicContext {
        self.setup.ctx()
    }

    /// `Σ_a` of class moment `j`.
    pub fn class_sum(&self, j: usize) -> Result<Moment> {
        let mut it = self.classes.values();
        let mut acc = it.next().expect("at least one class")[j].clone();
        for row in it {
            acc = vec_add(&acc, &row[j])?;
        }
        Ok(acc)
    }

    /// Checks that the classes of `self` refine those of `coarser`
    /// additively, for every class and every `j`.
    pub fn refines(&self, coarser: &PadicMeasure) -> Result<bool> {
        if self.n != coarser.n + 1 {
            return Ok(false);
        }
        let step = self.p.pow(coarser.n);
        let j_max = self.j_max.min(coarser.j_max);
        for (a, row) in &coarser.classes {
            for j in 0..=j_max {
                let mut acc: Option<Moment> = None;
                for t in 0..self.p {
                    let fine = &self.classes[&(a + t * step)][j];
                    acc = Some(match acc {
                        None => fine.clone(),
                        Some(s) => vec_add(&s, fine)?,
                    });
                }
                if !vec_agrees(&acc.expect("p >= 2"), &row[j])? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// `Σ_{a mod p} ω(a)^i ∫_{a+pZ_p} z^j dμ`.
    pub fn twist_value(&self, i: u64, j: usize) -> Result<Moment> {
        if self.n != 1 {
            return Err(LfunError::NotTame(self.n));
        }
        if j > self.j_max {
            return Err(LfunError::MomentOutOfRange { j, max: self.j_max });
        }
        let ctx = self.ctx();
        let e = i % (self.p - 1);
        let mut acc: Option<Moment> = None;
        for (a, row) in &self.classes {
            let w = ScaledScalar::integral(teichmuller(*a as i64, ctx)?.pow(e as u32)?);
            let term: Moment = row[j].iter().map(|x| w.mul(x)).collect::<std::result::Result<_, _>>()?;
            acc = Some(match acc {
                None => term,
                Some(s) => vec_add(&s, &term)?,
            });
        }
        Ok(acc.expect("p >= 2"))
    }

    pub fn to_json(&self) -> MeasureJson {
        let all = self.classes.values().flatten().chain(&self.unit_moments).flatten();
        let den = all.map(|x| x.den_exp).max().unwrap_or(0);
        let enc = |m: &Moment| -> Vec<ScalarRepr> {
            m.iter().map(|x| x.lift_to(den).expect("same prime").to_pair()).collect()
        };
        MeasureJson {
            p: self.p,
            k: self.k,
            m: self.m_achieved,
            n: self.n,
            d: self.d,
            normalization: self.normalization.clone(),
            den_exp: den,
            classes: self.classes.iter().map(|(a, rows)| (*a, rows.iter().map(enc).collect())).collect(),
            unit_moments: self.unit_moments.iter().map(enc).collect(),
        }
    }
}

/// Serialized measure. Every entry is the numerator of a fraction over
/// `p^{den_exp}`; classes and moments are in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureJson {
    pub p: u64,
    pub k: u32,
    #[serde(rename = "M")]
    pub m: u32,
    pub n: u32,
    pub d: usize,
    pub normalization: String,
    pub den_exp: u32,
    pub classes: BTreeMap<u64, Vec<Vec<ScalarRepr>>>,
    pub unit_moments: Vec<Vec<ScalarRepr>>,
}

/// Coefficients of `C(w) = Σ_j w^j ∫ z^j dμ` over `Z_p^×` (`units`) or
/// over `Z_p`.
pub fn cauchy_series(phi: &OverconvergentSymbol, j_max: usize, units: bool) -> Result<Vec<Moment>> {
    let full = full_moments(phi, j_max)?;
    if !units {
        return Ok(full);
    }
    full.iter().enumerate().map(|(j, m)| unit_from_full(&phi.setup, j, m)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EulerReport {
    pub j: usize,
    pub identity_holds: bool,
    /// `1 - a_p p^{-(j+1)} + p^{k-1-2(j+1)}`.
    pub factor: ScaledScalar,
    /// Ordinary only: `(1 - p^j α^{-1})^{-1} (1 - p^{-j-1} α)` agrees between
    /// the scalar and the `1×1` matrix computation.
    pub ordinary_factor_agrees: Option<bool>,
}

fn scaled_inverse(x: &ScaledScalar, ctx: &PadicContext) -> Result<ScaledScalar> {
    let v = x.value.valuation();
    if v >= x.value.precision() {
        return Err(PadicError::PrecisionExhausted.into());
    }
    let pv = PadicScalar::new(ctx.p(), ctx.w(), ctx.pow_p(v), ctx.w());
    let unit = x.value.div(&pv)?;
    let inv = ctx.one().div(&unit)?;
    Ok(if x.den_exp >= v {
        ScaledScalar::integral(inv).mul(&p_power((x.den_exp - v) as i64, ctx))?
    } else {
        ScaledScalar { value: inv, den_exp: v - x.den_exp }
    })
}

/// Checks `(1 - p^{k-2-j} φ)(1 - p^{-j-1} φ^{-1}) = (1 - a_p p^{-(j+1)} + p^{k-1-2(j+1)}) Id`.
pub fn euler_factor_check(setup: &PhiSetup, j: usize) -> Result<EulerReport> {
    if setup.case() == Case::Semistable {
        return Err(LfunError::SemistableEuler);
    }
    let ctx = setup.ctx();
    let k = setup.params.k as i64;
    let j = j.min(k as usize - 2);
    let ji = j as i64;
    let one = smat_identity(setup.d(), ctx);
    let neg = |x: ScaledScalar| x.neg();
    let left = smat_add(&one, &smat_scale(&setup.phi, &neg(p_power(k - 2 - ji, ctx)))?)?;
    let right = smat_add(&one, &smat_scale(&setup.phi_inv, &neg(p_power(-ji - 1, ctx)))?)?;
    let lhs = smat_mul(&left, &right)?;

    let a_p = ScaledScalar::from_rational(&setup.a_p, ctx)?;
    let factor = ScaledScalar::integral(ctx.one())
        .sub(&a_p.mul(&p_power(-ji - 1, ctx))?)?
        .add(&p_power(k - 1 - 2 * (ji + 1), ctx))?;
    let rhs = smat_scale(&one, &factor)?;
    let identity_holds = smat_agrees(&lhs, &rhs)?;

    let ordinary_factor_agrees = match setup.alpha {
        Some(alpha) if setup.case() == Case::Ordinary => {
            let alpha = ScaledScalar::integral(alpha);
            let alpha_inv = scaled_inverse(&alpha, ctx)?;
            let one = ScaledScalar::integral(ctx.one());
            let num = one.sub(&p_power(-ji - 1, ctx).mul(&alpha)?)?;
            let den = one.sub(&p_power(ji, ctx).mul(&alpha_inv)?)?;
            let scalar = scaled_inverse(&den, ctx)?.mul(&num)?;
            let num_m = one.sub(&p_power(-ji - 1, ctx).mul(&setup.phi_inv[0][0])?)?;
            let den_m = one.sub(&p_power(ji, ctx).mul(&setup.phi[0][0])?)?;
            let matrix = scaled_inverse(&den_m, ctx)?.mul(&num_m)?;
            Some(scalar.agrees_with(&matrix)?)
        }
        _ => None,
    };
    Ok(EulerReport { j, identity_holds, factor, ordinary_factor_agrees })
}

/// Rational classical value `Φ((∞ → 0))` in moment coordinates, for
/// comparison with the low moments of a lift.
pub fn classical_anchor(phi: &OverconvergentSymbol, j: usize) -> Result<Moment> {
    let dec = decompose(&Divisor::path(Cusp::Infinity, Cusp::integer(0)), &phi.pres);
    let d = phi.setup.d();
    let proto = &phi.anchor[0][0];
    let mut out = vec![MomentDistribution::zero(proto.ctx(), proto.weight(), 0); d];
    for (s, y, m) in &dec.pieces {
        for (i, acc) in out.iter_mut().enumerate() {
            let v = phi.anchor[*y][i].act(m)?;
            for _ in 0..s.unsigned_abs() {
                *acc = if *s >= 0 { acc.add(&v)? } else { acc.sub(&v)? };
            }
        }
    }
    Ok(read_moment(&out, j, phi.r0))
}
