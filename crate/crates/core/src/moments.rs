//! Truncated distributions on `Z_p`, stored through their moments.
//!
//! A [`MomentDistribution`] of weight `k` and depth `M` keeps `μ(z^i)` for
//! `0 <= i <= M + k - 2`. Moments up to `k - 2` are known to the working
//! precision `W`; moment `k - 2 + j` is known modulo `p^{M - j + 1}`. This is
//! the quotient of integral distributions by `Fil^M`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::padic::{binom_neg, binomial, PadicContext, PadicError, PadicScalar, ScalarRepr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MomentError {
    #[error("matrix {0:?} is not in Sigma0(p)")]
    NotInSigma0(IntMatrix2),
    #[error("moment 0 must vanish")]
    NonzeroConstantTerm,
    #[error("precision exhausted at moment {0}")]
    PrecisionExhausted(usize),
    #[error("moment {0} is not divisible as required")]
    NonIntegralQuotient(usize),
    #[error("shift by {0} would leave Z_p-integral distributions")]
    NegativeShiftBelowFloor(i64),
    #[error("distributions have different shapes")]
    ShapeMismatch,
    #[error(transparent)]
    Padic(#[from] PadicError),
}

pub type Result<T> = std::result::Result<T, MomentError>;

/// A 2x2 integer matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntMatrix2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl IntMatrix2 {
    pub const IDENTITY: IntMatrix2 = IntMatrix2 { a: 1, b: 0, c: 0, d: 1 };
    pub const GAMMA1: IntMatrix2 = IntMatrix2 { a: 1, b: 1, c: 0, d: 1 };

    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        IntMatrix2 { a, b, c, d }
    }

    /// `β_{b,p^s} = [[1, b], [0, p^s]]`.
    pub fn beta(b: i64, ps: i64) -> Self {
        IntMatrix2::new(1, b, 0, ps)
    }

    /// `V_p = [[p, 0], [0, 1]]`.
    pub fn v_p(p: i64) -> Self {
        IntMatrix2::new(p, 0, 0, 1)
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    pub fn in_sigma0(&self, p: u64) -> bool {
        let p = p as i64;
        self.c % p == 0 && self.a % p != 0 && self.det() != 0
    }

    pub fn in_gamma0(&self, level: u64) -> bool {
        self.det() == 1 && self.c % level as i64 == 0
    }

    pub fn mul(&self, o: &IntMatrix2) -> IntMatrix2 {
        IntMatrix2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    /// `[[d, -b], [-c, a]]`.
    pub fn adjugate(&self) -> IntMatrix2 {
        IntMatrix2::new(self.d, -self.b, -self.c, self.a)
    }

    /// Inverse of a determinant `±1` matrix.
    pub fn inverse_unimodular(&self) -> Option<IntMatrix2> {
        match self.det() {
            1 => Some(self.adjugate()),
            -1 => {
                let m = self.adjugate();
                Some(IntMatrix2::new(-m.a, -m.b, -m.c, -m.d))
            }
            _ => None,
        }
    }

    pub fn neg(&self) -> IntMatrix2 {
        IntMatrix2::new(-self.a, -self.b, -self.c, -self.d)
    }
}

/// Matrix of `μ ↦ μ|γ` on moment vectors of a fixed weight and depth,
/// reduced mod `p^W`. Sums of such maps are again valid maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionMatrix {
    len: usize,
    rows: Vec<u64>,
}

impl ActionMatrix {
    pub fn zero(k: u32, depth: u32) -> Self {
        let len = MomentDistribution::len_for(k, depth);
        ActionMatrix { len, rows: vec![0; len * len] }
    }

    /// Row `n` holds `a^{k-2-n} Σ_{j,l} C(k-2-n, j)(c/a)^j C(n,l) b^{n-l} d^l`
    /// at column `j + l`, truncated at the last stored moment.
    pub fn new(ctx: &PadicContext, k: u32, depth: u32, g: &IntMatrix2) -> Result<Self> {
        if !g.in_sigma0(ctx.p()) {
            return Err(MomentError::NotInSigma0(*g));
        }
        let n_len = MomentDistribution::len_for(k, depth);
        let last = n_len - 1;
        let a = ctx.reduce_i128(g.a as i128);
        let a_inv = ctx.inv(a)?;
        let b = ctx.reduce_i128(g.b as i128);
        let c_over_a = ctx.mul(ctx.reduce_i128(g.c as i128), a_inv);
        let d = ctx.reduce_i128(g.d as i128);
        let k2 = k as i64 - 2;

        let mut ca_pow = vec![1 % ctx.modulus(); n_len];
        let mut b_pow = ca_pow.clone();
        let mut d_pow = ca_pow.clone();
        for i in 1..n_len {
            ca_pow[i] = ctx.mul(ca_pow[i - 1], c_over_a);
            b_pow[i] = ctx.mul(b_pow[i - 1], b);
            d_pow[i] = ctx.mul(d_pow[i - 1], d);
        }

        let mut rows = vec![0u64; n_len * n_len];
        for n in 0..n_len {
            let e = k2 - n as i64;
            let lead = if e >= 0 { ctx.pow(a, e as u64) } else { ctx.pow(a_inv, (-e) as u64) };
            let j_max = if e >= 0 { (e as usize).min(last) } else { last };
            let row = &mut rows[n * n_len..(n + 1) * n_len];
            let bl: Vec<u64> = (0..=n)
                .map(|l| ctx.mul(binomial(n as i64, l as u64, ctx), ctx.mul(b_pow[n - l], d_pow[l])))
                .collect();
            for j in 0..=j_max {
                let cj = ctx.mul(lead, ctx.mul(binomial(e, j as u64, ctx), ca_pow[j]));
                if cj == 0 {
                    continue;
                }
                for (l, &blv) in bl.iter().enumerate().take(n.min(last - j) + 1) {
                    row[j + l] = ctx.add(row[j + l], ctx.mul(cj, blv));
                }
            }
        }
        Ok(ActionMatrix { len: n_len, rows })
    }

    /// `self += sign · o`.
    pub fn add_assign(&mut self, o: &ActionMatrix, sign: i64, ctx: &PadicContext) {
        assert_eq!(self.len, o.len);
        for (x, &y) in self.rows.iter_mut().zip(&o.rows) {
            *x = if sign >= 0 { ctx.add(*x, y) } else { ctx.sub(*x, y) };
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The map on a shorter moment vector: entries do not depend on the
    /// depth, so this is the leading block.
    pub fn truncate(&self, len: usize) -> ActionMatrix {
        assert!(len <= self.len);
        let rows = (0..len).flat_map(|n| self.rows[n * self.len..n * self.len + len].iter().copied()).collect();
        ActionMatrix { len, rows }
    }
}

/// Polynomial in `X` with p-adic coefficients, constant term first.
pub type PadicPoly = Vec<PadicScalar>;

#[derive(Clone, PartialEq, Eq)]
pub struct MomentDistribution {
    ctx: PadicContext,
    k: u32,
    depth: u32,
    moments: Vec<PadicScalar>,
}

impl std::fmt::Debug for MomentDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Moments(k={}, M={}, {:?})", self.k, self.depth, self.moments)
    }
}

/// Precision of moment `i` for weight `k`, depth `m`, working exponent `w`.
pub fn nominal_precision(k: u32, m: u32, w: u32, i: usize) -> u32 {
    let i = i as i64;
    if i <= k as i64 - 2 {
        w
    } else {
        ((m + k) as i64 - 1 - i).clamp(0, w as i64) as u32
    }
}

impl MomentDistribution {
    /// Length `M + k - 1` of the moment vector.
    pub fn len_for(k: u32, depth: u32) -> usize {
        (depth + k - 1) as usize
    }

    pub fn zero(ctx: &PadicContext, k: u32, depth: u32) -> Self {
        assert!(k >= 2, "weight must be at least 2");
        let n = Self::len_for(k, depth);
        let moments = (0..n)
            .map(|i| PadicScalar::new(ctx.p(), ctx.w(), 0, nominal_precision(k, depth, ctx.w(), i)))
            .collect();
        MomentDistribution { ctx: ctx.clone(), k, depth, moments }
    }

    /// The point mass at 0: `μ(z^i) = δ_{i,0}`.
    pub fn dirac(ctx: &PadicContext, k: u32, depth: u32) -> Self {
        let mut mu = Self::zero(ctx, k, depth);
        mu.moments[0] = ctx.one();
        mu
    }

    /// Builds from signed integers, clamped to the nominal profile. Missing
    /// trailing moments are zero.
    pub fn from_integers(ctx: &PadicContext, k: u32, depth: u32, values: &[i64]) -> Self {
        let mut mu = Self::zero(ctx, k, depth);
        for (i, v) in values.iter().enumerate().take(mu.moments.len()) {
            mu.moments[i] = ctx.from_i64(*v).with_precision(mu.nominal(i));
        }
        mu
    }

    /// Builds from scalars; each precision is capped by the nominal profile.
    pub fn from_scalars(ctx: &PadicContext, k: u32, depth: u32, values: Vec<PadicScalar>) -> Result<Self> {
        if values.len() != Self::len_for(k, depth) {
            return Err(MomentError::ShapeMismatch);
        }
        let moments = values
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.with_precision(nominal_precision(k, depth, ctx.w(), i)))
            .collect();
        Ok(MomentDistribution { ctx: ctx.clone(), k, depth, moments })
    }

    /// Uniformly random integral distribution at full nominal precision.
    pub fn random<R: Rng + ?Sized>(ctx: &PadicContext, k: u32, depth: u32, rng: &mut R) -> Self {
        let mut mu = Self::zero(ctx, k, depth);
        for i in 0..mu.moments.len() {
            let r = rng.gen_range(0..ctx.modulus());
            mu.moments[i] = PadicScalar::new(ctx.p(), ctx.w(), r, mu.nominal(i));
        }
        mu
    }

    /// Random element of `Fil^level` stored at depth `depth >= level`, with
    /// every moment known to the nominal precision of `depth`.
    pub fn random_in_fil<R: Rng + ?Sized>(
        ctx: &PadicContext,
        k: u32,
        depth: u32,
        level: u32,
        rng: &mut R,
    ) -> Self {
        let mut mu = Self::zero(ctx, k, depth);
        for j in 1..=depth as usize {
            let i = k as usize - 2 + j;
            let need = (level as i64 - j as i64 + 1).max(0) as u32;
            let r = ctx.mul(rng.gen_range(0..ctx.modulus()), ctx.pow_p(need));
            let r = if need >= ctx.w() { 0 } else { r };
            mu.moments[i] = PadicScalar::new(ctx.p(), ctx.w(), r, mu.nominal(i));
        }
        mu
    }

    pub fn ctx(&self) -> &PadicContext {
        &self.ctx
    }

    pub fn weight(&self) -> u32 {
        self.k
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn moments(&self) -> &[PadicScalar] {
        &self.moments
    }

    pub fn moment(&self, i: usize) -> PadicScalar {
        self.moments[i]
    }

    pub fn len(&self) -> usize {
        self.moments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moments.is_empty()
    }

    pub fn nominal(&self, i: usize) -> u32 {
        nominal_precision(self.k, self.depth, self.ctx.w(), i)
    }

    pub fn set_moment(&mut self, i: usize, value: PadicScalar) {
        self.moments[i] = value.with_precision(self.nominal(i));
    }

    fn same_shape(&self, o: &MomentDistribution) -> Result<()> {
        if self.k != o.k || self.depth != o.depth || self.ctx != o.ctx {
            return Err(MomentError::ShapeMismatch);
        }
        Ok(())
    }

    pub fn add(&self, o: &MomentDistribution) -> Result<MomentDistribution> {
        self.same_shape(o)?;
        let moments = self
            .moments
            .iter()
            .zip(&o.moments)
            .map(|(x, y)| x.add(y))
            .collect::<std::result::Result<_, _>>()?;
        Ok(MomentDistribution { moments, ..self.clone() })
    }

    pub fn neg(&self) -> MomentDistribution {
        MomentDistribution { moments: self.moments.iter().map(|x| x.neg()).collect(), ..self.clone() }
    }

    pub fn sub(&self, o: &MomentDistribution) -> Result<MomentDistribution> {
        self.add(&o.neg())
    }

    /// Multiplies every moment by an integer residue mod `p^W`.
    pub fn scale(&self, r: u64) -> MomentDistribution {
        let ctx = &self.ctx;
        let v = ctx.valuation(r, ctx.w());
        let moments = self
            .moments
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let prec = (x.precision() + v).min(self.nominal(i));
                PadicScalar::new(ctx.p(), ctx.w(), ctx.mul(x.residue(), r), prec)
            })
            .collect();
        MomentDistribution { moments, ..self.clone() }
    }

    /// True when all moments are zero at their stored precision.
    pub fn is_zero(&self) -> bool {
        self.moments.iter().all(|x| x.is_zero())
    }

    /// Componentwise agreement at the smaller precision of each pair.
    pub fn agrees_with(&self, o: &MomentDistribution) -> bool {
        self.k == o.k
            && self.moments.len() == o.moments.len()
            && self.moments.iter().zip(&o.moments).all(|(x, y)| x.agrees_with(y))
    }

    /// Smallest `n` with `μ(z^n)` nonzero at its precision.
    pub fn lowest_nonzero_index(&self) -> Option<usize> {
        self.moments.iter().position(|x| !x.is_zero())
    }

    /// Largest `L <= M` such that moment `k-2+j` vanishes modulo
    /// `p^{L-j+1}` and every low moment modulo `p^{L+1}`; `-1` if a low
    /// moment is a unit. Measures how close to zero the distribution is.
    pub fn zero_level(&self) -> i64 {
        let k2 = self.k as usize - 2;
        let mut level = self.depth as i64;
        for (i, x) in self.moments.iter().enumerate() {
            let v = x.valuation() as i64;
            let bound = if i <= k2 { v - 1 } else { v + (i - k2) as i64 - 1 };
            level = level.min(bound);
        }
        level.max(-1)
    }

    /// Keeps moments `0 ..= new_depth + k - 2` with the profile of the new depth.
    pub fn truncate(&self, new_depth: u32) -> MomentDistribution {
        let new_depth = new_depth.min(self.depth);
        let n = Self::len_for(self.k, new_depth);
        let moments = (0..n)
            .map(|i| self.moments[i].with_precision(nominal_precision(self.k, new_depth, self.ctx.w(), i)))
            .collect();
        MomentDistribution { depth: new_depth, moments, ..self.clone() }
    }

    /// Lowers every moment's precision to at most `cap(i)`.
    pub fn cap_precision(&self, cap: impl Fn(usize) -> u32) -> MomentDistribution {
        let moments = self.moments.iter().enumerate().map(|(i, x)| x.with_precision(cap(i))).collect();
        MomentDistribution { moments, ..self.clone() }
    }

    /// Re-embeds in a context with a different working exponent (same `p`).
    pub fn with_context(&self, ctx: &PadicContext) -> MomentDistribution {
        let moments = self
            .moments
            .iter()
            .enumerate()
            .map(|(i, x)| PadicScalar::new(ctx.p(), ctx.w(), x.residue(), x.precision().min(nominal_precision(self.k, self.depth, ctx.w(), i))))
            .collect();
        MomentDistribution { ctx: ctx.clone(), moments, ..self.clone() }
    }

    /// Right action `∫ f d(μ|γ) = ∫ (a+cz)^{k-2} f((b+dz)/(a+cz)) dμ`.
    pub fn act(&self, g: &IntMatrix2) -> Result<MomentDistribution> {
        Ok(self.apply(&ActionMatrix::new(&self.ctx, self.k, self.depth, g)?))
    }

    /// Applies a precomputed linear map; output precision is the induced
    /// one, capped by the nominal profile.
    pub fn apply(&self, map: &ActionMatrix) -> MomentDistribution {
        assert_eq!(map.len, self.moments.len(), "action matrix shape");
        let ctx = &self.ctx;
        let n_len = self.moments.len();
        let out = (0..n_len)
            .map(|n| {
                let mut acc = 0u64;
                let mut prec = self.nominal(n);
                for (i, &coef) in map.rows[n * n_len..(n + 1) * n_len].iter().enumerate() {
                    if coef == 0 {
                        continue;
                    }
                    let x = self.moments[i];
                    prec = prec.min(x.precision() + ctx.valuation(coef, ctx.w()));
                    acc = ctx.add(acc, ctx.mul(coef, x.residue()));
                }
                PadicScalar::new(ctx.p(), ctx.w(), acc, prec)
            })
            .collect();
        MomentDistribution { moments: out, ..self.clone() }
    }

    /// Action of `[[1, b], [0, p^s]]` through the Cauchy-coefficient formula
    /// `Σ_j p^{sj} μ_j C(-j-1, n-j) (-b)^{n-j}`. Output moment `n` depends
    /// only on input moments `0..=n`.
    pub fn act_beta(&self, b: u64, s: u32) -> MomentDistribution {
        let ctx = &self.ctx;
        let n_len = self.moments.len();
        let minus_b = ctx.neg(b % ctx.modulus());
        let ps = ctx.pow_p(s.min(ctx.w()));
        let ps = if s >= ctx.w() { 0 } else { ps };
        let mut scaled = Vec::with_capacity(n_len);
        let mut pw = 1 % ctx.modulus();
        let mut mb_pow = vec![1u64; n_len];
        for i in 0..n_len {
            scaled.push((ctx.mul(pw, self.moments[i].residue()), self.moments[i].precision() + ctx.valuation(pw, ctx.w())));
            pw = ctx.mul(pw, ps);
            if i > 0 {
                mb_pow[i] = ctx.mul(mb_pow[i - 1], minus_b);
            }
        }
        let mut out = Vec::with_capacity(n_len);
        for n in 0..n_len {
            let mut acc = 0u64;
            let mut prec = self.nominal(n);
            for (j, &(r, pr)) in scaled.iter().enumerate().take(n + 1) {
                let coef = ctx.mul(binom_neg(j as u64, (n - j) as u64, ctx).residue(), mb_pow[n - j]);
                if coef == 0 {
                    continue;
                }
                prec = prec.min(pr + ctx.valuation(coef, ctx.w()));
                acc = ctx.add(acc, ctx.mul(coef, r));
            }
            out.push(PadicScalar::new(ctx.p(), ctx.w(), acc, prec));
        }
        MomentDistribution { moments: out, ..self.clone() }
    }

    /// `U_p μ = Σ_{b=0}^{p-1} μ|β_{b,p}`.
    pub fn u_p(&self) -> MomentDistribution {
        let mut acc = self.act_beta(0, 1);
        for b in 1..self.ctx.p() {
            acc = acc.add(&self.act_beta(b, 1)).expect("same shape");
        }
        acc
    }

    /// `ρ_k(μ) = ∫ (1 - Xz)^{k-2} dμ`.
    pub fn rho_k(&self) -> PadicPoly {
        let ctx = &self.ctx;
        let k2 = self.k as i64 - 2;
        (0..=k2 as usize)
            .map(|j| {
                let c = binomial(k2, j as u64, ctx);
                let c = if j % 2 == 1 { ctx.neg(c) } else { c };
                let x = self.moments[j];
                PadicScalar::new(ctx.p(), ctx.w(), ctx.mul(c, x.residue()), x.precision() + ctx.valuation(c, ctx.w()))
                    .with_precision(self.nominal(j))
            })
            .collect()
    }

    /// Largest `M' <= M` with `μ ∈ Fil^{M'}`, or `None` when some moment of
    /// index `<= k-2` is nonzero.
    pub fn fil_level(&self) -> Option<u32> {
        let k2 = self.k as usize - 2;
        if self.moments[..=k2].iter().any(|x| !x.is_zero()) {
            return None;
        }
        let mut level = self.depth as i64;
        for j in 1..=self.depth as usize {
            let v = self.moments[k2 + j].valuation() as i64;
            level = level.min(v + j as i64 - 1);
        }
        Some(level as u32)
    }

    /// Solves `μ|(γ1 - 1) = ν` by forward substitution. The top moment is
    /// undetermined and returned as zero at precision 0.
    pub fn solve_gamma1(&self) -> Result<MomentDistribution> {
        let ctx = &self.ctx;
        if !self.moments[0].is_zero() {
            return Err(MomentError::NonzeroConstantTerm);
        }
        let n_len = self.moments.len();
        let k2 = self.k as usize - 2;
        let mut res = vec![0u64; n_len];
        let mut prec = vec![0u32; n_len];
        for n in 1..n_len {
            let mut acc = self.moments[n].residue();
            let mut pr = self.moments[n].precision();
            for l in 0..n - 1 {
                let c = binomial(n as i64, l as u64, ctx);
                acc = ctx.sub(acc, ctx.mul(c, res[l]));
                pr = pr.min(prec[l] + ctx.valuation(c, ctx.w()));
            }
            let v = ctx.valuation(n as u64 % ctx.modulus(), ctx.w());
            let idx = n - 1;
            if pr <= v {
                if idx <= k2 {
                    return Err(MomentError::PrecisionExhausted(idx));
                }
                res[idx] = 0;
                prec[idx] = 0;
                continue;
            }
            let acc = acc % ctx.pow_p(pr);
            if acc % ctx.pow_p(v) != 0 {
                return Err(MomentError::NonIntegralQuotient(idx));
            }
            let unit = ctx.inv((n as u64 / ctx.pow_p(v)) % ctx.modulus())?;
            res[idx] = ctx.mul(acc / ctx.pow_p(v), unit);
            prec[idx] = (pr - v).min(self.nominal(idx));
        }
        let moments = res
            .into_iter()
            .zip(prec)
            .map(|(r, pr)| PadicScalar::new(ctx.p(), ctx.w(), r, pr))
            .collect();
        Ok(MomentDistribution { moments, ..self.clone() })
    }

    /// Multiplies by `p^s` and moves to depth `M + s`. For `s < 0` every
    /// retained moment must be divisible by `p^{|s|}`.
    pub fn scale_shift(&self, s: i64) -> Result<MomentDistribution> {
        let ctx = &self.ctx;
        if s >= 0 {
            let s = s as u32;
            let depth = self.depth + s;
            let mut out = Self::zero(ctx, self.k, depth);
            let ps = if s >= ctx.w() { 0 } else { ctx.pow_p(s) };
            for (i, x) in self.moments.iter().enumerate() {
                out.moments[i] = PadicScalar::new(ctx.p(), ctx.w(), ctx.mul(x.residue(), ps), x.precision() + s)
                    .with_precision(out.nominal(i));
            }
            return Ok(out);
        }
        let t = (-s) as u32;
        if t > self.depth {
            return Err(MomentError::NegativeShiftBelowFloor(s));
        }
        let depth = self.depth - t;
        let n = Self::len_for(self.k, depth);
        let pt = ctx.pow_p(t);
        let mut moments = Vec::with_capacity(n);
        for (i, x) in self.moments.iter().take(n).enumerate() {
            if x.valuation() < t {
                return Err(MomentError::NegativeShiftBelowFloor(s));
            }
            let prec = x.precision() - t;
            moments.push(PadicScalar::new(ctx.p(), ctx.w(), x.residue() / pt, prec.min(nominal_precision(self.k, depth, ctx.w(), i))));
        }
        Ok(MomentDistribution { depth, moments, ..self.clone() })
    }

    pub fn to_repr(&self) -> MomentRepr {
        MomentRepr {
            p: self.ctx.p(),
            k: self.k,
            m: self.depth,
            w: self.ctx.w(),
            moments: self.moments.iter().map(|x| x.to_pair()).collect(),
        }
    }

    pub fn from_repr(repr: &MomentRepr) -> Result<MomentDistribution> {
        let ctx = PadicContext::new(repr.p, repr.w)?;
        let values = repr
            .moments
            .iter()
            .map(|r| PadicScalar::from_pair(&ctx, r))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        MomentDistribution::from_scalars(&ctx, repr.k, repr.m, values)
    }
}

/// JSON form of a moment vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentRepr {
    pub p: u64,
    pub k: u32,
    #[serde(rename = "M")]
    pub m: u32,
    #[serde(rename = "W")]
    pub w: u32,
    pub moments: Vec<ScalarRepr>,
}

/// `Σ_j (-1)^j μ_j f_j / C(k-2, j)`, the pairing that makes
/// `pair(ρ_k(μ), z^j) = μ(z^j)`.
pub fn pair(poly_mu: &[PadicScalar], poly_f: &[PadicScalar], k: u32, ctx: &PadicContext) -> Result<PadicScalar> {
    let k2 = k as i64 - 2;
    let mut acc = ctx.zero();
    for j in 0..=k2 as usize {
        let (Some(m), Some(f)) = (poly_mu.get(j), poly_f.get(j)) else {
            continue;
        };
        let term = m.mul(f).or_else(|_| Ok::<_, PadicError>(PadicScalar::new(ctx.p(), ctx.w(), 0, 0)))?;
        let c = ctx.from_i64(0).add(&PadicScalar::new(ctx.p(), ctx.w(), binomial(k2, j as u64, ctx), ctx.w()))?;
        let q = match term.div(&c) {
            Ok(q) => q,
            Err(PadicError::PrecisionExhausted) => PadicScalar::new(ctx.p(), ctx.w(), 0, 0),
            Err(_) => return Err(MomentError::NonIntegralQuotient(j)),
        };
        acc = if j % 2 == 1 { acc.sub(&q)? } else { acc.add(&q)? };
    }
    Ok(acc)
}

/// `P|γ(X) = (a - bX)^{k-2} P((dX - c)/(a - bX))`, the action on
/// `Z_p[X]_{k-2}` matching `ρ_k(μ|γ) = ρ_k(μ)|γ`. Residues mod `p^W`.
pub fn poly_act(poly: &[u64], g: &IntMatrix2, k: u32, ctx: &PadicContext) -> Vec<u64> {
    let k2 = k as usize - 2;
    let lin = |c0: i64, c1: i64| vec![ctx.reduce_i128(c0 as i128), ctx.reduce_i128(c1 as i128)];
    let mul = |x: &[u64], y: &[u64]| {
        let mut out = vec![0u64; x.len() + y.len() - 1];
        for (i, &a) in x.iter().enumerate() {
            for (j, &b) in y.iter().enumerate() {
                out[i + j] = ctx.add(out[i + j], ctx.mul(a, b));
            }
        }
        out
    };
    let num = lin(-g.c, g.d);
    let den = lin(g.a, -g.b);
    let mut out = vec![0u64; k2 + 1];
    for (j, &pj) in poly.iter().enumerate().take(k2 + 1) {
        let mut term = vec![pj];
        for _ in 0..j {
            term = mul(&term, &num);
        }
        for _ in j..k2 {
            term = mul(&term, &den);
        }
        for (i, t) in term.into_iter().enumerate() {
            out[i] = ctx.add(out[i], t);
        }
    }
    out
}
