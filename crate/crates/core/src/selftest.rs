//! Pinned-seed property corpus shared by the `selftest` command and the
//! acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::exec::Mode;
use crate::lift::{LiftOptions, Lifter};
use crate::manin::{cuspidal_eigensymbols, SymbolSpace};
use crate::moments::{IntMatrix2, MomentDistribution};
use crate::padic::PadicContext;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl CheckResult {
    fn new(name: impl Into<String>) -> Self {
        CheckResult { name: name.into(), cases: 0, failures: 0, first_failure: None }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(detail());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

/// Random element of `Γ0(level)` with entries bounded by `bound`.
pub fn random_gamma0<R: Rng>(level: i64, bound: i64, rng: &mut R) -> IntMatrix2 {
    loop {
        let c = level * rng.gen_range(-bound / level..=bound / level);
        let d = rng.gen_range(-bound..=bound);
        if num_integer::Integer::gcd(&c, &d) != 1 {
            continue;
        }
        // a d - b c = 1
        let (g, x, y) = ext_gcd(d, -c);
        debug_assert_eq!(g, 1);
        let t = rng.gen_range(-3..=3);
        let a = x + t * c;
        let b = y + t * d;
        let m = IntMatrix2::new(a, b, c, d);
        if m.det() == 1 && a.abs() <= bound * 4 && b.abs() <= bound * 4 {
            return m;
        }
    }
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        return if a < 0 { (-a, -1, 0) } else { (a, 1, 0) };
    }
    let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
    (g, y, x - a.div_euclid(b) * y)
}

/// Filtration lemmas on `cases` random elements of `Fil^m` at `(p, k)`.
pub fn filtration_suite(p: u64, k: u32, m: u32, cases: usize, seed: u64) -> Vec<CheckResult> {
    let depth = m + 2 * (k - 1) + 1;
    let ctx = PadicContext::new(p, depth + k).expect("small modulus");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (p << 32) ^ ((k as u64) << 16) ^ m as u64);
    let tag = format!("p={p} k={k} M={m}");
    let mut stable = CheckResult::new(format!("gamma0-stability {tag}"));
    let mut crucial0 = CheckResult::new(format!("beta contraction {tag}"));
    let mut crucial = CheckResult::new(format!("U_p^s into p Fil^(M+1) {tag}"));
    let mut kernel = CheckResult::new(format!("kernel of rho_k {tag}"));
    let mut inclusion = CheckResult::new(format!("p^s Fil^M in Fil^(M+s) {tag}"));
    let mut beta_act = CheckResult::new(format!("Cauchy beta action equals matrix action {tag}"));
    let s_cor = if k > 2 { 1 } else { 2 };
    for case in 0..cases {
        let mu = MomentDistribution::random_in_fil(&ctx, k, depth, m, &mut rng);
        let g = random_gamma0(p as i64, 1000, &mut rng);
        let lvl = mu.act(&g).ok().and_then(|x| x.fil_level());
        stable.record(lvl.is_some_and(|l| l >= m), || format!("case {case}: {g:?} gives {lvl:?}"));

        let b = rng.gen_range(0..p);
        for s in 1..=2u32 {
            let img = mu.act_beta(b, s);
            for t in 0..=s * (k - 1) {
                let e = (s * (k - 1) - t) as i64;
                let lvl = img.scale_shift(-e).ok().and_then(|x| x.fil_level());
                crucial0.record(lvl.is_some_and(|l| l >= m + t), || format!("case {case}: b={b} s={s} t={t} gives {lvl:?}"));
            }
        }

        let mut up = mu.clone();
        for _ in 0..s_cor {
            up = up.u_p();
        }
        let lvl = up.scale_shift(-1).ok().and_then(|x| x.fil_level());
        crucial.record(lvl.is_some_and(|l| l > m), || format!("case {case}: got {lvl:?}"));

        let ker = MomentDistribution::random_in_fil(&ctx, k, depth, 0, &mut rng);
        let img = ker.act_beta(b, 1);
        let ok = img.moments().iter().all(|x| x.valuation() >= (k - 1).min(x.precision()));
        kernel.record(ok, || format!("case {case}: b={b}"));

        let s = rng.gen_range(1..=3u32);
        let lvl = mu.scale_shift(s as i64).ok().and_then(|x| x.fil_level());
        inclusion.record(lvl.is_some_and(|l| l >= m + s), || format!("case {case}: s={s} gives {lvl:?}"));

        let full = MomentDistribution::random(&ctx, k, depth, &mut rng);
        let s = rng.gen_range(1..=2u32);
        let bm = IntMatrix2::beta(b as i64, p.pow(s) as i64);
        let ok = full.act(&bm).is_ok_and(|x| x.agrees_with(&full.act_beta(b, s)));
        beta_act.record(ok, || format!("case {case}: b={b} s={s}"));
    }
    vec![stable, crucial0, crucial, kernel, inclusion, beta_act]
}

/// For random integral `μ`, `ν = μ|(γ1 - 1)` is solved back: the solution
/// maps to `ν` on indices `1..=M+k-3` and reproduces `μ` on `0..=M+k-3`, all
/// at the reported precision.
pub fn gamma1_suite(p: u64, k: u32, m: u32, cases: usize, seed: u64) -> CheckResult {
    let ctx = PadicContext::new(p, m + k).expect("small modulus");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ p);
    let mut res = CheckResult::new(format!("gamma1 roundtrip p={p} k={k} M={m}"));
    for case in 0..cases {
        let mu = MomentDistribution::random(&ctx, k, m, &mut rng);
        let outcome = mu
            .act(&IntMatrix2::GAMMA1)
            .and_then(|x| x.sub(&mu))
            .and_then(|nu| nu.solve_gamma1().map(|sol| (nu, sol)))
            .and_then(|(nu, sol)| Ok((nu, sol.act(&IntMatrix2::GAMMA1)?.sub(&sol)?, sol)));
        let ok = match outcome {
            Ok((nu, back, sol)) => {
                let top = nu.len() - 1;
                (1..top).all(|i| back.moment(i).agrees_with(&nu.moment(i)))
                    && (0..top).all(|i| sol.moment(i).agrees_with(&mu.moment(i)))
            }
            Err(_) => false,
        };
        res.record(ok, || format!("case {case}"));
    }
    res
}

/// Small end-to-end lift with ledger and verification checks.
pub fn lift_suite() -> Vec<CheckResult> {
    let mut ledger = CheckResult::new("ledger gaps N=11 p=3");
    let mut verify = CheckResult::new("eigen, relation and anchoring residuals N=11 p=3");
    let space = SymbolSpace::for_level(11, 2);
    match cuspidal_eigensymbols(&space, 7).map(|mut v| v.remove(0).symbol) {
        Ok(psi) => match Lifter::for_prime(&psi, 3, None, 4, LiftOptions { noise: None, mode: Mode::Parallel }) {
            Ok(mut lifter) => match lifter.run() {
                Ok(phi) => {
                    for e in &lifter.ledger {
                        ledger.record(e.ok(), || format!("{e:?}"));
                    }
                    let r = lifter.verify(&phi);
                    verify.record(r.ok(), || format!("{r:?}"));
                }
                Err(e) => verify.record(false, || e.to_string()),
            },
            Err(e) => verify.record(false, || e.to_string()),
        },
        Err(e) => verify.record(false, || e.to_string()),
    }
    vec![ledger, verify]
}

/// The whole corpus at reduced sizes.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for (p, k, m) in [(3, 2, 8), (3, 4, 6), (5, 6, 5)] {
        out.extend(filtration_suite(p, k, m, 40, seed));
    }
    for p in [5, 7] {
        out.push(gamma1_suite(p, 4, 6, 40, seed));
    }
    out.extend(lift_suite());
    out
}

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma0_samples_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let g = random_gamma0(15, 1000, &mut rng);
            assert!(g.in_gamma0(15), "{g:?}");
        }
    }

    #[test]
    fn small_corpus_passes() {
        for r in filtration_suite(3, 4, 4, 10, 7) {
            assert!(r.passed(), "{r:?}");
        }
        assert!(gamma1_suite(5, 2, 5, 10, 7).passed());
    }
}
