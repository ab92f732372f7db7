//! Classical modular symbols for `Γ0(M)` with values in polynomials of
//! degree `<= k-2`, Hecke operators, and rational eigensymbols.
//!
//! Right action conventions: `(P|γ)(X) = (a - bX)^{k-2} P((dX - c)/(a - bX))`
//! on values, and `(Φ|δ)(D) = Φ(δD)|δ` on symbols. Invariance under `Γ`
//! means `Φ(γD) = Φ(D)|γ^{-1}`.

pub mod divisor;
pub mod hecke;
pub mod linalg;
pub mod p1;

use std::fmt::Write as _;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

pub use divisor::{decompose, decompose_path, Cusp, Divisor, DivisorDecomposition};
pub use hecke::{cuspidal_eigensymbols, hecke_matrices, EigenSymbol, SymbolSpace};
pub use linalg::{Q, QMatrix};
pub use p1::{Presentation, Relation, Torsion};

use crate::moments::IntMatrix2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManinError {
    #[error("no rational cuspidal eigensystem for T_l, l <= {0}")]
    NoRationalEigensystem(u64),
    #[error("eigen index {index} out of range ({count} eigensymbols)")]
    EigenIndex { index: usize, count: usize },
    #[error("symbol is not a Hecke eigenvector for T_{0}")]
    NotAnEigenvector(u64),
    #[error("malformed symbol text: {0}")]
    Parse(String),
    #[error("symbol has level {found}, expected {expected}")]
    LevelMismatch { expected: u64, found: u64 },
}

pub type Piece = (i64, usize, IntMatrix2);

/// Matrix of `P ↦ P|m` on coefficient vectors of length `k - 1`:
/// `(P|m)_i = Σ_j A[i][j] P_j`.
pub fn poly_action_matrix(m: &IntMatrix2, k: u32) -> Vec<Vec<BigInt>> {
    let k2 = k as usize - 2;
    let num = [BigInt::from(-m.c), BigInt::from(m.d)];
    let den = [BigInt::from(m.a), BigInt::from(-m.b)];
    let mul = |x: &[BigInt], y: &[BigInt]| {
        let mut out = vec![BigInt::zero(); x.len() + y.len() - 1];
        for (i, a) in x.iter().enumerate() {
            for (j, b) in y.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    };
    let mut a = vec![vec![BigInt::zero(); k2 + 1]; k2 + 1];
    for j in 0..=k2 {
        let mut term = vec![BigInt::from(1)];
        for _ in 0..j {
            term = mul(&term, &num);
        }
        for _ in j..k2 {
            term = mul(&term, &den);
        }
        for (i, t) in term.into_iter().enumerate() {
            a[i][j] = t;
        }
    }
    a
}

pub fn poly_act(poly: &[Q], m: &IntMatrix2, k: u32) -> Vec<Q> {
    let a = poly_action_matrix(m, k);
    a.iter()
        .map(|row| {
            row.iter()
                .zip(poly)
                .filter(|(c, x)| !c.is_zero() && !x.is_zero())
                .map(|(c, x)| Q::from_integer(c.clone()) * x)
                .sum()
        })
        .collect()
}

fn poly_add_assign(acc: &mut [Q], x: &[Q], sign: i64) {
    for (a, b) in acc.iter_mut().zip(x) {
        if sign >= 0 {
            *a += b;
        } else {
            *a -= b;
        }
    }
}

/// A `Γ0(M)`-invariant map `Δ0 → Q[X]_{k-2}`, stored by its values on the
/// generators of the presentation.
#[derive(Debug, Clone)]
pub struct ClassicalSymbol {
    pres: Arc<Presentation>,
    k: u32,
    values: Vec<Vec<Q>>,
}

impl PartialEq for ClassicalSymbol {
    fn eq(&self, o: &Self) -> bool {
        self.level() == o.level() && self.k == o.k && self.values == o.values
    }
}

impl ClassicalSymbol {
    pub fn new(pres: Arc<Presentation>, k: u32, values: Vec<Vec<Q>>) -> Self {
        assert_eq!(values.len(), pres.num_generators());
        assert!(values.iter().all(|v| v.len() == k as usize - 1));
        ClassicalSymbol { pres, k, values }
    }

    pub fn zero(pres: Arc<Presentation>, k: u32) -> Self {
        let t = pres.num_generators();
        ClassicalSymbol::new(pres, k, vec![vec![Q::zero(); k as usize - 1]; t])
    }

    pub fn presentation(&self) -> &Arc<Presentation> {
        &self.pres
    }

    pub fn level(&self) -> u64 {
        self.pres.level()
    }

    pub fn weight(&self) -> u32 {
        self.k
    }

    pub fn values(&self) -> &[Vec<Q>] {
        &self.values
    }

    pub fn value(&self, x: usize) -> &[Q] {
        &self.values[x]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().all(|x| x.is_zero())
    }

    pub fn scale(&self, s: &Q) -> ClassicalSymbol {
        let values = self.values.iter().map(|v| v.iter().map(|x| x * s).collect()).collect();
        ClassicalSymbol { values, ..self.clone() }
    }

    pub fn sub(&self, o: &ClassicalSymbol) -> ClassicalSymbol {
        let values = self
            .values
            .iter()
            .zip(&o.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        ClassicalSymbol { values, ..self.clone() }
    }

    /// `Σ sign · v_y | m` over the pieces.
    pub fn eval_pieces(&self, pieces: &[Piece]) -> Vec<Q> {
        let mut acc = vec![Q::zero(); self.k as usize - 1];
        for (s, y, m) in pieces {
            poly_add_assign(&mut acc, &poly_act(&self.values[*y], m, self.k), *s);
        }
        acc
    }

    pub fn eval(&self, divisor: &Divisor) -> Vec<Q> {
        self.eval_pieces(&decompose(divisor, &self.pres).pieces)
    }

    /// Residual of each relation; all zero for a genuine symbol.
    pub fn relation_residuals(&self) -> Vec<Vec<Q>> {
        self.pres.relations().iter().map(|r| self.eval_pieces(&r.terms)).collect()
    }

    pub fn satisfies_relations(&self) -> bool {
        self.relation_residuals().iter().flatten().all(|x| x.is_zero())
    }

    /// Values on the generators of `target` of `Σ_δ Ψ|δ`, where the
    /// resulting symbol is invariant for `target`'s group. With a single
    /// identity matrix this restricts to a smaller group.
    pub fn transform(&self, target: &Arc<Presentation>, mats: &[IntMatrix2]) -> ClassicalSymbol {
        let pieces = operator_pieces(&self.pres, target, mats);
        let values = pieces.iter().map(|ps| self.eval_pieces(ps)).collect();
        ClassicalSymbol { pres: target.clone(), k: self.k, values }
    }

    /// `T_ℓ` (or `U_ℓ` when `ℓ | M`).
    pub fn hecke(&self, ell: u64) -> ClassicalSymbol {
        self.transform(&self.pres.clone(), &hecke_representatives(ell, self.level()))
    }

    /// The scalar `λ` with `hecke(ℓ) = λ·self`, if any.
    pub fn eigenvalue(&self, ell: u64) -> Result<Q, ManinError> {
        let image = self.hecke(ell);
        let (x, j) = self
            .values
            .iter()
            .enumerate()
            .find_map(|(x, v)| v.iter().position(|c| !c.is_zero()).map(|j| (x, j)))
            .ok_or(ManinError::NotAnEigenvector(ell))?;
        let lambda = &image.values[x][j] / &self.values[x][j];
        if image == self.scale(&lambda) {
            Ok(lambda)
        } else {
            Err(ManinError::NotAnEigenvector(ell))
        }
    }

    /// Header `M k t`, then `index [a b c d] c_0 ... c_{k-2}` per generator.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.level(), self.k, self.values.len());
        for (x, v) in self.values.iter().enumerate() {
            let g = self.pres.generator_matrix(x);
            let _ = write!(s, "{x} [{} {} {} {}]", g.a, g.b, g.c, g.d);
            for c in v {
                let _ = write!(s, " {c}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(pres: Arc<Presentation>, text: &str) -> Result<ClassicalSymbol, ManinError> {
        let parsed = parse_symbol_text(text)?;
        if parsed.level != pres.level() {
            return Err(ManinError::LevelMismatch { expected: pres.level(), found: parsed.level });
        }
        if parsed.rows.len() != pres.num_generators() {
            return Err(ManinError::Parse("generator count".into()));
        }
        for (x, (g, _)) in parsed.rows.iter().enumerate() {
            if *g != pres.generator_matrix(x) {
                return Err(ManinError::Parse(format!("generator {x} matrix differs")));
            }
        }
        let values = parsed.rows.into_iter().map(|(_, v)| v).collect();
        Ok(ClassicalSymbol::new(pres, parsed.k, values))
    }
}

pub struct ParsedSymbol {
    pub level: u64,
    pub k: u32,
    pub rows: Vec<(IntMatrix2, Vec<Q>)>,
}

pub fn parse_symbol_text(text: &str) -> Result<ParsedSymbol, ManinError> {
    let err = |m: &str| ManinError::Parse(m.to_string());
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<u64> = lines
        .next()
        .ok_or_else(|| err("empty"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err("header")))
        .collect::<Result<_, _>>()?;
    let [level, k, t] = header[..] else {
        return Err(err("header needs M k t"));
    };
    let mut rows = Vec::new();
    for line in lines {
        let (head, rest) = line.split_once(']').ok_or_else(|| err("missing ]"))?;
        let (_, mat) = head.split_once('[').ok_or_else(|| err("missing ["))?;
        let e: Vec<i64> = mat
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err("matrix entry")))
            .collect::<Result<_, _>>()?;
        if e.len() != 4 {
            return Err(err("matrix needs 4 entries"));
        }
        let coeffs: Vec<Q> = rest
            .split_whitespace()
            .map(|t| t.parse::<Q>().map_err(|_| err("coefficient")))
            .collect::<Result<_, _>>()?;
        if coeffs.len() != k as usize - 1 {
            return Err(err("coefficient count"));
        }
        rows.push((IntMatrix2::new(e[0], e[1], e[2], e[3]), coeffs));
    }
    if rows.len() as u64 != t {
        return Err(err("row count"));
    }
    Ok(ParsedSymbol { level, k: k as u32, rows })
}

/// Right coset representatives of `T_ℓ` on `Γ0(M)`.
pub fn hecke_representatives(ell: u64, level: u64) -> Vec<IntMatrix2> {
    let l = ell as i64;
    let mut mats: Vec<IntMatrix2> = (0..l).map(|b| IntMatrix2::beta(b, l)).collect();
    if level % ell != 0 {
        mats.push(IntMatrix2::new(l, 0, 0, 1));
    }
    mats
}

/// For each generator `a_x` of `target`, the pieces of `Σ_δ (δ a_x)`
/// decomposed in `source`, with `δ` folded into the matrices.
pub fn operator_pieces(source: &Presentation, target: &Presentation, mats: &[IntMatrix2]) -> Vec<Vec<Piece>> {
    (0..target.num_generators())
        .map(|x| {
            let g = target.generator_matrix(x);
            let mut out = Vec::new();
            for d in mats {
                let dg = d.mul(&g);
                let div = Divisor::path(Cusp::Infinity.apply(&dg), Cusp::integer(0).apply(&dg));
                for (s, y, m) in decompose(&div, source).pieces {
                    out.push((s, y, m.mul(d)));
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn poly_action_is_right_action() {
        let g = IntMatrix2::new(2, 3, 5, 7);
        let h = IntMatrix2::new(1, -4, 3, 2);
        let p: Vec<Q> = (1..=5).map(linalg::q).collect();
        let lhs = poly_act(&poly_act(&p, &g, 6), &h, 6);
        let rhs = poly_act(&p, &g.mul(&h), 6);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn zero_symbol_satisfies_relations() {
        let pres = Arc::new(Presentation::build(11));
        assert!(ClassicalSymbol::zero(pres, 4).satisfies_relations());
    }

    #[test]
    fn text_roundtrip() {
        let pres = Arc::new(Presentation::build(11));
        let mut sym = ClassicalSymbol::zero(pres.clone(), 3);
        sym.values[2][1] = Q::new(3.into(), 7.into());
        sym.values[5][0] = -Q::one();
        let back = ClassicalSymbol::from_text(pres, &sym.to_text()).unwrap();
        assert_eq!(back, sym);
    }
}
