//! The space `Hom_Γ0(M)(Δ0, Q[X]_{k-2})` and its rational Hecke eigensystems.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::linalg::{charpoly, eval_at, mat_vec, nullspace, primitive, rref, QMatrix, Q};
use super::p1::{num_cusps, Presentation};
use super::{hecke_representatives, operator_pieces, poly_action_matrix, ClassicalSymbol, ManinError};
use crate::moments::IntMatrix2;

/// Solution space of the presentation's relations, with coordinates given
/// by the free columns of the relation matrix.
#[derive(Debug, Clone)]
pub struct SymbolSpace {
    pres: Arc<Presentation>,
    k: u32,
    basis: Vec<Vec<Q>>,
    free: Vec<usize>,
}

fn relation_rows(pres: &Presentation, k: u32) -> QMatrix {
    let w = k as usize - 1;
    let cols = pres.num_generators() * w;
    let mut rows: QMatrix = Vec::new();
    let mut push_terms = |terms: &[(i64, usize, IntMatrix2)]| {
        let mut block = vec![vec![Q::zero(); cols]; w];
        for (s, y, m) in terms {
            let a = poly_action_matrix(m, k);
            for (i, row) in a.iter().enumerate() {
                for (j, c) in row.iter().enumerate() {
                    if !c.is_zero() {
                        block[i][y * w + j] += Q::from_integer(c * s);
                    }
                }
            }
        }
        rows.extend(block);
    };
    for r in pres.relations() {
        push_terms(&r.terms);
    }
    if k % 2 == 1 {
        // -I ∈ Γ0(M) acts on values by (-1)^k
        for x in 0..pres.num_generators() {
            push_terms(&[(1, x, IntMatrix2::IDENTITY), (-1, x, IntMatrix2::new(-1, 0, 0, -1))]);
        }
    }
    rows
}

impl SymbolSpace {
    pub fn new(pres: Arc<Presentation>, k: u32) -> Self {
        assert!(k >= 2, "weight must be at least 2");
        let cols = pres.num_generators() * (k as usize - 1);
        let rows = relation_rows(&pres, k);
        let (basis, free) = nullspace(&rows, cols);
        SymbolSpace { pres, k, basis, free }
    }

    pub fn for_level(level: u64, k: u32) -> Self {
        SymbolSpace::new(Arc::new(Presentation::build(level)), k)
    }

    pub fn presentation(&self) -> &Arc<Presentation> {
        &self.pres
    }

    pub fn weight(&self) -> u32 {
        self.k
    }

    pub fn level(&self) -> u64 {
        self.pres.level()
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// Dimension of the Eisenstein part: `#cusps - 1` for `k = 2`, `#cusps`
    /// for even `k >= 4`.
    pub fn eisenstein_dimension(&self) -> usize {
        if self.k % 2 == 1 {
            return 0;
        }
        let c = num_cusps(self.level()) as usize;
        if self.k == 2 {
            c - 1
        } else {
            c
        }
    }

    pub fn cuspidal_dimension(&self) -> usize {
        self.dimension().saturating_sub(self.eisenstein_dimension())
    }

    fn unflatten(&self, v: &[Q]) -> ClassicalSymbol {
        let w = self.k as usize - 1;
        let values = v.chunks(w).map(|c| c.to_vec()).collect();
        ClassicalSymbol::new(self.pres.clone(), self.k, values)
    }

    fn flatten(sym: &ClassicalSymbol) -> Vec<Q> {
        sym.values().iter().flatten().cloned().collect()
    }

    pub fn basis_symbol(&self, i: usize) -> ClassicalSymbol {
        self.unflatten(&self.basis[i])
    }

    pub fn symbol_from_coords(&self, coords: &[Q]) -> ClassicalSymbol {
        let n = self.basis.first().map_or(0, |b| b.len());
        let mut v = vec![Q::zero(); n];
        for (c, b) in coords.iter().zip(&self.basis) {
            if c.is_zero() {
                continue;
            }
            for (x, y) in v.iter_mut().zip(b) {
                *x += c * y;
            }
        }
        self.unflatten(&v)
    }

    pub fn coords(&self, sym: &ClassicalSymbol) -> Vec<Q> {
        let v = Self::flatten(sym);
        self.free.iter().map(|&f| v[f].clone()).collect()
    }

    /// Matrix of `T_ℓ` on coordinates (acting on column vectors).
    pub fn hecke_matrix(&self, ell: u64) -> QMatrix {
        let pieces = operator_pieces(&self.pres, &self.pres, &hecke_representatives(ell, self.level()));
        let n = self.dimension();
        let mut m = vec![vec![Q::zero(); n]; n];
        for j in 0..n {
            let sym = self.basis_symbol(j);
            let image: Vec<Q> = pieces.iter().flat_map(|ps| sym.eval_pieces(ps)).collect();
            for (i, &f) in self.free.iter().enumerate() {
                m[i][j] = image[f].clone();
            }
        }
        m
    }
}

pub fn hecke_matrices(space: &SymbolSpace, primes: &[u64]) -> Vec<(u64, QMatrix)> {
    primes.iter().map(|&l| (l, space.hecke_matrix(l))).collect()
}

/// A rational Hecke eigensymbol together with its eigenvalues.
#[derive(Debug, Clone)]
pub struct EigenSymbol {
    pub symbol: ClassicalSymbol,
    pub eigenvalues: BTreeMap<u64, BigInt>,
    /// `symbol = scale · (sum of the eigenspace's reduced basis)`.
    pub scale: Q,
    pub multiplicity: usize,
}

impl EigenSymbol {
    pub fn is_cuspidal(&self, level: u64, k: u32) -> bool {
        self.eigenvalues.iter().filter(|(l, _)| level % **l != 0).all(|(l, a)| {
            let bound = BigInt::from(4) * BigInt::from(*l).pow(k - 1);
            a * a <= bound
        })
    }
}

pub fn primes_up_to(n: u64) -> Vec<u64> {
    (2..=n).filter(|&x| crate::padic::is_prime(x)).collect()
}

/// Primes `<= bound`, extended by the smallest prime not dividing `level`.
fn hecke_primes(level: u64, bound: u64) -> Vec<u64> {
    let mut primes = primes_up_to(bound.max(2));
    if primes.iter().all(|l| level % l == 0) {
        let mut l = *primes.last().unwrap() + 1;
        while !crate::padic::is_prime(l) || level % l == 0 {
            l += 1;
        }
        primes.push(l);
    }
    primes
}

fn candidates(ell: u64, level: u64, k: u32) -> Vec<BigInt> {
    let l = BigInt::from(ell);
    let lk1 = l.pow(k - 1);
    // floor(2 ℓ^{(k-1)/2}) via integer square root of 4 ℓ^{k-1}
    let r = (BigInt::from(4) * &lk1).sqrt();
    let r = r.to_i64().expect("Hecke bound fits in i64");
    let mut out: Vec<BigInt> = (-r..=r).map(BigInt::from).collect();
    let mut extra = vec![&lk1 + 1u32, lk1.clone(), BigInt::one()];
    if level % ell == 0 && k >= 2 {
        extra.push(l.pow(k / 2 - 1));
    }
    for e in extra {
        if e.abs() > BigInt::from(r) {
            out.push(-e.clone());
            out.push(e);
        }
    }
    out.sort();
    out.dedup();
    out
}

struct Subspace {
    rows: Vec<Vec<Q>>,
    pivots: Vec<usize>,
    eigenvalues: BTreeMap<u64, BigInt>,
}

fn restrict(t: &QMatrix, s: &Subspace) -> QMatrix {
    let d = s.rows.len();
    let mut r = vec![vec![Q::zero(); d]; d];
    for (c, b) in s.rows.iter().enumerate() {
        let w = mat_vec(t, b);
        for (row, &p) in s.pivots.iter().enumerate() {
            r[row][c] = w[p].clone();
        }
    }
    r
}

/// All simultaneous rational eigensystems of `T_ℓ`, `ℓ <= hecke_bound`.
pub fn rational_eigensystems(space: &SymbolSpace, hecke_bound: u64) -> Vec<EigenSymbol> {
    let n = space.dimension();
    if n == 0 {
        return Vec::new();
    }
    let identity: Vec<Vec<Q>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
        .collect();
    let mut spaces = vec![Subspace { rows: identity, pivots: (0..n).collect(), eigenvalues: BTreeMap::new() }];
    for ell in hecke_primes(space.level(), hecke_bound) {
        let t = space.hecke_matrix(ell);
        let mut next = Vec::new();
        for s in spaces {
            let r = restrict(&t, &s);
            let cp = charpoly(&r);
            for lambda in candidates(ell, space.level(), space.weight()) {
                if !eval_at(&cp, &lambda).is_zero() {
                    continue;
                }
                let mut shifted = r.clone();
                for (i, row) in shifted.iter_mut().enumerate() {
                    row[i] -= Q::from_integer(lambda.clone());
                }
                let (kernel, _) = nullspace(&shifted, r.len());
                let mut rows: Vec<Vec<Q>> = kernel
                    .iter()
                    .map(|c| {
                        let mut v = vec![Q::zero(); n];
                        for (ci, b) in c.iter().zip(&s.rows) {
                            if ci.is_zero() {
                                continue;
                            }
                            for (x, y) in v.iter_mut().zip(b) {
                                *x += ci * y;
                            }
                        }
                        v
                    })
                    .collect();
                let pivots = rref(&mut rows);
                let mut ev = s.eigenvalues.clone();
                ev.insert(ell, lambda);
                next.push(Subspace { rows, pivots, eigenvalues: ev });
            }
        }
        spaces = next;
    }
    spaces
        .into_iter()
        .map(|s| {
            let mut coords = vec![Q::zero(); n];
            for row in &s.rows {
                for (x, y) in coords.iter_mut().zip(row) {
                    *x += y;
                }
            }
            let raw = space.symbol_from_coords(&coords);
            let flat: Vec<Q> = raw.values().iter().flatten().cloned().collect();
            let (_, scale) = primitive(&flat);
            EigenSymbol { symbol: raw.scale(&scale), eigenvalues: s.eigenvalues, scale, multiplicity: s.rows.len() }
        })
        .collect()
}

/// Rational eigensystems passing the Ramanujan bound at every `ℓ ∤ M`.
/// Eisenstein systems have `|a_ℓ| = 1 + ℓ^{k-1}` and are excluded.
pub fn cuspidal_eigensymbols(space: &SymbolSpace, hecke_bound: u64) -> Result<Vec<EigenSymbol>, ManinError> {
    let (level, k) = (space.level(), space.weight());
    let all: Vec<EigenSymbol> = rational_eigensystems(space, hecke_bound)
        .into_iter()
        .filter(|e| e.is_cuspidal(level, k))
        .collect();
    if all.is_empty() && space.cuspidal_dimension() > 0 {
        return Err(ManinError::NoRationalEigensystem(hecke_bound));
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manin::linalg::q;

    #[test]
    fn level_11_weight_2() {
        let space = SymbolSpace::for_level(11, 2);
        assert_eq!(space.dimension(), 3);
        assert_eq!(space.cuspidal_dimension(), 2);
        let eig = cuspidal_eigensymbols(&space, 5).unwrap();
        assert_eq!(eig.len(), 1);
        let e = &eig[0];
        assert_eq!(e.multiplicity, 2);
        assert_eq!(e.eigenvalues[&2], BigInt::from(-2));
        assert_eq!(e.eigenvalues[&3], BigInt::from(-1));
        assert_eq!(e.eigenvalues[&5], BigInt::from(1));
        assert!(e.symbol.satisfies_relations());
        assert_eq!(e.symbol.eigenvalue(2).unwrap(), q(-2));
        assert_eq!(e.symbol.eigenvalue(11).unwrap(), q(1));
    }

    #[test]
    fn level_11_eisenstein() {
        let space = SymbolSpace::for_level(11, 2);
        let all = rational_eigensystems(&space, 3);
        let eis: Vec<_> = all.iter().filter(|e| !e.is_cuspidal(11, 2)).collect();
        assert_eq!(eis.len(), 1);
        assert_eq!(eis[0].eigenvalues[&2], BigInt::from(3));
        assert_eq!(eis[0].symbol.eigenvalue(7).unwrap(), q(8));
    }

    #[test]
    fn level_one_weight_twelve() {
        let space = SymbolSpace::for_level(1, 12);
        assert_eq!(space.cuspidal_dimension(), 2);
        let eig = cuspidal_eigensymbols(&space, 3).unwrap();
        assert_eq!(eig.len(), 1);
        assert_eq!(eig[0].eigenvalues[&2], BigInt::from(-24));
        assert_eq!(eig[0].eigenvalues[&3], BigInt::from(252));
    }

    #[test]
    fn level_one_weight_two_is_empty() {
        let space = SymbolSpace::for_level(1, 2);
        assert!(cuspidal_eigensymbols(&space, 5).unwrap().is_empty());
    }

    #[test]
    fn hecke_operators_commute() {
        let space = SymbolSpace::for_level(11, 4);
        let t2 = space.hecke_matrix(2);
        let t3 = space.hecke_matrix(3);
        let mul = |a: &QMatrix, b: &QMatrix| -> QMatrix {
            (0..a.len())
                .map(|i| (0..a.len()).map(|j| (0..a.len()).map(|l| &a[i][l] * &b[l][j]).sum()).collect())
                .collect()
        };
        assert_eq!(mul(&t2, &t3), mul(&t3, &t2));
    }

    #[test]
    fn level_32_has_cm_form() {
        let space = SymbolSpace::for_level(32, 2);
        let eig = cuspidal_eigensymbols(&space, 5).unwrap();
        assert!(eig.iter().any(|e| e.eigenvalues[&3].is_zero()));
    }
}
