//! `P^1(Z/M)` and the Manin-symbol presentation of `Δ0` for `Γ0(M)`.
//!
//! Generators are `a_x = g_x·(∞ → 0)` for each class `x ∈ P^1(Z/M)`, where
//! `g_x ∈ SL2(Z)` has bottom row lifting `x`. Relations come from
//! `S = [[0,-1],[1,0]]` and `τ = [[0,-1],[1,-1]]`, which satisfy
//! `(1 + S)(∞→0) = 0` and `(1 + τ + τ^2)(∞→0) = 0`.

use num_integer::Integer;

use crate::moments::IntMatrix2;

pub const S: IntMatrix2 = IntMatrix2::new(0, -1, 1, 0);
pub const TAU: IntMatrix2 = IntMatrix2::new(0, -1, 1, -1);

/// Canonical representatives of `P^1(Z/M)` with a lookup table.
#[derive(Debug, Clone)]
pub struct P1List {
    m: u64,
    reps: Vec<(u64, u64)>,
    index: Vec<u32>,
}

impl P1List {
    pub fn new(m: u64) -> Self {
        assert!(m >= 1, "level must be positive");
        let units: Vec<u64> = (1..=m).filter(|u| u.gcd(&m) == 1).map(|u| u % m).collect();
        let mut index = vec![u32::MAX; (m * m) as usize];
        let mut reps = Vec::new();
        for c in 0..m {
            for d in 0..m {
                if c.gcd(&d).gcd(&m) != 1 || index[(c * m + d) as usize] != u32::MAX {
                    continue;
                }
                let id = reps.len() as u32;
                reps.push((c, d));
                for &u in &units {
                    index[((u * c % m) * m + u * d % m) as usize] = id;
                }
            }
        }
        // M = 1 has the single class (0:0) under the loop above
        P1List { m, reps, index }
    }

    pub fn level(&self) -> u64 {
        self.m
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn rep(&self, i: usize) -> (u64, u64) {
        self.reps[i]
    }

    /// Index of the class of `(c : d)`.
    pub fn class_of(&self, c: i64, d: i64) -> usize {
        let m = self.m as i64;
        let (c, d) = (c.rem_euclid(m) as u64, d.rem_euclid(m) as u64);
        let i = self.index[(c * self.m + d) as usize];
        assert!(i != u32::MAX, "({c}:{d}) is not in P^1(Z/{})", self.m);
        i as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Torsion {
    None,
    Order2,
    Order3,
}

/// One linear relation `Σ sign · v_gen | m = 0` among generator values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub terms: Vec<(i64, usize, IntMatrix2)>,
}

#[derive(Debug, Clone)]
pub struct Presentation {
    p1: P1List,
    mats: Vec<IntMatrix2>,
    star: Vec<usize>,
    torsion: Vec<Torsion>,
    relations: Vec<Relation>,
}

/// Lifts `(c : d)` to a matrix of `SL2(Z)` with that bottom row mod `M`.
fn lift_to_sl2(c: u64, d: u64, m: u64) -> IntMatrix2 {
    if m == 1 || (c == 0 && d % m == 1 % m) {
        return IntMatrix2::IDENTITY;
    }
    let c = c as i64;
    let mut d = d as i64;
    if c == 0 {
        d = 1;
    } else {
        while c.gcd(&d) != 1 {
            d += m as i64;
        }
    }
    let e = d.extended_gcd(&c);
    // a d - b c = 1 with a = e.x, b = -e.y
    IntMatrix2::new(e.x, -e.y, c, d)
}

impl Presentation {
    pub fn build(m: u64) -> Self {
        let p1 = P1List::new(m);
        let mats: Vec<IntMatrix2> = (0..p1.len())
            .map(|i| {
                let (c, d) = p1.rep(i);
                lift_to_sl2(c, d, m)
            })
            .collect();
        let t = p1.len();
        let mut pres = Presentation {
            p1,
            mats,
            star: vec![0; t],
            torsion: vec![Torsion::None; t],
            relations: Vec::new(),
        };

        let mut seen2 = vec![false; t];
        let mut seen3 = vec![false; t];
        for x in 0..t {
            let g = pres.mats[x];
            let gs = g.mul(&S);
            let y = pres.class_of_matrix(&gs);
            pres.star[x] = y;
            if !seen2[x] {
                seen2[x] = true;
                seen2[y] = true;
                if x == y {
                    pres.torsion[x] = Torsion::Order2;
                }
                pres.relations.push(Relation { terms: vec![pres.piece(&g), pres.piece(&gs)] });
            }
            if !seen3[x] {
                let gt = g.mul(&TAU);
                let gtt = gt.mul(&TAU);
                let y1 = pres.class_of_matrix(&gt);
                let y2 = pres.class_of_matrix(&gtt);
                seen3[x] = true;
                seen3[y1] = true;
                seen3[y2] = true;
                if y1 == x {
                    pres.torsion[x] = if pres.torsion[x] == Torsion::Order2 { Torsion::Order2 } else { Torsion::Order3 };
                }
                pres.relations.push(Relation { terms: vec![pres.piece(&g), pres.piece(&gt), pres.piece(&gtt)] });
            }
        }
        pres
    }

    pub fn level(&self) -> u64 {
        self.p1.level()
    }

    /// Number of generators `t = |P^1(Z/M)|`.
    pub fn num_generators(&self) -> usize {
        self.mats.len()
    }

    pub fn p1(&self) -> &P1List {
        &self.p1
    }

    /// `g_x`, with `a_x = g_x·(∞ → 0)`.
    pub fn generator_matrix(&self, x: usize) -> IntMatrix2 {
        self.mats[x]
    }

    /// Index of the `S`-partner of `x`.
    pub fn star(&self, x: usize) -> usize {
        self.star[x]
    }

    pub fn torsion(&self, x: usize) -> Torsion {
        self.torsion[x]
    }

    pub fn torsion_tags(&self) -> &[Torsion] {
        &self.torsion
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn class_of_matrix(&self, g: &IntMatrix2) -> usize {
        self.p1.class_of(g.c, g.d)
    }

    /// For `g ∈ SL2(Z)` returns `(+1, y, g_y g^{-1})`: the symbol value on
    /// `g·(∞→0)` is `v_y | g_y g^{-1}`.
    pub fn piece(&self, g: &IntMatrix2) -> (i64, usize, IntMatrix2) {
        debug_assert_eq!(g.det(), 1);
        let y = self.class_of_matrix(g);
        (1, y, self.mats[y].mul(&g.adjugate()))
    }

    /// `γ ∈ Γ0(M)` with `g = γ g_y`.
    pub fn pairing_matrix(&self, g: &IntMatrix2) -> (usize, IntMatrix2) {
        let y = self.class_of_matrix(g);
        (y, g.mul(&self.mats[y].adjugate()))
    }
}

/// Number of cusps of `Γ0(M)`: `Σ_{d | M} φ(gcd(d, M/d))`.
pub fn num_cusps(m: u64) -> u64 {
    (1..=m)
        .filter(|d| m % d == 0)
        .map(|d| euler_phi(d.gcd(&(m / d))))
        .sum()
}

pub fn euler_phi(n: u64) -> u64 {
    (1..=n).filter(|k| k.gcd(&n) == 1).count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p1_sizes() {
        assert_eq!(P1List::new(1).len(), 1);
        assert_eq!(P1List::new(11).len(), 12);
        assert_eq!(P1List::new(33).len(), 48);
        assert_eq!(P1List::new(32).len(), 48);
        assert_eq!(P1List::new(4).len(), 6);
    }

    #[test]
    fn first_generator_is_infinity_to_zero() {
        for m in [1, 2, 11, 33] {
            let pres = Presentation::build(m);
            assert_eq!(pres.generator_matrix(0), IntMatrix2::IDENTITY);
        }
    }

    #[test]
    fn generator_matrices_match_classes() {
        for m in [1, 6, 11, 25, 33] {
            let pres = Presentation::build(m);
            for x in 0..pres.num_generators() {
                let g = pres.generator_matrix(x);
                assert_eq!(g.det(), 1);
                assert_eq!(pres.class_of_matrix(&g), x);
            }
        }
    }

    #[test]
    fn relation_matrices_lie_in_gamma0() {
        for m in [1, 11, 33] {
            let pres = Presentation::build(m);
            for r in pres.relations() {
                for (_, _, g) in &r.terms {
                    assert!(g.in_gamma0(m), "{g:?}");
                }
            }
        }
    }

    #[test]
    fn level_one_torsion() {
        let pres = Presentation::build(1);
        assert_eq!(pres.num_generators(), 1);
        assert_eq!(pres.relations().len(), 2);
        assert_eq!(pres.torsion(0), Torsion::Order2);
    }

    #[test]
    fn cusp_counts() {
        assert_eq!(num_cusps(1), 1);
        assert_eq!(num_cusps(11), 2);
        assert_eq!(num_cusps(33), 4);
        assert_eq!(num_cusps(32), 8);
    }
}
