//! Cusps, divisors on `P^1(Q)`, and decomposition into generator pieces via
//! continued fractions.

use std::collections::BTreeMap;
use std::fmt;

use num_integer::Integer;

use super::p1::Presentation;
use crate::moments::IntMatrix2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cusp {
    Infinity,
    /// Reduced fraction `num/den` with `den > 0`.
    Rational(i64, i64),
}

impl Cusp {
    pub fn new(num: i64, den: i64) -> Cusp {
        if den == 0 {
            return Cusp::Infinity;
        }
        let g = num.gcd(&den);
        let (mut n, mut d) = (num / g, den / g);
        if d < 0 {
            n = -n;
            d = -d;
        }
        Cusp::Rational(n, d)
    }

    pub fn integer(n: i64) -> Cusp {
        Cusp::Rational(n, 1)
    }

    /// Image under a Möbius transformation.
    pub fn apply(&self, g: &IntMatrix2) -> Cusp {
        let (x, y) = match *self {
            Cusp::Infinity => (1i128, 0i128),
            Cusp::Rational(n, d) => (n as i128, d as i128),
        };
        let num = g.a as i128 * x + g.b as i128 * y;
        let den = g.c as i128 * x + g.d as i128 * y;
        Cusp::new(num.try_into().expect("cusp overflow"), den.try_into().expect("cusp overflow"))
    }
}

impl fmt::Display for Cusp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cusp::Infinity => write!(f, "oo"),
            Cusp::Rational(n, 1) => write!(f, "{n}"),
            Cusp::Rational(n, d) => write!(f, "{n}/{d}"),
        }
    }
}

/// Finite formal sum of cusps with integer coefficients.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Divisor(BTreeMap<Cusp, i64>);

impl Divisor {
    pub fn zero() -> Self {
        Divisor::default()
    }

    /// The path `from → to`, i.e. `[to] - [from]`.
    pub fn path(from: Cusp, to: Cusp) -> Self {
        let mut d = Divisor::zero();
        d.add_cusp(to, 1);
        d.add_cusp(from, -1);
        d
    }

    pub fn add_cusp(&mut self, c: Cusp, n: i64) {
        let e = self.0.entry(c).or_insert(0);
        *e += n;
        if *e == 0 {
            self.0.remove(&c);
        }
    }

    pub fn add(&mut self, o: &Divisor, n: i64) {
        for (c, m) in &o.0 {
            self.add_cusp(*c, n * m);
        }
    }

    pub fn degree(&self) -> i64 {
        self.0.values().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Cusp, &i64)> {
        self.0.iter()
    }

    pub fn apply(&self, g: &IntMatrix2) -> Divisor {
        let mut out = Divisor::zero();
        for (c, n) in &self.0 {
            out.add_cusp(c.apply(g), *n);
        }
        out
    }
}

/// `Σ sign · (g·(∞→0))` with each `g ∈ SL2(Z)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UnimodularPath(pub Vec<(i64, IntMatrix2)>);

impl UnimodularPath {
    pub fn to_divisor(&self) -> Divisor {
        let mut d = Divisor::zero();
        for (s, g) in &self.0 {
            d.add_cusp(Cusp::integer(0).apply(g), *s);
            d.add_cusp(Cusp::Infinity.apply(g), -*s);
        }
        d
    }
}

/// Unimodular steps from `∞` to `num/den` through the convergents.
pub fn path_from_infinity(target: Cusp) -> Vec<IntMatrix2> {
    let (mut u, mut v) = match target {
        Cusp::Infinity => return Vec::new(),
        Cusp::Rational(n, d) => (n as i128, d as i128),
    };
    let (mut p_prev, mut q_prev) = (1i128, 0i128);
    let (mut p_pp, mut q_pp) = (0i128, 1i128);
    let mut out = Vec::new();
    let mut i = 0usize;
    while v != 0 {
        let a = Integer::div_floor(&u, &v);
        let r = u - a * v;
        let p = a * p_prev + p_pp;
        let q = a * q_prev + q_pp;
        let sign: i128 = if i % 2 == 0 { 1 } else { -1 };
        let m = IntMatrix2::new(
            (sign * p_prev) as i64,
            p as i64,
            (sign * q_prev) as i64,
            q as i64,
        );
        debug_assert_eq!(m.det(), 1);
        out.push(m);
        p_pp = p_prev;
        q_pp = q_prev;
        p_prev = p;
        q_prev = q;
        u = v;
        v = r;
        i += 1;
    }
    out
}

/// Pieces `(sign, generator, m)` such that a symbol takes the value
/// `Σ sign · v_generator | m` on the divisor.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DivisorDecomposition {
    pub pieces: Vec<(i64, usize, IntMatrix2)>,
    pub path: UnimodularPath,
}

/// Decomposes a degree-zero divisor as `Σ_c n_c (∞ → c)`, each path split
/// into unimodular steps.
pub fn decompose(divisor: &Divisor, pres: &Presentation) -> DivisorDecomposition {
    assert_eq!(divisor.degree(), 0, "divisor must have degree 0");
    let mut out = DivisorDecomposition::default();
    for (c, n) in divisor.terms() {
        for g in path_from_infinity(*c) {
            let (_, y, m) = pres.piece(&g);
            out.pieces.push((*n, y, m));
            out.path.0.push((*n, g));
        }
    }
    out
}

/// Pieces for the path `from → to`.
pub fn decompose_path(from: Cusp, to: Cusp, pres: &Presentation) -> DivisorDecomposition {
    decompose(&Divisor::path(from, to), pres)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_to_zero_is_first_generator() {
        let pres = Presentation::build(11);
        let d = decompose_path(Cusp::Infinity, Cusp::integer(0), &pres);
        assert_eq!(d.pieces, vec![(1, 0, IntMatrix2::IDENTITY)]);
    }

    #[test]
    fn roundtrip_examples() {
        let pres = Presentation::build(11);
        for (from, to) in [
            (Cusp::Infinity, Cusp::integer(1)),
            (Cusp::integer(0), Cusp::new(1, 2)),
            (Cusp::new(-7, 13), Cusp::new(22, 9)),
            (Cusp::new(5, 81), Cusp::Infinity),
        ] {
            let div = Divisor::path(from, to);
            let dec = decompose(&div, &pres);
            assert_eq!(dec.path.to_divisor(), div);
        }
        let half = decompose_path(Cusp::integer(0), Cusp::new(1, 2), &pres);
        assert!(half.path.0.len() <= 3);
    }

    #[test]
    fn pieces_reassemble_matrices() {
        let pres = Presentation::build(33);
        let dec = decompose_path(Cusp::Infinity, Cusp::new(17, 27), &pres);
        for ((_, y, m), (_, g)) in dec.pieces.iter().zip(&dec.path.0) {
            // m = g_y g^{-1}, so m g = g_y
            assert_eq!(m.mul(g), pres.generator_matrix(*y));
            assert!(m.in_gamma0(33));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn decomposition_roundtrip(n1 in -500i64..500, d1 in 1i64..500, n2 in -500i64..500, d2 in 1i64..500) {
                let pres = Presentation::build(15);
                let div = Divisor::path(Cusp::new(n1, d1), Cusp::new(n2, d2));
                prop_assert_eq!(decompose(&div, &pres).path.to_divisor(), div);
            }
        }
    }
}
