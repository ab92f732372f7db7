//! Dense exact linear algebra over `Q`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Q = BigRational;
pub type QMatrix = Vec<Vec<Q>>;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Row-reduces in place; returns the pivot columns.
pub fn rref(m: &mut QMatrix) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(pr) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, pr);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    pivots
}

/// Basis of `{x : m x = 0}`, one vector per free column, with a 1 in that
/// column and 0 in the other free columns.
pub fn nullspace(m: &QMatrix, cols: usize) -> (Vec<Vec<Q>>, Vec<usize>) {
    let mut red = m.clone();
    let pivots = rref(&mut red);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let basis = free
        .iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); cols];
            v[f] = Q::one();
            for (row, &pc) in red.iter().zip(&pivots) {
                v[pc] = -row[f].clone();
            }
            v
        })
        .collect();
    (basis, free)
}

pub fn mat_vec(m: &QMatrix, v: &[Q]) -> Vec<Q> {
    m.iter()
        .map(|row| row.iter().zip(v).filter(|(a, _)| !a.is_zero()).map(|(a, b)| a * b).sum())
        .collect()
}

/// Characteristic polynomial `det(X - m)`, constant term first, via
/// reduction to Hessenberg form.
pub fn charpoly(m: &QMatrix) -> Vec<Q> {
    let n = m.len();
    let mut h = m.clone();
    for col in 0..n.saturating_sub(2) {
        let m1 = col + 1;
        let Some(i) = (m1..n).find(|&i| !h[i][col].is_zero()) else {
            continue;
        };
        if i != m1 {
            h.swap(i, m1);
            for row in h.iter_mut() {
                row.swap(i, m1);
            }
        }
        let t = h[m1][col].clone();
        for i in m1 + 1..n {
            if h[i][col].is_zero() {
                continue;
            }
            let u = &h[i][col] / &t;
            for j in 0..n {
                let sub = &u * &h[m1][j];
                h[i][j] -= sub;
            }
            for row in h.iter_mut() {
                let add = &u * &row[i];
                row[m1] += add;
            }
        }
    }
    // p_m = (X - h[m-1][m-1]) p_{m-1} - Σ_i (Π sub-diagonal) h[m-i-1][m-1] p_{m-i-1}
    let mut polys: Vec<Vec<Q>> = vec![vec![Q::one()]];
    for m in 1..=n {
        let prev = &polys[m - 1];
        let mut p = vec![Q::zero(); m + 1];
        for (i, c) in prev.iter().enumerate() {
            p[i + 1] += c;
            p[i] -= c * &h[m - 1][m - 1];
        }
        let mut t = Q::one();
        for i in 1..m {
            t *= &h[m - i][m - i - 1];
            if t.is_zero() {
                break;
            }
            let f = &t * &h[m - i - 1][m - 1];
            for (j, c) in polys[m - i - 1].iter().enumerate() {
                p[j] -= &f * c;
            }
        }
        polys.push(p);
    }
    polys.pop().unwrap()
}

/// Value of a polynomial with rational coefficients at an integer.
pub fn eval_at(poly: &[Q], x: &BigInt) -> Q {
    let x = Q::from_integer(x.clone());
    poly.iter().rev().fold(Q::zero(), |acc, c| acc * &x + c)
}

/// Scales a rational vector to a primitive integer vector; returns the
/// vector and the scalar `s` with `primitive = s · v`.
pub fn primitive(v: &[Q]) -> (Vec<BigInt>, Q) {
    use num_integer::Integer;
    let lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * Q::from_integer(lcm.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() {
        return (ints, Q::one());
    }
    let mut scale = Q::new(lcm, g.clone());
    let mut out: Vec<BigInt> = ints.into_iter().map(|x| x / &g).collect();
    if let Some(first) = out.iter().find(|x| !x.is_zero()) {
        if first.is_negative() {
            out.iter_mut().for_each(|x| *x = -x.clone());
            scale = -scale;
        }
    }
    (out, scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[i64]]) -> QMatrix {
        rows.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect()
    }

    #[test]
    fn nullspace_of_rank_one() {
        let a = m(&[&[1, 2, 3], &[2, 4, 6]]);
        let (basis, free) = nullspace(&a, 3);
        assert_eq!(free, vec![1, 2]);
        for v in &basis {
            assert!(mat_vec(&a, v).iter().all(|x| x.is_zero()));
        }
    }

    #[test]
    fn charpoly_small() {
        // [[2,1],[1,2]] has char poly X^2 - 4X + 3
        let p = charpoly(&m(&[&[2, 1], &[1, 2]]));
        assert_eq!(p, vec![q(3), q(-4), q(1)]);
        let p = charpoly(&m(&[&[0, 0, 1], &[1, 0, 0], &[0, 1, 0]]));
        assert_eq!(p, vec![q(-1), q(0), q(0), q(1)]);
    }

    #[test]
    fn charpoly_matches_eigenvalues() {
        let a = m(&[&[4, 1, 0, 2], &[0, 3, 1, 0], &[1, 0, 2, 1], &[0, 1, 0, 5]]);
        let p = charpoly(&a);
        // trace and determinant checks
        assert_eq!(p[3], q(-14));
        let det = {
            let mut red = a.clone();
            let mut d = q(1);
            let n = red.len();
            for c in 0..n {
                let pr = (c..n).find(|&i| !red[i][c].is_zero()).unwrap();
                if pr != c {
                    red.swap(pr, c);
                    d = -d;
                }
                d *= &red[c][c];
                for i in c + 1..n {
                    let f = &red[i][c] / &red[c][c];
                    for j in 0..n {
                        let s = &f * &red[c][j];
                        red[i][j] -= s;
                    }
                }
            }
            d
        };
        assert_eq!(p[0], det);
    }

    #[test]
    fn primitive_scaling() {
        let v = vec![Q::new(2.into(), 3.into()), Q::new((-4).into(), 9.into())];
        let (ints, s) = primitive(&v);
        assert_eq!(ints, vec![BigInt::from(3), BigInt::from(-2)]);
        assert_eq!(s, Q::new(9.into(), 2.into()));
    }
}
