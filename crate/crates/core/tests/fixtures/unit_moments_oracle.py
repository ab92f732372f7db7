"""Independent Riemann-sum computation of unit moments of the p-adic measure
attached to a weight-2 eigensymbol (ordinary p, p not dividing N).

The measure of a + p^n Z_p is
    alpha^-n phi(a/p^n) - alpha^-(n+1) phi(a/p^(n-1)),
with phi(r) the symbol on the path from infinity to r and alpha the unit root
of x^2 - a_p x + p. a_p is obtained by counting points on the curve given on
the command line. Moments are Riemann sums over a + p^n Z_p with
representatives 0 < a < p^n; each is correct modulo p^n.

usage: unit_moments_oracle.py SYMBOL P N_EXP JMAX A1 A2 A3 A4 A6

The committed fixture was produced by
    python3 unit_moments_oracle.py n11_k2_symbol.txt 3 12 4 0 -1 1 -10 -20
with the curve y^2 + y = x^3 - x^2 - 10x - 20 of conductor 11.
"""

import json
import sys
from fractions import Fraction
from math import gcd


def read_symbol(path):
    with open(path) as f:
        rows = [line.split() for line in f if line.strip()]
    level, k, t = map(int, rows[0])
    assert k == 2, "weight 2 only"
    gens = []
    for row in rows[1 : t + 1]:
        text = " ".join(row)
        mat = text[text.index("[") + 1 : text.index("]")].split()
        a, b, c, d = map(int, mat)
        value = Fraction(text[text.index("]") + 1 :].split()[0])
        gens.append(((c, d), value))
    return level, gens


def p1_lookup(level, gens):
    table = {}
    units = [u for u in range(level) if gcd(u, level) == 1]
    for idx, ((c, d), _) in enumerate(gens):
        for u in units:
            table.setdefault(((u * c) % level, (u * d) % level), idx)
    return table


def symbol_on_path(r_num, r_den, level, gens, table):
    """phi(infinity -> r_num/r_den) via continued-fraction convergents."""
    total = Fraction(0)
    p_prev, q_prev = 1, 0
    p_pp, q_pp = 0, 1
    u, v = r_num, r_den
    while v != 0:
        a = u // v
        u, v = v, u - a * v
        p_cur, q_cur = a * p_prev + p_pp, a * q_prev + q_pp
        # path p_prev/q_prev -> p_cur/q_cur is g(inf -> 0) with bottom row
        # (+-q_prev, q_cur); the sign does not change the P^1 class up to -1.
        det = p_prev * q_cur - p_cur * q_prev
        c, d = (q_prev, q_cur) if det == 1 else (-q_prev, q_cur)
        total += gens[table[(c % level, d % level)]][1]
        p_pp, q_pp, p_prev, q_prev = p_prev, q_prev, p_cur, q_cur
    return total


def count_ap(p, a1, a2, a3, a4, a6):
    pts = 1
    for x in range(p):
        for y in range(p):
            if (y * y + a1 * x * y + a3 * y - (x**3 + a2 * x * x + a4 * x + a6)) % p == 0:
                pts += 1
    return p + 1 - pts


def unit_root(ap, p, prec):
    mod = p**prec
    x = ap % p
    for _ in range(2 * prec + 2):
        f = (x * x - ap * x + p) % mod
        df = (2 * x - ap) % mod
        x = (x - f * pow(df, -1, mod)) % mod
    assert (x * x - ap * x + p) % mod == 0 and x % p != 0
    return x


def main():
    path, p, n, jmax = sys.argv[1], *map(int, sys.argv[2:5])
    curve = list(map(int, sys.argv[5:10]))
    level, gens = read_symbol(path)
    table = p1_lookup(level, gens)
    ap = count_ap(p, *curve)
    prec = n + 4
    mod = p**prec
    alpha = unit_root(ap, p, prec)
    ainv = pow(alpha, -1, mod)

    def embed(q):
        return q.numerator * pow(q.denominator, -1, mod) % mod

    pn = p**n
    moments = [0] * (jmax + 1)
    an = pow(ainv, n, mod)
    an1 = an * ainv % mod
    for a in range(1, pn):
        if a % p == 0:
            continue
        fine = embed(symbol_on_path(a, pn, level, gens, table))
        coarse = embed(symbol_on_path(a, pn // p, level, gens, table))
        mass = (an * fine - an1 * coarse) % mod
        aj = 1
        for j in range(jmax + 1):
            moments[j] = (moments[j] + aj * mass) % mod
            aj = aj * a % mod
    out = {
        "level": level,
        "p": p,
        "a_p": ap,
        "precision": n,
        "unit_moments": [str(m % pn) for m in moments],
    }
    print(json.dumps(out))


if __name__ == "__main__":
    main()
