"""Brute-force reference implementations used as test oracles.

These are written with plain Python loops over lists, straight from the
defining formulas, and share no code with the package.
"""

import functools
import itertools
import math
from fractions import Fraction

import numpy as np


# ---------------------------------------------------------------- texture

def neighbour_value(g, cx, cy, p, P, R):
    ang = 2 * math.pi * p / P
    x = cx + R * math.cos(ang)
    y = cy - R * math.sin(ang)
    rx, ry = round(x), round(y)
    if abs(x - rx) < 1e-6:
        x = float(rx)
    if abs(y - ry) < 1e-6:
        y = float(ry)
    x0, y0 = math.floor(x), math.floor(y)
    fx, fy = x - x0, y - y0
    if fx == 0 and fy == 0:
        return float(g[y0][x0])
    x1 = min(x0 + 1, len(g[0]) - 1)
    y1 = min(y0 + 1, len(g) - 1)
    v00, v01 = float(g[y0][x0]), float(g[y0][x1])
    v10, v11 = float(g[y1][x0]), float(g[y1][x1])
    upper = v00 + fx * (v01 - v00)
    lower = v10 + fx * (v11 - v10)
    return upper + fy * (lower - upper)


def interior(g, R):
    b = math.ceil(R)
    for cy in range(b, len(g) - b):
        for cx in range(b, len(g[0]) - b):
            yield cx, cy


def rotate_right(c, i, P):
    s = format(c, f"0{P}b")
    i %= P
    return int(s[-i:] + s[:-i], 2) if i else c


def rot_min(c, P):
    return min(rotate_right(c, i, P) for i in range(P))


def transitions(c, P):
    s = format(c, f"0{P}b")
    return sum(s[k] != s[(k + 1) % P] for k in range(P))


@functools.lru_cache(maxsize=None)
def mapping_table(kind, P):
    n = 2 ** P
    if kind == "raw":
        return list(range(n)), n
    if kind == "riu2":
        return [bin(c).count("1") if transitions(c, P) <= 2 else P + 1 for c in range(n)], P + 2
    reps = sorted({rot_min(c, P) for c in range(n)})
    index = {r: k for k, r in enumerate(reps)}
    return [index[rot_min(c, P)] for c in range(n)], len(reps)


def _hist(codes, table, nbins, weights=None):
    h = [0.0] * nbins
    for k, c in enumerate(codes):
        h[table[c]] += 1.0 if weights is None else weights[k]
    tot = sum(h)
    return [v / tot for v in h] if tot > 0 else h


def _sites(g, P, R):
    out = []
    for cx, cy in interior(g, R):
        gc = float(g[cy][cx])
        gp = [neighbour_value(g, cx, cy, p, P, R) for p in range(P)]
        out.append((gc, gp))
    return out


def lbp_hist(g, P, R, kind="riu2"):
    table, nb = mapping_table(kind, P)
    codes = []
    for gc, gp in _sites(g, P, R):
        codes.append(sum((1 if gp[p] - gc >= 0 else 0) * 2 ** p for p in range(P)))
    return _hist(codes, table, nb)


def albp_weights(g, P, R):
    sites = _sites(g, P, R)
    w = []
    for p in range(P):
        num = sum(gc * gp[p] for gc, gp in sites)
        den = sum(gp[p] * gp[p] for gc, gp in sites)
        w.append(num / den if den > 0 else 1.0)
    return w


def albp_hist(g, P, R, kind="riu2"):
    table, nb = mapping_table(kind, P)
    w = albp_weights(g, P, R)
    codes = []
    for gc, gp in _sites(g, P, R):
        codes.append(sum((1 if gp[p] - w[p] * gc >= 0 else 0) * 2 ** p for p in range(P)))
    return _hist(codes, table, nb)


def clbp_hist(g, P, R, kind="riu2"):
    table, nb = mapping_table(kind, P)
    sites = _sites(g, P, R)
    d = [[gp[p] - gc for p in range(P)] for gc, gp in sites]
    m = [[abs(v) for v in row] for row in d]
    a = sum(sum(row) for row in m) / (len(m) * P)
    s_codes = [sum((1 if row[p] >= 0 else 0) * 2 ** p for p in range(P)) for row in d]
    m_codes = [sum((1 if row[p] >= a else 0) * 2 ** p for p in range(P)) for row in m]
    return _hist(s_codes, table, nb) + _hist(m_codes, table, nb)


def lbpv_hist(g, P, R):
    table, nb = mapping_table("riu2", P)
    codes, var = [], []
    for gc, gp in _sites(g, P, R):
        codes.append(sum((1 if gp[p] - gc >= 0 else 0) * 2 ** p for p in range(P)))
        u = sum(gp) / P
        var.append(sum((v - u) ** 2 for v in gp) / P)
    return _hist(codes, table, nb, var)


def albp_objective(g, P, R, p):
    """Exact (rational) sum of squared directional differences for weight ``v``."""
    sites = [(Fraction(gc), Fraction(gp[p])) for gc, gp in _sites(g, P, R)]

    def f(v):
        v = Fraction(v)
        return sum((gc - v * gp) ** 2 for gc, gp in sites)
    return f


def golden_section(f, lo, hi, iters=200):
    phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    return (a + b) / 2


# ---------------------------------------------------------------- svm

def min_kernel(X, Z):
    return np.array([[sum(min(a, b) for a, b in zip(x, z)) for z in Z] for x in X])


def qp_dual_bruteforce(K, y, C):
    """Exact dual optimum by enumerating which multipliers sit at 0, C or free.

    For each assignment the free block solves the equality-constrained KKT
    system; feasible candidates are compared on the dual objective.
    """
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    best = None
    for states in itertools.product((0, 1, 2), repeat=n):  # 0: lower, 1: upper, 2: free
        alpha = np.array([C if s == 1 else 0.0 for s in states])
        free = [i for i, s in enumerate(states) if s == 2]
        if free:
            fixed = [i for i in range(n) if i not in free]
            m = len(free)
            A = np.zeros((m + 1, m + 1))
            rhs = np.zeros(m + 1)
            A[:m, :m] = Q[np.ix_(free, free)]
            A[:m, m] = -y[free]
            A[m, :m] = y[free]
            rhs[:m] = 1.0 - Q[np.ix_(free, fixed)] @ alpha[fixed]
            rhs[m] = -y[fixed] @ alpha[fixed]
            sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            if not np.allclose(A @ sol, rhs, atol=1e-9):
                continue
            alpha[free] = sol[:m]
            if (alpha[free] <= 0).any() or (alpha[free] >= C).any():
                continue
        if abs(y @ alpha) > 1e-9:
            continue
        obj = alpha.sum() - 0.5 * alpha @ Q @ alpha
        if best is None or obj > best[0] + 1e-12:
            best = (obj, alpha.copy())
    return best


def bias_from_alpha(alpha, y, K, C):
    f = K @ (alpha * y)
    free = (alpha > 1e-9) & (alpha < C - 1e-9)
    if free.any():
        return float(np.mean(y[free] - f[free]))
    lows, highs = [], []
    for i in range(len(y)):
        # alpha=0: y(f+b) >= 1 ; alpha=C: y(f+b) <= 1
        bound = y[i] - f[i]
        at_zero = alpha[i] <= 1e-9
        if (y[i] > 0) == at_zero:
            lows.append(bound)
        else:
            highs.append(bound)
    lo, hi = max(lows, default=-np.inf), min(highs, default=np.inf)
    if np.isinf(lo):
        return hi
    if np.isinf(hi):
        return lo
    return 0.5 * (lo + hi)
