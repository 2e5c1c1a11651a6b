"""Pure-Python implementations of the compiled kernels in ``hostsec._core``.

Same signatures and algorithms; used when the extension is not built or
when ``HOSTSEC_PURE_PYTHON=1`` is set.
"""
import math

import numpy as np
from scipy.special import ndtr

_DBL_EPS = np.finfo(float).eps
_PROB_FLOOR = 1e-300
# occupied cells below this mass are rounding noise; the score there is
# replaced by a large value pointing back toward zero correlation
_DEGENERATE = 1e-12
_SENTINEL = 1e100

_GL = {
    3: (np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904]),
        np.array([0.9324695142031522, 0.6612093864662647, 0.2386191860831970])),
    6: (np.array([0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                  0.2031674267230659, 0.2334925365383547, 0.2491470458134029]),
        np.array([0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                  0.5873179542866171, 0.3678314989981802, 0.1252334085114692])),
    10: (np.array([0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                   0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
                   0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                   0.1527533871307259]),
         np.array([0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                   0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                   0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                   0.07652652113349733])),
}


def _bvnu(dh, dk, r):
    """Vectorized upper orthant P(X > dh, Y > dk) (Genz's BVNU)."""
    dh = np.asarray(dh, dtype=float)
    dk = np.asarray(dk, dtype=float)
    out = np.zeros(np.broadcast(dh, dk).shape)
    dh, dk = np.broadcast_arrays(dh, dk)

    pinf = (dh == np.inf) | (dk == np.inf)
    hneg = (dh == -np.inf) & ~pinf
    kneg = (dk == -np.inf) & ~pinf & ~hneg
    out[hneg] = np.where(dk[hneg] == -np.inf, 1.0, ndtr(-dk[hneg]))
    out[kneg] = ndtr(-dh[kneg])
    fin = ~(pinf | hneg | kneg)
    if not fin.any():
        return out

    h = dh[fin]
    k = dk[fin].copy()
    lg = 3 if abs(r) < 0.3 else (6 if abs(r) < 0.75 else 10)
    w, x = _GL[lg]
    w = np.concatenate([w, w])
    x = np.concatenate([1.0 - x, 1.0 + x])
    tp = 2.0 * math.pi
    hk = h * k
    if abs(r) < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = math.asin(r) / 2.0
        sn = np.sin(asr * x)
        bvn = np.exp((np.outer(hk, sn) - hs[:, None]) / (1.0 - sn * sn)) @ w
        bvn = bvn * asr / tp + ndtr(-h) * ndtr(-k)
    else:
        if r < 0:
            k = -k
            hk = -hk
        bvn = np.zeros_like(h)
        if abs(r) < 1.0:
            as_ = (1.0 - r) * (1.0 + r)
            a = math.sqrt(as_)
            bs = (h - k) ** 2
            asr = -(bs / as_ + hk) / 2.0
            c = (4.0 - hk) / 8.0
            d = (12.0 - hk) / 80.0
            m = asr > -100.0
            bvn[m] = (a * np.exp(asr[m])
                      * (1.0 - c[m] * (bs[m] - as_) * (1.0 - d[m] * bs[m]) / 3.0
                         + c[m] * d[m] * as_ * as_))
            m = hk > -100.0
            b = np.sqrt(bs[m])
            sp = math.sqrt(tp) * ndtr(-b / a)
            bvn[m] = bvn[m] - np.exp(-hk[m] / 2.0) * sp * b * (
                1.0 - c[m] * bs[m] * (1.0 - d[m] * bs[m]) / 3.0)
            a = a / 2.0
            xs = (a * x) ** 2
            asr = -(bs[:, None] / xs[None, :] + hk[:, None]) / 2.0
            rs = np.sqrt(1.0 - xs)
            spv = 1.0 + c[:, None] * xs * (1.0 + 5.0 * d[:, None] * xs)
            ep = np.exp(-(hk[:, None] / 2.0) * xs / (1.0 + rs) ** 2) / rs
            with np.errstate(over="ignore", under="ignore"):
                term = np.where(asr > -100.0, np.exp(asr) * (spv - ep), 0.0)
            bvn = (a * (term @ w) - bvn) / tp
        if r > 0:
            bvn = bvn + ndtr(-np.maximum(h, k))
        else:
            hge = h >= k
            L = np.where(h < 0, ndtr(k) - ndtr(h), ndtr(-h) - ndtr(-k))
            bvn = np.where(hge, -bvn, L - bvn)
    out[fin] = np.clip(bvn, 0.0, 1.0)
    return out


def bvn_cdf(h, k, r):
    """Lower-orthant probability P(X < h, Y < k) at correlation ``r``."""
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    return _bvnu(-h, -k, float(r))


def _bvn_density(h, k, r):
    om = 1.0 - r * r
    with np.errstate(invalid="ignore"):
        d = np.exp(-(h * h - 2.0 * r * h * k + k * k) / (2.0 * om)) / (2.0 * math.pi * math.sqrt(om))
    return np.where(np.isfinite(h) & np.isfinite(k), d, 0.0)


def _grid(tx, ty, r):
    ax = np.concatenate([[-np.inf], tx, [np.inf]])
    ay = np.concatenate([[-np.inf], ty, [np.inf]])
    H, K = np.meshgrid(ax, ay, indexing="ij")
    F = bvn_cdf(H, K, r)
    D = _bvn_density(H, K, r)
    prob = F[1:, 1:] - F[:-1, 1:] - F[1:, :-1] + F[:-1, :-1]
    dprob = D[1:, 1:] - D[:-1, 1:] - D[1:, :-1] + D[:-1, :-1]
    return prob, dprob


def cell_probabilities(tx, ty, r):
    """Rectangle masses of the bivariate normal on the threshold grid."""
    return _grid(np.asarray(tx, float), np.asarray(ty, float), float(r))[0]


def table_loglik(table, tx, ty, r):
    """Multinomial log-likelihood of a contingency table at correlation ``r``."""
    prob = cell_probabilities(tx, ty, r)
    return float(np.sum(np.asarray(table, float) * np.log(np.maximum(prob, _PROB_FLOOR))))


def _score(table, tx, ty, r):
    prob, dprob = _grid(tx, ty, r)
    if np.any((prob < _DEGENERATE) & (table > 0.0)):
        return _SENTINEL if r < 0.0 else -_SENTINEL
    occ = table > 0.0
    return float(np.sum(table[occ] * dprob[occ] / prob[occ]))


def _solve(table, tx, ty, lo, hi, xtol):
    fa = _score(table, tx, ty, lo)
    fb = _score(table, tx, ty, hi)
    if fa <= 0.0 and fb >= 0.0:
        if table_loglik(table, tx, ty, lo) >= table_loglik(table, tx, ty, hi):
            return lo, 1
        return hi, 2
    if fa <= 0.0:
        return lo, 1
    if fb >= 0.0:
        return hi, 2
    a, b = lo, hi
    c, fc = a, fa
    d = e = b - a
    while True:
        if (fb > 0 and fc > 0) or (fb < 0 and fc < 0):
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * _DBL_EPS * abs(b) + 0.5 * xtol
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or fb == 0.0:
            return b, 0
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r_ = fb / fc
                p = s * (2.0 * xm * q * (q - r_) - (b - a) * (r_ - 1.0))
                q = (q - 1.0) * (r_ - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e = d
                d = p / q
            else:
                d = e = xm
        else:
            d = e = xm
        a, fa = b, fb
        b += d if abs(d) > tol1 else math.copysign(tol1, xm)
        fb = _score(table, tx, ty, b)


def polychoric_table(table, tx, ty, lo=-0.999, hi=0.999, xtol=1e-10):
    """Maximum-likelihood correlation for one table with fixed thresholds."""
    table = np.asarray(table, dtype=float)
    tx = np.asarray(tx, dtype=float)
    ty = np.asarray(ty, dtype=float)
    if table.shape != (tx.size + 1, ty.size + 1):
        raise ValueError("table shape does not match thresholds")
    return _solve(table, tx, ty, lo, hi, xtol)


def contingency(x, y, nx, ny):
    """Cross-tabulate two integer code vectors into an ``nx`` x ``ny`` table."""
    idx = np.asarray(x, dtype=np.int64) * ny + np.asarray(y, dtype=np.int64)
    return np.bincount(idx, minlength=nx * ny).astype(float).reshape(nx, ny)


def polychoric_codes(codes, ncat, thresholds, correction=0.5, lo=-0.999, hi=0.999, xtol=1e-10):
    """Pairwise polychoric correlations for a ``(p, n)`` code matrix."""
    codes = np.asarray(codes)
    ncat = np.asarray(ncat, dtype=int)
    thresholds = np.asarray(thresholds, dtype=float)
    p = codes.shape[0]
    R = np.eye(p)
    st = np.zeros((p, p), dtype=np.int8)
    for i in range(p):
        for j in range(i + 1, p):
            if ncat[i] < 2 or ncat[j] < 2:
                st[i, j] = st[j, i] = -1
                continue
            tab = contingency(codes[i], codes[j], ncat[i], ncat[j])
            tab[tab == 0.0] = correction
            rho, status = _solve(tab, thresholds[i, :ncat[i] - 1], thresholds[j, :ncat[j] - 1],
                                 lo, hi, xtol)
            R[i, j] = R[j, i] = rho
            st[i, j] = st[j, i] = status
    return R, st
