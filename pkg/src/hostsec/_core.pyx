# cython: language_level=3
"""Compiled kernels for bivariate-normal probabilities and polychoric ML.

Mirrors :mod:`hostsec._fallback` function for function.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport asin, sin, exp, sqrt, log, erfc, fabs, INFINITY, M_PI, copysign

cnp.import_array()

cdef double TWOPI = 2.0 * M_PI
cdef double SQRT2 = 1.4142135623730951
cdef double DBL_EPS = 2.220446049250313e-16
cdef double PROB_FLOOR = 1e-300
# occupied cells below this mass are rounding noise; the score there is
# replaced by a large value pointing back toward zero correlation
cdef double DEGENERATE = 1e-12
cdef double SENTINEL = 1e100

cdef double[3] W6 = [0.1713244923791705, 0.3607615730481384, 0.4679139345726904]
cdef double[3] X6 = [0.9324695142031522, 0.6612093864662647, 0.2386191860831970]
cdef double[6] W12 = [0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                      0.2031674267230659, 0.2334925365383547, 0.2491470458134029]
cdef double[6] X12 = [0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                      0.5873179542866171, 0.3678314989981802, 0.1252334085114692]
cdef double[10] W20 = [0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                       0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
                       0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                       0.1527533871307259]
cdef double[10] X20 = [0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                       0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                       0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                       0.07652652113349733]


cdef inline double _phi(double x) nogil:
    return 0.5 * erfc(-x / SQRT2)


cdef double _bvnu(double dh, double dk, double r) nogil:
    """Upper orthant P(X > dh, Y > dk) for standard bivariate normal."""
    cdef double *w
    cdef double *x
    cdef int lg, i, s
    cdef double h, k, hk, bvn, hs, asr, sn, xi, a, as_, bs, c, d, b, sp, xs, rs, ep, L

    if dh == INFINITY or dk == INFINITY:
        return 0.0
    if dh == -INFINITY:
        return 1.0 if dk == -INFINITY else _phi(-dk)
    if dk == -INFINITY:
        return _phi(-dh)

    if fabs(r) < 0.3:
        w = W6; x = X6; lg = 3
    elif fabs(r) < 0.75:
        w = W12; x = X12; lg = 6
    else:
        w = W20; x = X20; lg = 10

    h = dh
    k = dk
    hk = h * k
    bvn = 0.0
    if fabs(r) < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = asin(r) / 2.0
        for i in range(lg):
            for s in range(2):
                xi = 1.0 - x[i] if s == 0 else 1.0 + x[i]
                sn = sin(asr * xi)
                bvn += w[i] * exp((sn * hk - hs) / (1.0 - sn * sn))
        bvn = bvn * asr / TWOPI + _phi(-h) * _phi(-k)
    else:
        if r < 0:
            k = -k
            hk = -hk
        if fabs(r) < 1.0:
            as_ = (1.0 - r) * (1.0 + r)
            a = sqrt(as_)
            bs = (h - k) * (h - k)
            asr = -(bs / as_ + hk) / 2.0
            c = (4.0 - hk) / 8.0
            d = (12.0 - hk) / 80.0
            if asr > -100.0:
                bvn = a * exp(asr) * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0
                                      + c * d * as_ * as_)
            if hk > -100.0:
                b = sqrt(bs)
                sp = sqrt(TWOPI) * _phi(-b / a)
                bvn = bvn - exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0)
            a = a / 2.0
            sp = 0.0
            for i in range(lg):
                for s in range(2):
                    xi = 1.0 - x[i] if s == 0 else 1.0 + x[i]
                    xs = (a * xi) * (a * xi)
                    asr = -(bs / xs + hk) / 2.0
                    if asr > -100.0:
                        rs = sqrt(1.0 - xs)
                        ep = exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs
                        sp += w[i] * exp(asr) * ((1.0 + c * xs * (1.0 + 5.0 * d * xs)) - ep)
            bvn = (a * sp - bvn) / TWOPI
        if r > 0:
            bvn = bvn + _phi(-(h if h > k else k))
        elif h >= k:
            bvn = -bvn
        else:
            if h < 0:
                L = _phi(k) - _phi(h)
            else:
                L = _phi(-h) - _phi(-k)
            bvn = L - bvn
    if bvn < 0.0:
        return 0.0
    if bvn > 1.0:
        return 1.0
    return bvn


cdef inline double _bvn_lower(double h, double k, double r) nogil:
    return _bvnu(-h, -k, r)


cdef inline double _bvn_density(double h, double k, double r) nogil:
    cdef double om
    if h == INFINITY or h == -INFINITY or k == INFINITY or k == -INFINITY:
        return 0.0
    om = 1.0 - r * r
    return exp(-(h * h - 2.0 * r * h * k + k * k) / (2.0 * om)) / (TWOPI * sqrt(om))


def bvn_cdf(h, k, double r):
    """Lower-orthant probability P(X < h, Y < k) at correlation ``r``.

    ``h`` and ``k`` broadcast against each other; infinities are allowed.
    """
    hb, kb = np.broadcast_arrays(np.asarray(h, dtype=np.float64),
                                 np.asarray(k, dtype=np.float64))
    cdef cnp.ndarray[double, ndim=1] hf = np.ascontiguousarray(hb).ravel()
    cdef cnp.ndarray[double, ndim=1] kf = np.ascontiguousarray(kb).ravel()
    cdef Py_ssize_t i, m = hf.shape[0]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] ov = out
    for i in range(m):
        ov[i] = _bvn_lower(hf[i], kf[i], r)
    return out.reshape(hb.shape)


cdef void _cell_grid(double[::1] tx, double[::1] ty, double r,
                     double[:, ::1] prob, double[:, ::1] dprob) nogil:
    """Cell probabilities and their derivatives in ``r`` on the threshold grid."""
    cdef Py_ssize_t nr = tx.shape[0] + 1, nc = ty.shape[0] + 1
    cdef Py_ssize_t i, j
    cdef double ai, ai1, bj, bj1
    for i in range(nr):
        ai1 = -INFINITY if i == 0 else tx[i - 1]
        ai = INFINITY if i == nr - 1 else tx[i]
        for j in range(nc):
            bj1 = -INFINITY if j == 0 else ty[j - 1]
            bj = INFINITY if j == nc - 1 else ty[j]
            prob[i, j] = (_bvn_lower(ai, bj, r) - _bvn_lower(ai1, bj, r)
                          - _bvn_lower(ai, bj1, r) + _bvn_lower(ai1, bj1, r))
            dprob[i, j] = (_bvn_density(ai, bj, r) - _bvn_density(ai1, bj, r)
                           - _bvn_density(ai, bj1, r) + _bvn_density(ai1, bj1, r))


cdef double _score(double[:, ::1] table, double[::1] tx, double[::1] ty, double r,
                   double[:, ::1] prob, double[:, ::1] dprob) nogil:
    cdef Py_ssize_t i, j
    cdef double g = 0.0, p
    _cell_grid(tx, ty, r, prob, dprob)
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            if table[i, j] == 0.0:
                continue
            p = prob[i, j]
            if p < DEGENERATE:
                return SENTINEL if r < 0.0 else -SENTINEL
            g += table[i, j] * dprob[i, j] / p
    return g


cdef double _loglik(double[:, ::1] table, double[::1] tx, double[::1] ty, double r,
                    double[:, ::1] prob, double[:, ::1] dprob) nogil:
    cdef Py_ssize_t i, j
    cdef double ll = 0.0, p
    _cell_grid(tx, ty, r, prob, dprob)
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            p = prob[i, j]
            if p < PROB_FLOOR:
                p = PROB_FLOOR
            ll += table[i, j] * log(p)
    return ll


cdef double _solve(double[:, ::1] table, double[::1] tx, double[::1] ty,
                   double lo, double hi, double xtol,
                   double[:, ::1] prob, double[:, ::1] dprob, int *status) nogil:
    """Brent root of the likelihood score on [lo, hi].

    status: 0 interior root, 1 clamped at lo, 2 clamped at hi.
    """
    cdef double a = lo, b = hi, c, d, e, fa, fb, fc, tol1, xm, p, q, r_, s
    fa = _score(table, tx, ty, a, prob, dprob)
    fb = _score(table, tx, ty, b, prob, dprob)
    if fa <= 0.0 and fb >= 0.0:
        # score rises at both ends: pick the better endpoint
        if _loglik(table, tx, ty, lo, prob, dprob) >= _loglik(table, tx, ty, hi, prob, dprob):
            status[0] = 1
            return lo
        status[0] = 2
        return hi
    if fa <= 0.0:
        status[0] = 1
        return lo
    if fb >= 0.0:
        status[0] = 2
        return hi
    status[0] = 0
    c = a
    fc = fa
    d = b - a
    e = d
    while True:
        if (fb > 0 and fc > 0) or (fb < 0 and fc < 0):
            c = a
            fc = fa
            d = b - a
            e = d
        if fabs(fc) < fabs(fb):
            a = b; b = c; c = a
            fa = fb; fb = fc; fc = fa
        tol1 = 2.0 * DBL_EPS * fabs(b) + 0.5 * xtol
        xm = 0.5 * (c - b)
        if fabs(xm) <= tol1 or fb == 0.0:
            return b
        if fabs(e) >= tol1 and fabs(fa) > fabs(fb):
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
            p = fabs(p)
            if 2.0 * p < min(3.0 * xm * q - fabs(tol1 * q), fabs(e * q)):
                e = d
                d = p / q
            else:
                d = xm
                e = d
        else:
            d = xm
            e = d
        a = b
        fa = fb
        if fabs(d) > tol1:
            b += d
        else:
            b += copysign(tol1, xm)
        fb = _score(table, tx, ty, b, prob, dprob)


def cell_probabilities(tx, ty, double r):
    """Rectangle masses of the bivariate normal on the threshold grid."""
    cdef double[::1] txv = np.ascontiguousarray(tx, dtype=np.float64)
    cdef double[::1] tyv = np.ascontiguousarray(ty, dtype=np.float64)
    prob = np.empty((txv.shape[0] + 1, tyv.shape[0] + 1))
    dprob = np.empty_like(prob)
    _cell_grid(txv, tyv, r, prob, dprob)
    return prob


def table_loglik(table, tx, ty, double r):
    """Multinomial log-likelihood of a contingency table at correlation ``r``."""
    cdef double[:, ::1] tv = np.ascontiguousarray(table, dtype=np.float64)
    cdef double[::1] txv = np.ascontiguousarray(tx, dtype=np.float64)
    cdef double[::1] tyv = np.ascontiguousarray(ty, dtype=np.float64)
    prob = np.empty((tv.shape[0], tv.shape[1]))
    dprob = np.empty_like(prob)
    return _loglik(tv, txv, tyv, r, prob, dprob)


def polychoric_table(table, tx, ty, double lo=-0.999, double hi=0.999, double xtol=1e-10):
    """Maximum-likelihood correlation for one table with fixed thresholds.

    Returns ``(rho, status)`` with status 0 for an interior optimum,
    1 or 2 when clamped at the lower or upper bound.
    """
    cdef double[:, ::1] tv = np.ascontiguousarray(table, dtype=np.float64)
    cdef double[::1] txv = np.ascontiguousarray(tx, dtype=np.float64)
    cdef double[::1] tyv = np.ascontiguousarray(ty, dtype=np.float64)
    if tv.shape[0] != txv.shape[0] + 1 or tv.shape[1] != tyv.shape[0] + 1:
        raise ValueError("table shape does not match thresholds")
    prob = np.empty((tv.shape[0], tv.shape[1]))
    dprob = np.empty_like(prob)
    cdef int status = 0
    cdef double rho = _solve(tv, txv, tyv, lo, hi, xtol, prob, dprob, &status)
    return rho, status


def contingency(x, y, int nx, int ny):
    """Cross-tabulate two integer code vectors into an ``nx`` x ``ny`` table."""
    cdef int[::1] xv = np.ascontiguousarray(x, dtype=np.int32)
    cdef int[::1] yv = np.ascontiguousarray(y, dtype=np.int32)
    out = np.zeros((nx, ny), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        ov[xv[i], yv[i]] += 1.0
    return out


def polychoric_codes(codes, ncat, thresholds, double correction=0.5,
                     double lo=-0.999, double hi=0.999, double xtol=1e-10):
    """Pairwise polychoric correlations for a ``(p, n)`` code matrix.

    ``thresholds`` is ``(p, max_cat - 1)``, row ``i`` holding ``ncat[i] - 1``
    increasing values. Zero cells receive ``correction`` before fitting.
    Returns ``(R, status)``; status is -1 for degenerate pairs.
    """
    cdef int[:, ::1] cv = np.ascontiguousarray(codes, dtype=np.int32)
    cdef int[::1] nc = np.ascontiguousarray(ncat, dtype=np.int32)
    cdef double[:, ::1] th = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef Py_ssize_t p = cv.shape[0], n = cv.shape[1]
    cdef Py_ssize_t i, j, t, a, b
    cdef int maxc = 0
    for i in range(p):
        if nc[i] > maxc:
            maxc = nc[i]
    R = np.eye(p, dtype=np.float64)
    st = np.zeros((p, p), dtype=np.int8)
    cdef double[:, ::1] Rv = R
    cdef signed char[:, ::1] sv = st
    buf = np.zeros((maxc, maxc), dtype=np.float64)
    cdef double[:, ::1] bufv = buf
    cdef double[:, ::1] tab
    cdef double[:, ::1] prob
    cdef double[:, ::1] dprob
    cdef int status
    cdef double rho
    for i in range(p):
        for j in range(i + 1, p):
            if nc[i] < 2 or nc[j] < 2:
                sv[i, j] = -1
                sv[j, i] = -1
                continue
            tab = np.zeros((nc[i], nc[j]), dtype=np.float64)
            prob = np.empty((nc[i], nc[j]), dtype=np.float64)
            dprob = np.empty((nc[i], nc[j]), dtype=np.float64)
            for t in range(n):
                tab[cv[i, t], cv[j, t]] += 1.0
            for a in range(nc[i]):
                for b in range(nc[j]):
                    if tab[a, b] == 0.0:
                        tab[a, b] = correction
            status = 0
            rho = _solve(tab, th[i, :nc[i] - 1], th[j, :nc[j] - 1], lo, hi, xtol,
                         prob, dprob, &status)
            Rv[i, j] = rho
            Rv[j, i] = rho
            sv[i, j] = status
            sv[j, i] = status
    return R, st
