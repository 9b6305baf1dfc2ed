"""Dual-lane numerical kernels.

Every hot loop in the package (Bessel evaluation, oscillatory transform
sums, radial table builds, uniform-grid interpolation, shifted
convolution) exists in two equivalent implementations: a numba-jitted
lane and a pure-numpy lane.  The active lane is chosen once at import:
``SIMFILM_NUMBA=0`` forces the numpy lane, anything else uses numba when
it is importable.  Both lanes implement the same algorithms so results
agree to rounding; ``benchmarks/bench_lanes.py`` times them against each
other.

The Bessel functions J0, J1, Jl are evaluated from scratch (power series
below x = 12, Hankel asymptotic series beyond, upward recurrence for
l >= 2 at large argument).  scipy.special stays out of the production
path: the jitted lane could not call it, and the test suite uses it as
an independent oracle.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def deco(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return deco

    prange = range  # type: ignore[assignment]

USE_NUMBA = HAVE_NUMBA and os.environ.get("SIMFILM_NUMBA", "1") != "0"

# Power series / asymptotic switch point.  Below: series rounding error
# ~ max-term * eps ~ 4e3 * 1e-16; above: optimal asymptotic truncation
# ~ e^{-2x} ~ e^{-24}.  Both clear the 1e-10 absolute target.
J_SWITCH = 12.0


def lane() -> str:
    """Name of the active lane."""
    return "numba" if USE_NUMBA else "numpy"


# ----------------------------------------------------------------------
# Bessel J, scalar forms (jitted lane)
# ----------------------------------------------------------------------

def _j_series_py(l: int, x: float) -> float:
    # (x/2)^l / l! * sum_j (-x^2/4)^j / (j! (j+l)!)
    t = 1.0
    for i in range(1, l + 1):
        t *= x / (2.0 * i)
    s = t
    q = 0.25 * x * x
    for j in range(1, 80):
        t *= -q / (j * (j + l))
        s += t
        if abs(t) < 1e-18 * (1.0 + abs(s)):
            break
    return s


def _j01_asym_py(nu: int, x: float) -> float:
    # Hankel expansion, truncated at the smallest term.
    mu = 4.0 * nu * nu
    invx = 1.0 / x
    p = 1.0
    q = 0.0
    a = 1.0
    xp = 1.0
    tprev = 1e300
    for k in range(1, 24):
        a *= (mu - (2.0 * k - 1.0) ** 2) / (8.0 * k)
        xp *= invx
        t = a * xp
        if abs(t) >= tprev:
            break
        tprev = abs(t)
        r = k % 4
        if r == 0:
            p += t
        elif r == 1:
            q += t
        elif r == 2:
            p -= t
        else:
            q -= t
    chi = x - (0.5 * nu + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (np.cos(chi) * p - np.sin(chi) * q)


def _bessel_j_py(l: int, x: float) -> float:
    ax = abs(x)
    if ax <= J_SWITCH:
        v = _j_series_py(l, ax)
    elif l <= 1:
        v = _j01_asym_py(l, ax)
    else:
        # upward recurrence, stable here because ax > J_SWITCH >= l
        jm = _j01_asym_py(0, ax)
        jc = _j01_asym_py(1, ax)
        for k in range(1, l):
            jm, jc = jc, 2.0 * k / ax * jc - jm
        v = jc
    if x < 0.0 and (l % 2) == 1:
        return -v
    return v


if HAVE_NUMBA:
    _j_series_nb = njit(cache=True)(_j_series_py)
    _j01_asym_nb = njit(cache=True)(_j01_asym_py)

    @njit(cache=True)
    def _bessel_j_nb(l, x):
        ax = abs(x)
        if ax <= J_SWITCH:
            v = _j_series_nb(l, ax)
        elif l <= 1:
            v = _j01_asym_nb(l, ax)
        else:
            jm = _j01_asym_nb(0, ax)
            jc = _j01_asym_nb(1, ax)
            for k in range(1, l):
                tmp = 2.0 * k / ax * jc - jm
                jm = jc
                jc = tmp
            v = jc
        if x < 0.0 and (l % 2) == 1:
            return -v
        return v


# ----------------------------------------------------------------------
# Bessel J, vectorized forms (numpy lane)
# ----------------------------------------------------------------------

def _j_series_np(l: int, x: np.ndarray) -> np.ndarray:
    t = np.ones_like(x)
    for i in range(1, l + 1):
        t *= x / (2.0 * i)
    s = t.copy()
    q = 0.25 * x * x
    for j in range(1, 80):
        t *= -q / (j * (j + l))
        s += t
        if np.all(np.abs(t) < 1e-18 * (1.0 + np.abs(s))):
            break
    return s


def _j01_asym_np(nu: int, x: np.ndarray) -> np.ndarray:
    mu = 4.0 * nu * nu
    invx = 1.0 / x
    p = np.ones_like(x)
    q = np.zeros_like(x)
    a = 1.0
    xp = np.ones_like(x)
    # With x > J_SWITCH, 16 terms are already below the e^{-2x} floor;
    # past the smallest term the tail is masked off per element.
    tprev = np.full_like(x, 1e300)
    alive = np.ones(x.shape, dtype=bool)
    for k in range(1, 24):
        a *= (mu - (2.0 * k - 1.0) ** 2) / (8.0 * k)
        xp = xp * invx
        t = a * xp
        alive = alive & (np.abs(t) < tprev)
        tprev = np.abs(t)
        tm = np.where(alive, t, 0.0)
        r = k % 4
        if r == 0:
            p += tm
        elif r == 1:
            q += tm
        elif r == 2:
            p -= tm
        else:
            q -= tm
    chi = x - (0.5 * nu + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (np.cos(chi) * p - np.sin(chi) * q)


def bessel_j_np(l: int, x: np.ndarray) -> np.ndarray:
    """Vectorized J_l, numpy lane implementation."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.empty_like(ax)
    small = ax <= J_SWITCH
    if np.any(small):
        out[small] = _j_series_np(l, ax[small])
    big = ~small
    if np.any(big):
        xb = ax[big]
        if l == 0:
            out[big] = _j01_asym_np(0, xb)
        elif l == 1:
            out[big] = _j01_asym_np(1, xb)
        else:
            jm = _j01_asym_np(0, xb)
            jc = _j01_asym_np(1, xb)
            for k in range(1, l):
                jm, jc = jc, 2.0 * k / xb * jc - jm
            out[big] = jc
    if (l % 2) == 1:
        out = np.where(x < 0.0, -out, out)
    return out


def bessel_j(l: int, x):
    """J_l on the active lane (array in, array out)."""
    x = np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=np.float64)))
    if USE_NUMBA:
        return _bessel_j_arr_nb(l, x)
    return bessel_j_np(l, x)


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _bessel_j_arr_nb(l, x):
        out = np.empty_like(x)
        for i in prange(x.size):
            out[i] = _bessel_j_nb(l, x[i])
        return out


# ----------------------------------------------------------------------
# Oscillatory transform sums: sum_j g_j * cos/sin(y * xi_j)
# ----------------------------------------------------------------------

def _cos_transform_np(y: np.ndarray, g: np.ndarray, xi: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    step = max(1, 8_000_000 // max(1, xi.size))
    for a in range(0, y.size, step):
        b = min(a + step, y.size)
        out[a:b] = np.cos(np.outer(y[a:b], xi)) @ g
    return out


def _sin_transform_np(y: np.ndarray, g: np.ndarray, xi: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    step = max(1, 8_000_000 // max(1, xi.size))
    for a in range(0, y.size, step):
        b = min(a + step, y.size)
        out[a:b] = np.sin(np.outer(y[a:b], xi)) @ g
    return out


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _cos_transform_nb(y, g, xi):
        out = np.empty_like(y)
        for i in prange(y.size):
            acc = 0.0
            yi = y[i]
            for j in range(xi.size):
                acc += g[j] * np.cos(yi * xi[j])
            out[i] = acc
        return out

    @njit(cache=True, parallel=True)
    def _sin_transform_nb(y, g, xi):
        out = np.empty_like(y)
        for i in prange(y.size):
            acc = 0.0
            yi = y[i]
            for j in range(xi.size):
                acc += g[j] * np.sin(yi * xi[j])
            out[i] = acc
        return out


def cos_transform(y, g, xi) -> np.ndarray:
    y = np.ascontiguousarray(y, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    if USE_NUMBA:
        return _cos_transform_nb(y, g, xi)
    return _cos_transform_np(y, g, xi)


def sin_transform(y, g, xi) -> np.ndarray:
    y = np.ascontiguousarray(y, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    if USE_NUMBA:
        return _sin_transform_nb(y, g, xi)
    return _sin_transform_np(y, g, xi)


# ----------------------------------------------------------------------
# Radial Hankel tables: T_p(r) = sum_j wk[p, j] * J_{l_p}(r * s_j)
# ----------------------------------------------------------------------
# wk rows carry s^{k+1} e^{-s^{2m}} and the quadrature weight, so one
# sweep over r serves every (k, l) table at once; J_0 and J_1 are
# evaluated once per (r, s) pair and the rest comes from the recurrence.

def _radial_tables_np(r: np.ndarray, s: np.ndarray, wk: np.ndarray,
                      lidx: np.ndarray, lmax: int) -> np.ndarray:
    npairs = wk.shape[0]
    out = np.empty((npairs, r.size))
    step = max(1, 4_000_000 // max(1, s.size * (lmax + 1)))
    for a in range(0, r.size, step):
        b = min(a + step, r.size)
        x = np.outer(r[a:b], s)
        sh = x.shape
        jl = np.empty((lmax + 1,) + sh)
        jl[0] = bessel_j_np(0, x.ravel()).reshape(sh)
        if lmax >= 1:
            jl[1] = bessel_j_np(1, x.ravel()).reshape(sh)
        if lmax >= 2:
            small = x <= J_SWITCH
            xb = x[~small]
            for l in range(2, lmax + 1):
                page = np.empty(sh)
                page[small] = _j_series_np(l, x[small])
                jl[l] = page
            if xb.size:
                jm = jl[0][~small]
                jc = jl[1][~small]
                for l in range(2, lmax + 1):
                    jm, jc = jc, 2.0 * (l - 1) / xb * jc - jm
                    jl[l][~small] = jc
        for p in range(npairs):
            out[p, a:b] = jl[lidx[p]] @ wk[p]
    return out


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _radial_tables_nb(r, s, wk, lidx, lmax):
        npairs = wk.shape[0]
        out = np.empty((npairs, r.size))
        for ir in prange(r.size):
            jl = np.empty((lmax + 1, s.size))
            rr = r[ir]
            for j in range(s.size):
                x = rr * s[j]
                if x <= J_SWITCH:
                    for l in range(lmax + 1):
                        jl[l, j] = _j_series_nb(l, x)
                else:
                    jl[0, j] = _j01_asym_nb(0, x)
                    if lmax >= 1:
                        jl[1, j] = _j01_asym_nb(1, x)
                    for l in range(2, lmax + 1):
                        jl[l, j] = 2.0 * (l - 1) / x * jl[l - 1, j] - jl[l - 2, j]
            for p in range(npairs):
                acc = 0.0
                lp = lidx[p]
                for j in range(s.size):
                    acc += wk[p, j] * jl[lp, j]
                out[p, ir] = acc
        return out


def radial_tables(r, s, wk, lidx, lmax: int) -> np.ndarray:
    r = np.ascontiguousarray(r, dtype=np.float64)
    s = np.ascontiguousarray(s, dtype=np.float64)
    wk = np.ascontiguousarray(wk, dtype=np.float64)
    lidx = np.ascontiguousarray(lidx, dtype=np.int64)
    if USE_NUMBA:
        return _radial_tables_nb(r, s, wk, lidx, lmax)
    return _radial_tables_np(r, s, wk, lidx, lmax)


# ----------------------------------------------------------------------
# Quartic (5-point Lagrange) interpolation on a uniform table
# ----------------------------------------------------------------------

def _quartic_weights(t):
    # offsets -2..2; t is the query position relative to the center node
    w0 = (t + 1.0) * t * (t - 1.0) * (t - 2.0) / 24.0
    w1 = -(t + 2.0) * t * (t - 1.0) * (t - 2.0) / 6.0
    w2 = (t + 2.0) * (t + 1.0) * (t - 1.0) * (t - 2.0) / 4.0
    w3 = -(t + 2.0) * (t + 1.0) * t * (t - 2.0) / 6.0
    w4 = (t + 2.0) * (t + 1.0) * t * (t - 1.0) / 24.0
    return w0, w1, w2, w3, w4


def _interp_quartic_np(table: np.ndarray, x0: float, dx: float,
                       xq: np.ndarray) -> np.ndarray:
    n = table.size
    pos = (xq - x0) / dx
    j = np.rint(pos).astype(np.int64)
    np.clip(j, 2, n - 3, out=j)
    t = pos - j
    w0, w1, w2, w3, w4 = _quartic_weights(t)
    return (w0 * table[j - 2] + w1 * table[j - 1] + w2 * table[j]
            + w3 * table[j + 1] + w4 * table[j + 2])


if HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _interp_quartic_scalar_nb(table, x0, dx, x):
        n = table.size
        pos = (x - x0) / dx
        j = int(round(pos))
        if j < 2:
            j = 2
        elif j > n - 3:
            j = n - 3
        t = pos - j
        w0 = (t + 1.0) * t * (t - 1.0) * (t - 2.0) / 24.0
        w1 = -(t + 2.0) * t * (t - 1.0) * (t - 2.0) / 6.0
        w2 = (t + 2.0) * (t + 1.0) * (t - 1.0) * (t - 2.0) / 4.0
        w3 = -(t + 2.0) * (t + 1.0) * t * (t - 2.0) / 6.0
        w4 = (t + 2.0) * (t + 1.0) * t * (t - 1.0) / 24.0
        return (w0 * table[j - 2] + w1 * table[j - 1] + w2 * table[j]
                + w3 * table[j + 1] + w4 * table[j + 2])

    @njit(cache=True, parallel=True)
    def _interp_quartic_nb(table, x0, dx, xq):
        out = np.empty_like(xq)
        for i in prange(xq.size):
            out[i] = _interp_quartic_scalar_nb(table, x0, dx, xq[i])
        return out


def interp_quartic(table, x0: float, dx: float, xq) -> np.ndarray:
    """Interpolate a uniform table at points xq (5-point Lagrange)."""
    table = np.ascontiguousarray(table, dtype=np.float64)
    xq = np.asarray(xq, dtype=np.float64)
    shape = xq.shape
    xq = np.ascontiguousarray(xq.ravel())
    if USE_NUMBA:
        out = _interp_quartic_nb(table, float(x0), float(dx), xq)
    else:
        out = _interp_quartic_np(table, float(x0), float(dx), xq)
    return out.reshape(shape)


# ----------------------------------------------------------------------
# Band-excluded logarithmic quadrature
# ----------------------------------------------------------------------
# One reduction pass computes sum_i wq_i * w_i * chi(t_i) * ln|a_i| where
# chi is a C^1 ramp: 0 below 1, smoothstep on (1, 2), 1 beyond.  The ramp
# keeps the sum continuously differentiable in any parameter a depends
# on, which a hard cutoff does not.  The band coordinate t_i is either
# |a_i|/delta (absolute sublevel band) or dist_i/delta for a caller-
# supplied per-node distance to the zero set of a (spatial tube band).
# Also returned: the number of nodes with chi < 1, the |w|-quadrature
# mass on those nodes, and the total |w|-quadrature mass (the last two
# feed a band-dominance check in the caller).

def _masked_log_quad_np(w, a, wq, t):
    u = np.clip(t - 1.0, 0.0, 1.0)
    chi = u * u * (3.0 - 2.0 * u)
    partial = chi < 1.0
    lg = np.log(np.where(chi > 0.0, np.abs(a), 1.0))
    val = float(np.sum(wq * w * chi * lg))
    wabs = wq * np.abs(w)
    return (val, int(np.count_nonzero(partial)),
            float(np.sum(wabs[partial])), float(np.sum(wabs)))


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _masked_log_quad_nb(w, a, wq, dist, use_dist, delta):
        val = 0.0
        nex = 0
        wex = 0.0
        wtot = 0.0
        for i in prange(w.size):
            mass = wq[i] * abs(w[i])
            wtot += mass
            if use_dist:
                t = dist[i] / delta
            else:
                t = abs(a[i]) / delta
            if t >= 2.0:
                val += wq[i] * w[i] * np.log(abs(a[i]))
            else:
                nex += 1
                wex += mass
                if t > 1.0:
                    u = t - 1.0
                    chi = u * u * (3.0 - 2.0 * u)
                    val += wq[i] * w[i] * chi * np.log(abs(a[i]))
        return val, nex, wex, wtot


_EMPTY_F64 = np.empty(0)


def masked_log_quad(w, a, wq, delta: float,
                    dist=None) -> tuple[float, int, float, float]:
    """Band-excluded log quadrature on the active lane.

    Returns (value, n_partial, excluded_mass, total_mass): the ramped sum,
    the node count with chi < 1, and the |w|-weighted quadrature mass of
    those nodes and of the whole grid.  With ``dist`` None the band
    coordinate is |a|/delta; otherwise it is dist/delta for the supplied
    per-node distances to the zero set of ``a``.
    """
    w = np.ascontiguousarray(w, dtype=np.float64).ravel()
    a = np.ascontiguousarray(a, dtype=np.float64).ravel()
    wq = np.ascontiguousarray(wq, dtype=np.float64).ravel()
    if dist is not None:
        dist = np.ascontiguousarray(dist, dtype=np.float64).ravel()
    if USE_NUMBA:
        d = _EMPTY_F64 if dist is None else dist
        val, nex, wex, wtot = _masked_log_quad_nb(
            w, a, wq, d, dist is not None, float(delta))
        return float(val), int(nex), float(wex), float(wtot)
    t = (np.abs(a) if dist is None else dist) / float(delta)
    return _masked_log_quad_np(w, a, wq, t)


# ----------------------------------------------------------------------
# Nearest-crossing distance on a 2D lattice
# ----------------------------------------------------------------------
# Query nodes sit at integer lattice coordinates; target points are
# arbitrary sub-cell positions inside the same lattice, bucketed by
# square super-cells of _NN_BUCKET lattice cells per side (CSR layout).
# The jitted lane walks Chebyshev rings of buckets outward from each
# query node's bucket: every point in a ring-R bucket lies at Euclidean
# distance > (R - 1) * bucket, so the walk stops once the best distance
# found is at most that.  The numpy lane delegates to scipy's cKDTree.
# Both lanes return the exact nearest distance.

_NN_BUCKET = 4


def _nearest_dist_np(px, py, qi, qj):
    from scipy.spatial import cKDTree

    tree = cKDTree(np.column_stack([px, py]))
    d, _ = tree.query(np.column_stack([qi, qj]).astype(np.float64),
                      workers=-1)
    return d


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _nearest_dist_nb(px, py, qi, qj, start, nb0, nb1, bsize, max_ring):
        out = np.empty(qi.size)
        for k in prange(qi.size):
            ci = qi[k]
            cj = qj[k]
            bi = ci // bsize
            bj = cj // bsize
            best2 = 1e300
            for ring in range(max_ring + 1):
                if ring >= 1:
                    bound = (ring - 1.0) * bsize
                    if best2 <= bound * bound:
                        break
                ilo = bi - ring
                ihi = bi + ring
                for ii in range(ilo, ihi + 1):
                    if ii < 0 or ii >= nb0:
                        continue
                    if ii == ilo or ii == ihi:
                        # top/bottom edge of the ring: full row of buckets
                        jstep = 1
                    else:
                        # interior row: only the two side columns
                        jstep = 2 * ring
                    for jj in range(bj - ring, bj + ring + 1, jstep):
                        if jj < 0 or jj >= nb1:
                            continue
                        c = ii * nb1 + jj
                        for p in range(start[c], start[c + 1]):
                            dx = px[p] - ci
                            dy = py[p] - cj
                            d2 = dx * dx + dy * dy
                            if d2 < best2:
                                best2 = d2
            out[k] = np.sqrt(best2)
        return out


def nearest_dist_2d(px, py, qi, qj, shape, reach: float) -> np.ndarray:
    """Exact distance from integer lattice nodes (qi, qj) to the nearest
    of the points (px, py), on the active lane.

    ``shape`` is the lattice shape bounding all coordinates; ``reach``
    caps the jitted lane's ring walk — nodes farther than ``reach`` from
    every point may come back as a large finite overestimate, so callers
    must treat any value beyond ``reach`` as "far", never as a distance.
    """
    px = np.ascontiguousarray(px, dtype=np.float64)
    py = np.ascontiguousarray(py, dtype=np.float64)
    qi = np.ascontiguousarray(qi, dtype=np.int64)
    qj = np.ascontiguousarray(qj, dtype=np.int64)
    if not USE_NUMBA:
        return _nearest_dist_np(px, py, qi, qj)
    bsize = _NN_BUCKET
    nb0 = (int(shape[0]) + bsize - 1) // bsize
    nb1 = (int(shape[1]) + bsize - 1) // bsize
    bucket = (px.astype(np.int64) // bsize) * nb1 + py.astype(np.int64) // bsize
    order = np.argsort(bucket, kind="stable")
    counts = np.bincount(bucket, minlength=nb0 * nb1)
    start = np.zeros(nb0 * nb1 + 1, dtype=np.int64)
    np.cumsum(counts, out=start[1:])
    max_ring = int(np.ceil(reach / bsize)) + 3
    return _nearest_dist_nb(px[order], py[order], qi, qj, start,
                            nb0, nb1, bsize, max_ring)


# ----------------------------------------------------------------------
# Shifted convolution: w_i = sum_j u0w_j * Feven(y_i - scale * z_j)
# ----------------------------------------------------------------------
# Feven is a table of an even function on [0, xmax] sampled uniformly;
# the kernel argument is folded by |.| before interpolation.

def _conv_shifted_np(y, z, u0w, scale, table, dx):
    out = np.empty_like(y)
    step = max(1, 4_000_000 // max(1, z.size))
    for a in range(0, y.size, step):
        b = min(a + step, y.size)
        args = np.abs(y[a:b, None] - scale * z[None, :])
        vals = _interp_quartic_np(table, 0.0, dx, args.ravel()).reshape(args.shape)
        out[a:b] = vals @ u0w
    return out


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _conv_shifted_nb(y, z, u0w, scale, table, dx):
        out = np.empty_like(y)
        for i in prange(y.size):
            acc = 0.0
            yi = y[i]
            for j in range(z.size):
                arg = abs(yi - scale * z[j])
                acc += u0w[j] * _interp_quartic_scalar_nb(table, 0.0, dx, arg)
            out[i] = acc
        return out


def conv_shifted(y, z, u0w, scale: float, table, dx: float) -> np.ndarray:
    y = np.ascontiguousarray(y, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.float64)
    u0w = np.ascontiguousarray(u0w, dtype=np.float64)
    table = np.ascontiguousarray(table, dtype=np.float64)
    if USE_NUMBA:
        return _conv_shifted_nb(y, z, u0w, float(scale), table, float(dx))
    return _conv_shifted_np(y, z, u0w, float(scale), table, float(dx))
