"""Hot inner loops, each in a numba ``@njit`` flavour and a pure-numpy flavour.

The public names at the bottom of the module point at the numba versions
unless numba is missing or ``WEIGHTALLOC_DISABLE_NUMBA=1`` is set.  Both
flavours stay importable (``NUMBA_KERNELS`` / ``NUMPY_KERNELS``) so tests
can check parity and ``benchmarks/bench_kernels.py`` can time them.

``exact_sum`` and ``exact_dot`` are correctly rounded in both flavours,
hence bit-identical across backends.
"""
import math

import numpy as np

from ._config import numba_requested

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    HAVE_NUMBA = False


# --------------------------------------------------------------------------
# pure numpy / stdlib
# --------------------------------------------------------------------------

def _np_exact_sum(a):
    return math.fsum(np.asarray(a, dtype=np.float64).tolist())


def _np_exact_dot(x, w):
    return math.fsum((np.asarray(x, dtype=np.float64) * np.asarray(w, dtype=np.float64)).tolist())


def _np_window_moments(xc, m):
    n = xc.shape[0]
    k = np.arange(n)
    lo = np.maximum(k - m, 0)
    hi = np.minimum(k + m, n - 1) + 1
    cnt = (hi - lo).astype(np.float64)
    # centring keeps the running sums of squares well conditioned
    centre = xc.mean()
    d = xc - centre
    c1 = np.concatenate(([0.0], np.cumsum(d)))
    c2 = np.concatenate(([0.0], np.cumsum(d * d)))
    s1 = c1[hi] - c1[lo]
    s2 = c2[hi] - c2[lo]
    mean = centre + s1 / cnt
    ss = np.maximum(s2 - s1 * s1 / cnt, 0.0)
    var = ss / np.maximum(cnt - 1.0, 1.0)
    return mean, var


def _np_bridge_double_sum(m, a):
    n = m.shape[0]
    total = 0.0
    step = 1024
    for i0 in range(0, n, step):
        mi = m[i0:i0 + step, None]
        k = np.minimum(mi, m[None, :]) - mi * m[None, :]
        total += float(a[i0:i0 + step] @ (k @ a))
    return total


def _np_ks_sorted(cdf_sorted):
    n = cdf_sorted.shape[0]
    i = np.arange(1, n + 1, dtype=np.float64)
    d_plus = np.max(i / n - cdf_sorted)
    d_minus = np.max(cdf_sorted - (i - 1.0) / n)
    return float(max(d_plus, d_minus))


NUMPY_KERNELS = {
    "exact_sum": _np_exact_sum,
    "exact_dot": _np_exact_dot,
    "window_moments": _np_window_moments,
    "bridge_double_sum": _np_bridge_double_sum,
    "ks_sorted": _np_ks_sorted,
}


# --------------------------------------------------------------------------
# numba
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _msum_partials(partials, count, x):
        # Shewchuk's grow-expansion step; partials[:count] stay non-overlapping
        i = 0
        for j in range(count):
            y = partials[j]
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo != 0.0:
                partials[i] = lo
                i += 1
            x = hi
        partials[i] = x
        return i + 1

    @njit(cache=True)
    def _msum_round(partials, count):
        # final rounding exactly as CPython's math.fsum does it
        if count == 0:
            return 0.0
        n = count - 1
        hi = partials[n]
        lo = 0.0
        while n > 0:
            x = hi
            n -= 1
            y = partials[n]
            hi = x + y
            yr = hi - x
            lo = y - yr
            if lo != 0.0:
                break
        if n > 0 and ((lo < 0.0 and partials[n - 1] < 0.0) or (lo > 0.0 and partials[n - 1] > 0.0)):
            y = lo * 2.0
            x = hi + y
            yr = x - hi
            if y == yr:
                hi = x
        return hi

    @njit(cache=True)
    def _nb_exact_sum(a):
        partials = np.empty(a.shape[0] + 1)
        count = 0
        for k in range(a.shape[0]):
            count = _msum_partials(partials, count, a[k])
        return _msum_round(partials, count)

    @njit(cache=True)
    def _nb_exact_dot(x, w):
        partials = np.empty(x.shape[0] + 1)
        count = 0
        for k in range(x.shape[0]):
            count = _msum_partials(partials, count, x[k] * w[k])
        return _msum_round(partials, count)

    @njit(cache=True)
    def _nb_window_moments(xc, m):
        # sliding window with Welford add/remove updates on centred data, O(n)
        n = xc.shape[0]
        centre = xc.mean()
        mean = np.empty(n)
        var = np.empty(n)
        cnt = 0
        mu = 0.0
        m2 = 0.0
        lo = 0
        hi = 0
        for k in range(n):
            new_hi = min(k + m, n - 1) + 1
            while hi < new_hi:
                x = xc[hi] - centre
                cnt += 1
                d = x - mu
                mu += d / cnt
                m2 += d * (x - mu)
                hi += 1
            new_lo = max(k - m, 0)
            while lo < new_lo:
                x = xc[lo] - centre
                cnt -= 1
                d = x - mu
                mu -= d / cnt
                m2 -= d * (x - mu)
                lo += 1
            mean[k] = centre + mu
            var[k] = max(m2, 0.0) / max(cnt - 1, 1)
        return mean, var

    @njit(cache=True)
    def _nb_bridge_double_sum(m, a):
        n = m.shape[0]
        total = 0.0
        for i in range(n):
            row = 0.0
            for j in range(n):
                lo = m[i] if m[i] < m[j] else m[j]
                row += a[j] * (lo - m[i] * m[j])
            total += a[i] * row
        return total

    @njit(cache=True)
    def _nb_ks_sorted(cdf_sorted):
        n = cdf_sorted.shape[0]
        d = 0.0
        for i in range(n):
            up = (i + 1.0) / n - cdf_sorted[i]
            down = cdf_sorted[i] - i / n
            if up > d:
                d = up
            if down > d:
                d = down
        return d

    NUMBA_KERNELS = {
        "exact_sum": _nb_exact_sum,
        "exact_dot": _nb_exact_dot,
        "window_moments": _nb_window_moments,
        "bridge_double_sum": _nb_bridge_double_sum,
        "ks_sorted": _nb_ks_sorted,
    }
else:  # pragma: no cover
    NUMBA_KERNELS = {}


USE_NUMBA = HAVE_NUMBA and numba_requested()
BACKEND = "numba" if USE_NUMBA else "numpy"
_active = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def exact_sum(a) -> float:
    """Correctly rounded sum of a float array."""
    return float(_active["exact_sum"](_f64(a)))


def exact_dot(x, w) -> float:
    """Correctly rounded sum of the elementwise (rounded) products x*w."""
    return float(_active["exact_dot"](_f64(x), _f64(w)))


def window_moments(xc, m: int):
    """Local mean and variance of ``xc`` over rank windows [k-m, k+m] clipped to the array.

    Variance uses denominator (window count - 1), floored at 1.
    """
    return _active["window_moments"](_f64(xc), int(m))


def bridge_double_sum(m, a) -> float:
    """Brute-force sum_i sum_j a_i a_j (min(m_i, m_j) - m_i m_j), O(N^2)."""
    return float(_active["bridge_double_sum"](_f64(m), _f64(a)))


def ks_sorted(cdf_sorted) -> float:
    """Kolmogorov-Smirnov distance given the model CDF at sorted sample points."""
    return float(_active["ks_sorted"](_f64(cdf_sorted)))
