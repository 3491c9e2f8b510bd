"""Log-grid quadrature shared by the Young-function and norm code.

All integrands are vectorised callables of a positive variable t. We work in
u = log t, where power-log integrands are smooth and nearly exponential.
"""
import numpy as np

_X8, _W8 = np.polynomial.legendre.leggauss(8)
_X16, _W16 = np.polynomial.legendre.leggauss(16)

LN10 = np.log(10.0)
_TINY = np.finfo(float).tiny


def _gl(func, ua, ub, x, w):
    # Gauss-Legendre on [ua, ub] (arrays) for the integrand func(e^u) e^u
    half = 0.5 * (ub - ua)
    mid = 0.5 * (ub + ua)
    u = mid[:, None] + half[:, None] * x[None, :]
    t = np.exp(u)
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        ft = np.asarray(func(t), float)
        # subnormal values carry no relative precision and stall the refinement
        ft = np.where(np.abs(ft) < _TINY, 0.0, ft)
        vals = ft * t
    vals = np.where(np.isnan(vals), np.inf, vals)
    return half * (vals @ w)


def gl_segments(func, a, b):
    """Single 16-point rule on each [a_i, b_i] in log variable (no adaptivity)."""
    a = np.atleast_1d(np.asarray(a, float))
    b = np.atleast_1d(np.asarray(b, float))
    return _gl(func, np.log(a), np.log(b), _X16, _W16)


def log_quad(func, a, b, rtol=1e-10, max_rounds=40):
    """Adaptive integral of func over each [a_i, b_i], 0 < a_i <= b_i.

    Intervals are split in u = log t until the 8- and 16-point rules agree to
    `rtol`. Returns an array (or scalar for scalar input).
    """
    scalar = np.ndim(a) == 0 and np.ndim(b) == 0
    a = np.atleast_1d(np.asarray(a, float))
    b = np.atleast_1d(np.asarray(b, float))
    a, b = np.broadcast_arrays(a, b)
    out = np.zeros(a.shape)
    owner = np.arange(a.size)
    ua, ub = np.log(a.ravel()), np.log(b.ravel())
    flat = out.ravel()
    for _ in range(max_rounds):
        if ua.size == 0:
            break
        i16 = _gl(func, ua, ub, _X16, _W16)
        i8 = _gl(func, ua, ub, _X8, _W8)
        err = np.abs(i16 - i8)
        ok = (err <= rtol * np.abs(i16)) | (err <= 1e-300) | ~np.isfinite(i16)
        np.add.at(flat, owner[ok], i16[ok])
        bad = ~ok
        mid = 0.5 * (ua[bad] + ub[bad])
        ua = np.concatenate([ua[bad], mid])
        ub = np.concatenate([mid, ub[bad]])
        owner = np.concatenate([owner[bad], owner[bad]])
    else:
        np.add.at(flat, owner, _gl(func, ua, ub, _X16, _W16))
    out = flat.reshape(a.shape)
    return float(out[0]) if scalar else out


def decade_contributions(func, start, count, direction):
    """Integrals of func over `count` successive decades starting at `start`.

    direction = -1 walks towards zero, +1 towards infinity.
    """
    j = np.arange(count)
    if direction < 0:
        hi = start * 10.0 ** (-j)
        lo = hi / 10.0
    else:
        lo = start * 10.0 ** j
        hi = lo * 10.0
    return log_quad(func, lo, hi, rtol=1e-9)


def classify_tail(contrib, growth=1e3, window=4, slope_margin=0.05):
    """Decide convergence of a series of decade contributions.

    Returns (converges, tail_estimate). The rules, in order:
    non-finite terms diverge; partial sums growing by more than `growth`
    over the last `window` decades diverge; geometric decay converges;
    non-decaying terms diverge; otherwise the terms are fitted as a power of
    the decade index and the series converges iff that power exceeds 1.
    """
    d = np.asarray(contrib, float)
    if not np.all(np.isfinite(d)):
        return False, np.inf
    if d.size == 0 or d[-1] == 0.0:
        return True, 0.0
    s = np.cumsum(d)
    if d.size > window and s[-window - 1] > 0 and s[-1] / s[-window - 1] > growth:
        return False, np.inf
    last = d[-6:]
    if np.any(last <= 0):
        return True, 0.0
    ratios = last[1:] / last[:-1]
    if np.max(ratios) < 0.9:
        rho = float(np.max(ratios))
        return True, float(d[-1] * rho / (1.0 - rho))
    if np.min(ratios) >= 1.0:
        return False, np.inf
    half = max(d.size // 2, 2)
    jj = np.arange(1, d.size + 1)[-half:] - 0.5
    slope = -np.polyfit(np.log(jj), np.log(d[-half:]), 1)[0]
    if slope > 1.0 + slope_margin:
        return True, float(d[-1] * jj[-1] / (slope - 1.0))
    return False, np.inf


class LogCumulative:
    """Cumulative integral of a nonnegative integrand tabulated on a log grid.

    With from_top=False the object evaluates t -> int_0^t g, otherwise
    t -> int_t^inf g. Beyond the grid the integrand is extrapolated as the
    power law fitted to its two outermost nodes.
    """

    def __init__(self, func, lo_exp=-60, hi_exp=60, per_decade=20, from_top=False):
        self.func = func
        self.from_top = from_top
        n = int(round((hi_exp - lo_exp) * per_decade)) + 1
        self.nodes = np.logspace(lo_exp, hi_exp, n)
        with np.errstate(all="ignore"):
            g = np.asarray(func(self.nodes), float)
        self.g = np.where(np.isnan(g), np.inf, g)
        seg = log_quad(func, self.nodes[:-1], self.nodes[1:], rtol=1e-11)
        lo_t, hi_t = self._ends()
        if not from_top:
            self.cum = np.concatenate([[lo_t], lo_t + np.cumsum(seg)])
            self.total = self.cum[-1] + hi_t
        else:
            rev = np.cumsum(seg[::-1])[::-1]
            self.cum = np.concatenate([hi_t + rev, [hi_t]])
            self.total = self.cum[0] + lo_t

    def _slope(self, i, j):
        # local log-log slope of t*g between nodes i and j
        gi, gj = self.g[i], self.g[j]
        if not (gi > 0 and gj > 0 and np.isfinite(gi) and np.isfinite(gj)):
            return np.nan
        return 1.0 + np.log(gj / gi) / np.log(self.nodes[j] / self.nodes[i])

    def _ends(self):
        t0, t1 = self.nodes[0], self.nodes[-1]
        g0, g1 = self.g[0], self.g[-1]
        m0 = self._slope(0, 1)
        m1 = self._slope(-2, -1)
        self.m0, self.m1 = m0, m1
        if g0 == 0:
            lo = 0.0
        elif np.isfinite(m0) and m0 > 0:
            lo = t0 * g0 / m0
        else:
            lo = np.inf
        if g1 == 0:
            hi = 0.0
        elif np.isfinite(m1) and m1 < 0:
            hi = -t1 * g1 / m1
        else:
            hi = np.inf
        return lo, hi

    def __call__(self, t):
        t = np.asarray(t, float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.empty(t.shape)
        nodes = self.nodes
        below = t < nodes[0]
        above = t > nodes[-1]
        inner = ~below & ~above
        if np.any(inner):
            tt = t[inner]
            i = np.clip(np.searchsorted(nodes, tt, side="right") - 1, 0, nodes.size - 1)
            if not self.from_top:
                extra = _gl(self.func, np.log(nodes[i]), np.log(tt), _X16, _W16)
                out[inner] = self.cum[i] + extra
            else:
                j = np.minimum(i + 1, nodes.size - 1)
                extra = _gl(self.func, np.log(tt), np.log(nodes[j]), _X16, _W16)
                out[inner] = self.cum[j] + extra
        if np.any(below):
            x = t[below] / nodes[0]
            part = self._power_piece(nodes[0], self.g[0], self.m0, x)
            out[below] = self.cum[0] + part if not self.from_top else self.cum[0] - part
        if np.any(above):
            x = t[above] / nodes[-1]
            part = self._power_piece(nodes[-1], self.g[-1], self.m1, x)
            if not self.from_top:
                out[above] = self.cum[-1] + part
            else:
                out[above] = self.cum[-1] - part
        return float(out[0]) if scalar else out

    @staticmethod
    def _power_piece(t0, g0, m, x):
        # int_{t0}^{t0 x} g0 (t/t0)^(m-1) dt  (signed; x < 1 gives a negative value)
        if g0 == 0:
            return np.zeros_like(x)
        if not np.isfinite(m):
            return np.full_like(x, np.nan)
        if abs(m) < 1e-14:
            return t0 * g0 * np.log(x)
        return t0 * g0 * np.expm1(m * np.log(x)) / m
