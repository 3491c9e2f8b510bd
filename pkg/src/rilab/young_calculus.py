"""Young functions, their Sobolev conjugates and reduced conjugates.

A Young function is stored through log A and its density a = A'. Working
with log A keeps the integrands (t/A)^(k/(n-k)) finite across the 120-decade
grids used below.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _quad
from .profile_core import probe_grid

INV_RTOL = 1e-10
NODE_DECADES = 60


class PreconditionError(ValueError):
    pass


class YoungFunction:
    """Base class; subclasses provide log_value, density and descriptor."""

    limit = math.inf  # A(t) = inf for t > limit
    span = (0.0, math.inf)  # range where the representation is exact, not extrapolated

    def __call__(self, t):
        t = np.asarray(t, float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            pos = t > 0
            lv = self.log_value(np.where(pos, t, 1.0))
            out = np.where(pos, np.exp(lv), 0.0)
        return np.where(t > self.limit, np.inf, out)

    def log_value(self, t):
        raise NotImplementedError

    def density(self, t):
        raise NotImplementedError

    def descriptor(self):
        raise NotImplementedError


def _convex_offset(make, start=1):
    # smallest b in {e, e^2, ...} with a nonnegative, nondecreasing sampled density
    t = probe_grid(1e-8, 1e8)
    for j in range(start, 80):
        a = make(math.e ** j)(t)
        if np.all(np.isfinite(a)) and np.all(a >= 0) and np.all(np.diff(a) >= -1e-12 * np.abs(a[1:])):
            return math.e ** j
    raise ValueError("no convexity offset found")


def _check_side(side):
    if side not in ("infinity", "zero"):
        raise ValueError("side must be 'infinity' or 'zero'")


@dataclass(frozen=True)
class PowerLog(YoungFunction):
    """t^p log(b+t)^r (side='infinity') or t^p log(b+1/t)^r (side='zero')."""

    p: float
    r: float = 0.0
    b: float = None
    side: str = "infinity"

    def __post_init__(self):
        _check_side(self.side)
        p, r = float(self.p), float(self.r)
        if self.side == "infinity":
            ok = p > 1 or (p == 1 and r >= 0)
        else:
            ok = p > 1 or (p == 1 and r <= 0)
        if not ok:
            raise ValueError(f"inadmissible exponents p={p}, r={r} near {self.side}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "r", r)
        if self.b is None:
            b = math.e if r == 0 else _convex_offset(lambda b: PowerLog(p, r, b, self.side).density)
            object.__setattr__(self, "b", b)

    def _log(self, t):
        return np.log(self.b + t) if self.side == "infinity" else np.log(self.b + 1.0 / t)

    def log_value(self, t):
        return self.p * np.log(t) + self.r * np.log(self._log(t))

    def density(self, t):
        t = np.asarray(t, float)
        p, r, b = self.p, self.r, self.b
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            tt = np.where(t > 0, t, 1.0)
            L = self._log(tt)
            if self.side == "infinity":
                inner = p * L + r * tt / (b + tt)
            else:
                inner = p * L - r / (b * tt + 1.0)
            out = tt ** (p - 1) * L ** (r - 1) * inner
        return np.where(t > 0, out, 0.0 if p > 1 else _a0(self))

    def descriptor(self):
        return {"variant": "PowerLog", "p": self.p, "r": self.r, "b": self.b, "side": self.side}


def _a0(A):
    # density at 0+ for p = 1
    if A.r == 0:
        return 1.0
    return 0.0 if A.side == "zero" else math.log(A.b) ** A.r


@dataclass(frozen=True)
class PowerLogLog(YoungFunction):
    """t^p (log log(b+t))^r, or with 1/t in place of t when side='zero'."""

    p: float
    r: float = 0.0
    b: float = None
    side: str = "infinity"

    def __post_init__(self):
        _check_side(self.side)
        p, r = float(self.p), float(self.r)
        ok = p > 1 or (p == 1 and (r >= 0 if self.side == "infinity" else r <= 0))
        if not ok:
            raise ValueError(f"inadmissible exponents p={p}, r={r} near {self.side}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "r", r)
        if self.b is None:
            b = math.e ** 2 if r == 0 else _convex_offset(lambda b: PowerLogLog(p, r, b, self.side).density, 2)
            object.__setattr__(self, "b", b)

    def _inner(self, t):
        return np.log(self.b + t) if self.side == "infinity" else np.log(self.b + 1.0 / t)

    def log_value(self, t):
        return self.p * np.log(t) + self.r * np.log(np.log(self._inner(t)))

    def density(self, t):
        t = np.asarray(t, float)
        p, r, b = self.p, self.r, self.b
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            tt = np.where(t > 0, t, 1.0)
            L = self._inner(tt)
            lam = np.log(L)
            if self.side == "infinity":
                inner = p * lam + r * tt / ((b + tt) * L)
            else:
                inner = p * lam - r / ((b * tt + 1.0) * L)
            out = tt ** (p - 1) * lam ** (r - 1) * inner
        return np.where(t > 0, out, 0.0 if p > 1 else np.nan)

    def descriptor(self):
        return {"variant": "PowerLogLog", "p": self.p, "r": self.r, "b": self.b, "side": self.side}


@dataclass(frozen=True)
class ExpPower(YoungFunction):
    """exp(t^r) - 1, the exponential-class Young function (r >= 1)."""

    r: float = 1.0

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("ExpPower needs r >= 1 to be convex")

    def log_value(self, t):
        x = np.asarray(t, float) ** self.r
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(x > 30, x + np.log1p(-np.exp(-np.minimum(x, 700))), np.log(np.expm1(np.minimum(x, 30))))

    def density(self, t):
        t = np.asarray(t, float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return np.where(t > 0, self.r * t ** (self.r - 1) * np.exp(t ** self.r), 0.0 if self.r > 1 else 1.0)

    def descriptor(self):
        return {"variant": "ExpPower", "r": self.r}


@dataclass(frozen=True)
class Tabulated(YoungFunction):
    """Density given on nodes, interpolated log-linearly (exact for powers).

    Below the first and above the last node the density continues as the
    power law of the adjacent segment.
    """

    grid: tuple
    _t: np.ndarray = field(init=False, repr=False, compare=False)
    _a: np.ndarray = field(init=False, repr=False, compare=False)
    _s: np.ndarray = field(init=False, repr=False, compare=False)
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = np.asarray(self.grid, float)
        if g.ndim != 2 or g.shape[1] != 2 or g.shape[0] < 2:
            raise ValueError("grid must be a list of at least two [t, a(t)] pairs")
        t, a = g[:, 0], g[:, 1]
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("tabulated nodes must be positive and increasing")
        if np.any(a <= 0) or np.any(np.diff(a) < 0):
            raise ValueError("tabulated density must be positive and nondecreasing")
        object.__setattr__(self, "grid", tuple(map(tuple, g.tolist())))
        s = np.log(a[1:] / a[:-1]) / np.log(t[1:] / t[:-1])
        seg = a[:-1] * t[:-1] * _expm1_ratio(s + 1.0, np.log(t[1:] / t[:-1]))
        head = a[0] * t[0] / (s[0] + 1.0)
        object.__setattr__(self, "span", (float(t[0]), float(t[-1])))
        object.__setattr__(self, "_t", t)
        object.__setattr__(self, "_a", a)
        object.__setattr__(self, "_s", s)
        object.__setattr__(self, "_cum", np.concatenate([[head], head + np.cumsum(seg)]))

    def _locate(self, t):
        i = np.searchsorted(self._t, t, side="right") - 1
        return np.clip(i, 0, self._t.size - 1)

    def density(self, t):
        t = np.asarray(t, float)
        i = np.clip(self._locate(t), 0, self._s.size - 1)
        below = t < self._t[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._a[i] * (np.where(t > 0, t, 1.0) / self._t[i]) ** self._s[i]
            head = self._a[0] * (np.where(t > 0, t, 1.0) / self._t[0]) ** self._s[0]
        out = np.where(below, head, out)
        return np.where(t > 0, out, 0.0 if self._s[0] > 0 else self._a[0])

    def log_value(self, t):
        # log of cum_i + a_i t_i ((t/t_i)^e - 1)/e, arranged so that huge t cannot overflow
        t = np.asarray(t, float)
        i = self._locate(t)
        e = self._s[np.clip(i, 0, self._s.size - 1)] + 1.0
        lr = np.log(t / self._t[i])
        scale = self._a[i] * self._t[i]
        c = self._cum[i] / scale
        x = e * lr
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            small = np.log(c + _expm1_ratio(e, lr))
            big = x - np.log(e) + np.log1p((c - 1.0 / e) * e * np.exp(-np.minimum(x, 700.0)))
            val = np.log(scale) + np.where(x > 600.0, big, small)
            head = np.log(self._cum[0]) + (self._s[0] + 1.0) * np.log(t / self._t[0])
        return np.where(t < self._t[0], head, val)

    def descriptor(self):
        return {"variant": "tabulated", "grid": [list(x) for x in self.grid]}


def _expm1_ratio(e, lr):
    # (exp(e*lr) - 1)/e with the e -> 0 limit lr
    e = np.asarray(e, float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return np.where(np.abs(e) < 1e-12, lr, np.expm1(e * lr) / np.where(e == 0, 1.0, e))


@dataclass(frozen=True)
class CappedInfinity(YoungFunction):
    """Equal to `base` (or to 0) up to `threshold` and to +inf beyond."""

    threshold: float
    base: YoungFunction = None

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")

    @property
    def limit(self):
        return self.threshold

    def log_value(self, t):
        t = np.asarray(t, float)
        lv = self.base.log_value(t) if self.base is not None else np.full(t.shape, -np.inf)
        return np.where(t > self.threshold, np.inf, lv)

    def density(self, t):
        t = np.asarray(t, float)
        d = self.base.density(t) if self.base is not None else np.zeros(t.shape)
        return np.where(t > self.threshold, np.inf, d)

    def descriptor(self):
        d = {"variant": "CappedInfinity", "threshold": self.threshold}
        if self.base is not None:
            d["base"] = self.base.descriptor()
        return d


def young_from_descriptor(d):
    d = dict(d)
    v = d.pop("variant")
    if v == "PowerLog":
        return PowerLog(d["p"], d.get("r", 0.0), d.get("b"), d.get("side", "infinity"))
    if v == "PowerLogLog":
        return PowerLogLog(d["p"], d.get("r", 0.0), d.get("b"), d.get("side", "infinity"))
    if v == "ExpPower":
        return ExpPower(d.get("r", 1.0))
    if v == "tabulated":
        return Tabulated(tuple(map(tuple, d["grid"])))
    if v == "CappedInfinity":
        base = d.get("base")
        return CappedInfinity(d["threshold"], young_from_descriptor(base) if base else None)
    raise ValueError(f"unknown Young variant {v!r}")


# -- integrability ------------------------------------------------------------

def _ratio_integrand(A, n, k):
    kappa = k / (n - k)

    def g(t):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            lv = A.log_value(t)
            out = np.exp(kappa * (np.log(t) - lv))
        return np.where(np.asarray(t) > A.limit, 0.0, out)

    return g


def _check_nk(n, k):
    if not (1 <= k < n):
        raise PreconditionError(f"need 1 <= k < n, got n={n}, k={k}")


def _decades(A, decades, direction):
    # never classify from extrapolated tails of a tabulated function
    edge = A.span[0] if direction < 0 else A.span[1]
    if 0 < edge < math.inf:
        decades = min(decades, max(int(abs(math.log10(edge))), 8))
    return decades


def check_zero_integrability(A, n, k, decades=300):
    """Whether int_0^1 (t/A(t))^(k/(n-k)) dt converges (decade-sum classification)."""
    _check_nk(n, k)
    decades = _decades(A, decades, -1)
    d = _quad.decade_contributions(_ratio_integrand(A, n, k), 1.0, decades, -1)
    return _quad.classify_tail(d)[0]


def check_infinity_integrability(A, n, k, decades=300):
    """Whether int_1^inf (t/A(t))^(k/(n-k)) dt converges."""
    _check_nk(n, k)
    decades = _decades(A, decades, +1)
    d = _quad.decade_contributions(_ratio_integrand(A, n, k), 1.0, decades, +1)
    return _quad.classify_tail(d)[0]


# -- Sobolev conjugate ----------------------------------------------------------

class ConjugateResult:
    """H, its inverse and A_{n/k} = A o H^{-1}; A_{n/k} = inf above `threshold`."""

    def __init__(self, A, n, k):
        self.A, self.n, self.k = A, n, k
        self.g = _ratio_integrand(A, n, k)
        self._I = _quad.LogCumulative(self.g, -NODE_DECADES, NODE_DECADES)
        self.finite = not check_infinity_integrability(A, n, k)
        self.exponent = (n - k) / n
        total = self._I.total
        self.threshold = math.inf if self.finite or not np.isfinite(total) else total ** self.exponent

    def H(self, t):
        return np.asarray(self._I(t)) ** self.exponent

    def H_prime(self, t):
        t = np.asarray(t, float)
        return self.exponent * np.asarray(self._I(t)) ** (self.exponent - 1.0) * self.g(t)

    def H_inv(self, s):
        s = np.asarray(s, float)
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        out = np.zeros(s.shape)
        pos = (s > 0) & (s < self.threshold)
        out[s >= self.threshold] = np.inf
        if np.any(pos):
            out[pos] = self._invert(s[pos] ** (1.0 / self.exponent))
        return float(out[0]) if scalar else out

    def _invert(self, target):
        I = self._I
        nodes, cum = I.nodes, I.cum
        out = np.empty(target.shape)
        below = target < cum[0]
        above = target > cum[-1]
        inner = ~below & ~above
        if np.any(below):
            out[below] = nodes[0] * (target[below] / cum[0]) ** (1.0 / I.m0)
        if np.any(above):
            t1, g1, m1 = nodes[-1], I.g[-1], I.m1
            rhs = 1.0 + m1 * (target[above] - cum[-1]) / (t1 * g1)
            with np.errstate(divide="ignore", invalid="ignore"):
                out[above] = np.where(rhs > 0, t1 * rhs ** (1.0 / m1), np.inf)
        if np.any(inner):
            i = np.clip(np.searchsorted(cum, target[inner], side="right") - 1, 0, nodes.size - 2)
            lo, hi = np.log(nodes[i]), np.log(nodes[i + 1])
            tg = target[inner]
            while np.max(hi - lo) > INV_RTOL * 1e-2:
                mid = 0.5 * (lo + hi)
                val = I(np.exp(mid))
                go_up = val < tg
                lo = np.where(go_up, mid, lo)
                hi = np.where(go_up, hi, mid)
            out[inner] = np.exp(0.5 * (lo + hi))
        return out

    def __call__(self, s):
        s = np.asarray(s, float)
        tau = self.H_inv(s)
        with np.errstate(invalid="ignore"):
            out = np.where(np.isinf(tau), np.inf, self.A(np.where(np.isinf(tau), 1.0, tau)))
        return np.where(s <= 0, 0.0, out)

    def log_value(self, s):
        tau = self.H_inv(s)
        with np.errstate(invalid="ignore"):
            return np.where(np.isinf(tau), np.inf, self.A.log_value(np.where(np.isinf(tau), 1.0, tau)))

    def density(self, s):
        tau = self.H_inv(s)
        return self.A.density(tau) / self.H_prime(tau)

    def as_young(self):
        tau = self._I.nodes
        s = self.H(tau)
        with np.errstate(all="ignore"):
            a = self.A.density(tau) / self.H_prime(tau)
        keep = np.isfinite(s) & np.isfinite(a) & (a > 0) & (s > 0) & (s < self.threshold)
        s, a = s[keep], np.maximum.accumulate(a[keep])
        good = np.concatenate([[True], np.diff(s) > 0])
        base = Tabulated(tuple(zip(s[good], a[good])))
        return base if self.finite else CappedInfinity(self.threshold, base)


def sobolev_conjugate(A, n, k):
    """Sobolev conjugate A_{n/k} of A in dimension n for order k."""
    _check_nk(n, k)
    if not check_zero_integrability(A, n, k):
        raise PreconditionError("int_0 (t/A(t))^(k/(n-k)) dt diverges")
    return ConjugateResult(A, n, k)


# -- reduced conjugate -----------------------------------------------------------

def reduced_conjugate(A, n, k):
    """The Young function A-hat whose Orlicz-Lorentz space L(A-hat, n/k) is the sharp target.

    With chi(s) = (int_s^inf J^(-n/k) a^(-n/(n-k)))^(-k/(n-k)) and
    J(s) = int_0^s a^(-k/(n-k)), the inverse density satisfies
    ahat^{-1}(a(s)) = chi(s), so ahat(chi(s)) = a(s). We tabulate the density
    on the nodes chi(s_i) and accumulate it.
    """
    _check_nk(n, k)
    if not check_zero_integrability(A, n, k):
        raise PreconditionError("int_0 (t/A(t))^(k/(n-k)) dt diverges")
    kappa = k / (n - k)

    def inv_a(t):
        with np.errstate(divide="ignore", over="ignore"):
            return A.density(t) ** (-kappa)

    J = _quad.LogCumulative(inv_a, -NODE_DECADES, NODE_DECADES)

    def w(t):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            return np.asarray(J(t)) ** (-n / k) * A.density(t) ** (-n / (n - k))

    Phi = _quad.LogCumulative(w, -NODE_DECADES, NODE_DECADES, from_top=True)
    s = Phi.nodes
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        chi = Phi.cum ** (-kappa)
        a = A.density(s)
    keep = np.isfinite(chi) & (chi > 0) & np.isfinite(a) & (a > 0)
    chi, a = chi[keep], np.maximum.accumulate(a[keep])
    good = np.concatenate([[True], np.diff(chi) > 0])
    return Tabulated(tuple(zip(chi[good], a[good])))


# -- equivalence ----------------------------------------------------------------

REGIME_GRIDS = {
    "global": (1e-8, 1e8),
    "near-zero": (1e-8, 1e-1),
    "near-infinity": (1e1, 1e8),
}


def equivalent(A, B, regime="global", grid=None, cap=64.0):
    """Smallest c <= cap with A(t/c) <= B(t) <= A(ct) on the regime's probes.

    Returns (True, c) or (False, None).
    """
    t = probe_grid(*REGIME_GRIDS[regime]) if grid is None else np.asarray(grid, float)
    Bt = B(t)
    slack = 1e-12

    def holds(c):
        return bool(np.all(A(t / c) <= Bt * (1 + slack)) and np.all(Bt <= A(t * c) * (1 + slack)))

    if holds(1.0):
        return True, 1.0
    if not holds(cap):
        return False, None
    lo, hi = 0.0, math.log(cap)
    while hi - lo > INV_RTOL:
        mid = 0.5 * (lo + hi)
        if holds(math.exp(mid)):
            hi = mid
        else:
            lo = mid
    return True, math.exp(hi)


def fit_power_log(func, t, loglog=False, slope=None):
    """Least-squares fit of log func(t) = c + slope*log t + beta*log(log t).

    With `slope` given only (c, beta) are fitted. Returns (slope, beta).
    """
    t = np.asarray(t, float)
    y = np.log(func(t))
    lt = np.log(t)
    ll = np.log(np.log(lt)) if loglog else np.log(lt)
    if slope is None:
        X = np.column_stack([np.ones_like(lt), lt, ll])
        coef = np.linalg.lstsq(X, y, rcond=None)[0]
        return float(coef[1]), float(coef[2])
    X = np.column_stack([np.ones_like(lt), ll])
    coef = np.linalg.lstsq(X, y - slope * lt, rcond=None)[0]
    return float(slope), float(coef[1])


def glued(near_zero, near_infinity, per_decade=20):
    """Young function equal to `near_zero` on (0, 1] with density c*a_inf beyond 1.

    c = a_0(1)/a_inf(1) keeps the density continuous and nondecreasing, so the
    result is convex; it is tabulated on the standard nodes.
    """
    t = np.logspace(-NODE_DECADES, NODE_DECADES, 2 * NODE_DECADES * per_decade + 1)
    c = float(near_zero.density(1.0)) / float(near_infinity.density(1.0))
    with np.errstate(all="ignore"):
        a = np.where(t <= 1.0, near_zero.density(t), c * near_infinity.density(t))
    keep = np.isfinite(a) & (a > 0)
    return Tabulated(tuple(zip(t[keep], np.maximum.accumulate(a[keep]))))


def fit_log_exponent(func, s, slope, order=2):
    """Exponent beta in func(s) ~ s^slope (log s)^beta near infinity.

    The regression basis adds the lower-order terms (log log s)^i/(log s)^j,
    i <= j <= order, that appear in the asymptotic expansion of conjugates of
    power-log functions, so the fitted beta is not biased by them.
    """
    s = np.asarray(s, float)
    y = np.log(func(s)) - slope * np.log(s)
    L = np.log(s)
    LL = np.log(L)
    cols = [np.ones_like(L), LL]
    for j in range(1, order + 1):
        cols += [LL ** i / L ** j for i in range(j + 1)]
    coef = np.linalg.lstsq(np.column_stack(cols), y, rcond=None)[0]
    return float(coef[1])
