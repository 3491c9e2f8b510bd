"""Rearrangement-invariant norms of step profiles.

Weights that are pure powers are integrated in closed form per block; weights
with logarithms go through the adaptive log-grid rule.
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _quad
from .profile_core import (
    L_MAX, PROBES_PER_DECADE, IncompatibleDomainError, StepProfile, pairing,
    power_integral, rearrange, resolve_length,
)
from .young_calculus import (
    PowerLog, PreconditionError, YoungFunction, young_from_descriptor,
)

TAGS = ("Lebesgue", "LorentzStar", "LorentzDoubleStar", "LorentzZygmund",
        "GeneralizedLZ", "Orlicz", "OrliczLorentz", "Sum", "Intersection")
LUX_RTOL = 1e-10
_WEIGHT_PROBES = np.logspace(-300, 0, 3001)


@dataclass(frozen=True)
class NormSpec:
    tag: str
    p: float = 1.0
    q: float = None
    r: float = 0.0
    rho: float = 0.0
    young: YoungFunction = None
    L: float = L_MAX
    star: bool = False  # LorentzZygmund: use f* instead of f**

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}")
        object.__setattr__(self, "L", resolve_length(self.L))
        q = self.q
        if q is None:
            q = self.p if self.tag in ("Lebesgue", "LorentzStar", "LorentzDoubleStar",
                                       "LorentzZygmund", "GeneralizedLZ") else None
        object.__setattr__(self, "q", None if q is None else float(q))
        if self.tag in ("Orlicz", "OrliczLorentz", "Intersection") and self.young is None:
            raise ValueError(f"{self.tag} needs a Young function")
        if self.tag in ("LorentzStar", "LorentzDoubleStar", "LorentzZygmund", "GeneralizedLZ"):
            if not (1 <= self.p < math.inf) or not (1 <= self.q <= math.inf):
                raise ValueError("Lorentz-type specs need 1 <= p < inf and 1 <= q <= inf")
        if self.tag in ("OrliczLorentz", "Intersection"):
            if not (self.q is not None and self.q > 1):
                raise ValueError("Orlicz-Lorentz needs q > 1")
            if not _tail_moment_finite(self.young, self.q):
                raise ValueError("int^inf A(t)/t^(1+q) dt diverges; functional is not a norm")

    @property
    def quasi(self):
        # an f*-based functional int (f*)^q w is a norm only when w is nonincreasing
        star_type = self.tag in ("LorentzStar", "GeneralizedLZ") or (self.tag == "LorentzZygmund" and self.star)
        if not star_type:
            return False
        if self.q == math.inf:
            return True
        q = self.q
        w = _log_weight(q / self.p - 1.0, self.r * q, self.rho * q)(_WEIGHT_PROBES)
        return bool(np.any(np.diff(w) > 1e-12 * w[:-1]))

    def with_length(self, L):
        return NormSpec(self.tag, self.p, self.q, self.r, self.rho, self.young, L, self.star)

    def descriptor(self):
        d = {"tag": self.tag, "p": self.p, "q": self.q, "r": self.r, "rho": self.rho,
             "young": self.young.descriptor() if self.young is not None else None,
             "L": self.L}
        if self.star:
            d["star"] = True
        return d


def spec_from_descriptor(d):
    d = dict(d)
    young = d.get("young")
    q = d.get("q")
    if isinstance(q, str):
        q = float(q)
    return NormSpec(d["tag"], float(d.get("p", 1.0)), q, float(d.get("r", 0.0)),
                    float(d.get("rho", 0.0)), young_from_descriptor(young) if young else None,
                    float(d.get("L", L_MAX)), bool(d.get("star", False)))


# short constructors
def Lebesgue(p, L=L_MAX):
    return NormSpec("Lebesgue", p, p, L=L)


def LorentzStar(p, q, L=L_MAX):
    return NormSpec("LorentzStar", p, q, L=L)


def LorentzDoubleStar(p, q, L=L_MAX):
    return NormSpec("LorentzDoubleStar", p, q, L=L)


def LorentzZygmund(p, q, r, L=L_MAX, star=False):
    return NormSpec("LorentzZygmund", p, q, r, L=L, star=star)


def GeneralizedLZ(p, q, r, rho, L=L_MAX):
    return NormSpec("GeneralizedLZ", p, q, r, rho, L=L)


def Orlicz(A, L=L_MAX):
    return NormSpec("Orlicz", young=A, L=L)


def OrliczLorentz(A, q, L=L_MAX):
    return NormSpec("OrliczLorentz", q=q, young=A, L=L)


def Zygmund(p, r, L=1.0):
    """L^p (log L)^r as an Orlicz space."""
    return Orlicz(PowerLog(p, r), L)


def format_value(x):
    return format(float(x), ".12g")


# -- weight integrals ------------------------------------------------------------

def _log_weight(e, r, rho):
    def w(s):
        s = np.asarray(s, float)
        lp = np.log(np.maximum(1.0 / s, 1.0))
        out = s ** e * (1.0 + lp) ** r
        if rho:
            out = out * (1.0 + np.log1p(lp)) ** rho
        return out
    return w


def _head_integral(e, r, rho, b):
    """int_0^b s^e (1+log(1/s))^r (1+log(1+log(1/s)))^rho ds for b <= 1."""
    c = e + 1.0
    y0 = 1.0 + math.log(1.0 / b)

    def g(y):
        # integrand in y = 1 + log(1/s)
        return np.exp(-c * (y - 1.0)) * y ** r * (1.0 + np.log(y)) ** rho

    if c > 0:
        top = y0 + 800.0 / c
        return float(_quad.log_quad(g, y0, top, rtol=1e-11))
    if c < 0:
        return math.inf
    d = _quad.decade_contributions(g, y0, 300, +1)
    ok, tail = _quad.classify_tail(d)
    return float(d.sum() + tail) if ok else math.inf


def weight_integral(e, r, rho, a, b):
    """int_a^b s^e (1+log_+(1/s))^r (1+log_+(1+log_+(1/s)))^rho ds, arrays a <= b."""
    a = np.atleast_1d(np.asarray(a, float))
    b = np.atleast_1d(np.asarray(b, float))
    if r == 0 and rho == 0:
        return power_integral(a, b, e)
    out = np.zeros(a.shape)
    # part above 1: pure power
    ha, hb = np.maximum(a, 1.0), np.maximum(b, 1.0)
    out += power_integral(ha, hb, e)
    la, lb = np.minimum(a, 1.0), np.minimum(b, 1.0)
    inner = (la > 0) & (lb > la)
    if np.any(inner):
        out[inner] += _quad.log_quad(_log_weight(e, r, rho), la[inner], lb[inner], rtol=1e-11)
    for i in np.nonzero((la == 0) & (lb > 0))[0]:
        out[i] += _head_integral(e, r, rho, lb[i])
    return out


def _weight_sup(e, r, rho, a, b):
    """sup over (a, b] of s^e (1+log_+)^r (...)^rho, by dense sampling (exact for powers)."""
    w = _log_weight(e, r, rho)
    out = np.empty(a.shape)
    for i in range(a.size):
        lo = max(a[i], b[i] * 1e-12)
        s = np.geomspace(lo, b[i], 64)
        out[i] = np.max(w(s))
    return out


# -- norms ------------------------------------------------------------------------

def _prepare(f, spec):
    if not math.isclose(f.L, spec.L, rel_tol=1e-12):
        raise IncompatibleDomainError(f"profile length {f.L} differs from spec length {spec.L}")
    return f if f.rearranged else rearrange(f, f.L)


def _star_norm(f, inv_p, q, r=0.0, rho=0.0, shift=0.0):
    """|| s^(1/p - 1/q + shift) (1+log_+)^r (...)^rho f*(s) ||_q for a rearranged profile."""
    v, a, b = f.values, f.left, f.breakpoints
    if v.size == 0:
        return 0.0
    m = v.max()
    if m == 0:
        return 0.0
    x = v / m
    if q == math.inf:
        e = inv_p + shift
        if r == 0 and rho == 0:
            if e >= 0:
                return float(m * np.max(x * b ** e))
            return math.inf if a[0] == 0 and x[0] > 0 else float(m * np.max(x * a ** e))
        return float(m * np.max(x * _weight_sup(e, r, rho, a, b)))
    e = q * (inv_p + shift) - 1.0
    ints = weight_integral(e, r * q, rho * q, a, b)
    total = float(np.sum(np.where(x > 0, x ** q * ints, 0.0)))
    return m * total ** (1.0 / q)


def _double_star_norm(f, inv_p, q, r=0.0, rho=0.0):
    """|| s^(1/p-1/q) (1+log_+)^r (...)^rho f**(s) ||_q."""
    v, a, b = f.values, f.left, f.breakpoints
    if v.size == 0:
        return 0.0
    cum = f.cumulative(a)
    D = cum - v * a  # f** = v + D/s on (a, b]
    C = f.integral()
    B, L = b[-1], f.L
    if q == math.inf:
        e = inv_p
        w = _log_weight(e, r, rho)
        best = 0.0
        for i in range(v.size):
            s = np.geomspace(max(a[i], b[i] * 1e-12), b[i], 64)
            best = max(best, float(np.max(w(s) * (v[i] + D[i] / s))))
        if L > B:
            s = np.geomspace(B, L, 64)
            best = max(best, float(np.max(w(s) * C / s)))
        return best
    e = q * inv_p - 1.0
    total = v[0] ** q * float(weight_integral(e, r * q, rho * q, np.array([0.0]), b[:1])[0])
    if v.size > 1:
        w = _log_weight(e, r * q, rho * q)
        vv, DD = v[1:], D[1:]
        bb = b[1:]

        def integrand(s):
            idx = np.clip(np.searchsorted(bb, s, side="left"), 0, bb.size - 1)
            return w(s) * (vv[idx] + DD[idx] / s) ** q

        # split at s = 1 where log_+ has a kink
        lo, hi = a[1:], b[1:]
        cut = np.clip(1.0, lo, hi)
        total += float(np.sum(_quad.log_quad(integrand, lo, cut, rtol=1e-11)))
        total += float(np.sum(_quad.log_quad(integrand, cut, hi, rtol=1e-11)))
    if L > B:
        total += C ** q * float(weight_integral(e - q, r * q, rho * q, np.array([B]), np.array([L]))[0])
    return total ** (1.0 / q)


def norm(f, spec):
    """Norm of the profile f in the space described by spec; divergent integrals give inf."""
    f = _prepare(f, spec)
    tag = spec.tag
    if f.values.size == 0:
        return 0.0
    if tag == "Lebesgue":
        if spec.p == math.inf:
            return f.sup()
        return _star_norm(f, 1.0 / spec.p, spec.p)
    if tag == "LorentzStar":
        return _star_norm(f, 1.0 / spec.p, spec.q)
    if tag == "LorentzDoubleStar":
        return _double_star_norm(f, 1.0 / spec.p, spec.q)
    if tag == "LorentzZygmund":
        if spec.star:
            return _star_norm(f, 1.0 / spec.p, spec.q, spec.r)
        return _double_star_norm(f, 1.0 / spec.p, spec.q, spec.r)
    if tag == "GeneralizedLZ":
        return _star_norm(f, 1.0 / spec.p, spec.q, spec.r, spec.rho)
    if tag == "Orlicz":
        return luxemburg(f, spec.young)
    if tag == "OrliczLorentz":
        return _orlicz_lorentz(f, spec.young, spec.q)
    if tag == "Sum":
        return float(f.cumulative(min(1.0, f.L)))
    if tag == "Intersection":
        return max(f.sup(), _orlicz_lorentz(f, spec.young, spec.q))
    raise ValueError(tag)


def _bisect_modular(modular, scale):
    """inf{lam : modular(lam) <= 1} by bisection on log lam."""
    lo = hi = math.log(scale)
    for _ in range(2000):
        if modular(math.exp(hi)) <= 1:
            break
        hi += 1.0
    else:
        return math.inf
    for _ in range(2000):
        if modular(math.exp(lo)) > 1:
            break
        lo -= 1.0
    else:
        return 0.0
    while hi - lo > LUX_RTOL * 0.1:
        mid = 0.5 * (lo + hi)
        if modular(math.exp(mid)) <= 1:
            hi = mid
        else:
            lo = mid
    return math.exp(hi)


def luxemburg(f, A):
    """Luxemburg norm inf{lam : int A(f/lam) <= 1} of a step profile."""
    v, w = f.values, f.widths
    keep = v > 0
    v, w = v[keep], w[keep]
    if v.size == 0:
        return 0.0

    def modular(lam):
        with np.errstate(over="ignore"):
            vals = A(v / lam)
        return float(np.sum(w * vals)) if np.all(np.isfinite(vals)) else math.inf

    return _bisect_modular(modular, float(v.max()))


def _tail_moment_finite(A, q):
    def g(y):
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return np.exp(A.log_value(y) - (1.0 + q) * np.log(y))
    if A.limit < math.inf:
        return True
    decades = 300
    if 0 < A.span[1] < math.inf:
        decades = max(int(math.log10(A.span[1])), 8)
    d = _quad.decade_contributions(g, 1.0, decades, +1)
    return _quad.classify_tail(d)[0]


@lru_cache(maxsize=64)
def _tail_moment(A, q):
    """Psi(x) = int_x^inf A(y) y^(-1-q) dy as a tabulated evaluator."""
    def g(y):
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            out = np.exp(A.log_value(y) - (1.0 + q) * np.log(y))
        return np.where(y > A.limit, np.inf, out)
    return _quad.LogCumulative(g, -60, 60, from_top=True)


def _orlicz_lorentz(f, A, q):
    """|| r^(-1/q) f*(r) ||_{L^A}: each block's modular is q (v/lam)^q [Psi(x_b) - Psi(x_a)]."""
    v, a, b = f.values, f.left, f.breakpoints
    keep = v > 0
    v, a, b = v[keep], a[keep], b[keep]
    if v.size == 0:
        return 0.0
    if A.limit < math.inf:
        return math.inf  # r^(-1/q) f* is unbounded near 0
    Psi = _tail_moment(A, q)

    def modular(lam):
        xb = v * b ** (-1.0 / q) / lam
        with np.errstate(divide="ignore"):
            xa = np.where(a > 0, v * np.where(a > 0, a, 1.0) ** (-1.0 / q) / lam, np.inf)
        pa = np.where(np.isinf(xa), 0.0, Psi(np.where(np.isinf(xa), 1.0, xa)))
        val = q * (v / lam) ** q * (Psi(xb) - pa)
        return float(np.sum(val))

    return _bisect_modular(modular, float(v.max() * b[0] ** (-1.0 / q)))


# -- associate and optimal-target estimates ---------------------------------------

def family_profile(a, beta, tau, L, lo=None, per_decade=PROBES_PER_DECADE, delta=0.0, start=0.0):
    """Step version of s^-a (1+log_+ 1/s)^-beta (1+log_+ log_+ 1/s)^-delta on (start, tau).

    Cells are log-spaced; each carries the value at its geometric midpoint.
    """
    L = resolve_length(L)
    tau = min(tau, L)
    lo = min(1e-8 * max(tau, 1e-300), 1e-8) if lo is None else lo
    lo = max(lo, start) if start > 0 else lo
    n = max(int(math.ceil(per_decade * math.log10(tau / lo))), 1)
    edges = np.geomspace(lo, tau, n + 1)
    if start > 0:
        bps = edges[1:]
        mids = np.sqrt(edges[:-1] * edges[1:])
    else:
        bps = np.concatenate([[lo], edges[1:]])
        mids = np.concatenate([[lo / math.sqrt(10.0)], np.sqrt(edges[:-1] * edges[1:])])
    lp = np.log(np.maximum(1.0 / mids, 1.0))
    vals = mids ** (-a) * (1.0 + lp) ** (-beta)
    if delta:
        vals = vals * (1.0 + np.log1p(lp)) ** (-delta)
    if start > 0:
        # values on (start, tau) only: the profile is zero on (0, start]
        bps = np.concatenate([[start], bps])
        vals = np.concatenate([[0.0], vals])
    mono = start == 0 and bool(np.all(np.diff(vals) <= 0))
    return StepProfile(bps, vals, L, rearranged=mono)


def _dual_grid(size, L):
    a = np.linspace(0.0, 0.95, size)
    beta = np.linspace(-2.0, 2.0, size)
    hi = min(L, 1e8)
    tau = np.unique(np.concatenate([np.geomspace(1e-6 * hi, hi, max(size - 2, 2)), [min(1.0, L), L]]))
    return a, beta, tau


def associate_norm_estimate(f, spec, size=20):
    """Certified lower bound for ||f||_{X'} from power-log test functions g.

    Each candidate g is an honest step function, so int f g / ||g||_X never
    exceeds the associate norm. Returns (bound, best g).
    """
    f = _prepare(f, spec)
    if f.values.size == 0:
        return 0.0, None
    A, Bt, T = _dual_grid(size, spec.L)
    best, arg = 0.0, None
    for tau in T:
        for a in A:
            for beta in Bt:
                g = family_profile(a, beta, tau, spec.L)
                ng = norm(g, spec)
                if not (0 < ng < math.inf):
                    continue
                val = pairing(f, g) / ng
                if val > best:
                    best, arg = val, g
    return best, arg


def associate_spec(X):
    """A spec whose norm dominates the associate norm of X (equal for Lebesgue)."""
    if X.tag == "Lebesgue":
        p = X.p
        pp = math.inf if p == 1 else (1.0 if p == math.inf else p / (p - 1))
        return Lebesgue(pp, X.L)
    if X.tag == "LorentzStar" and X.p > 1:
        pp = X.p / (X.p - 1)
        qq = math.inf if X.q == 1 else (1.0 if X.q == math.inf else X.q / (X.q - 1))
        return LorentzStar(pp, qq, X.L)
    raise NotImplementedError(f"no closed-form associate for {X.tag}")


def check_may8(X, n, k, decades=300):
    """Whether ||(1+r)^(k/n-1)||_{X'} is finite on the half-line."""
    Xp = associate_spec(X)
    g = k / n - 1.0
    if Xp.tag == "Lebesgue":
        if Xp.p == math.inf:
            return True
        func = lambda r: (1.0 + r) ** (g * Xp.p)  # noqa: E731
    else:
        pp, qq = Xp.p, Xp.q
        if qq == math.inf:
            return 1.0 / pp + g <= 0
        func = lambda r: r ** (qq / pp - 1.0) * (1.0 + r) ** (g * qq)  # noqa: E731
    d = _quad.decade_contributions(func, 1.0, decades, +1)
    return _quad.classify_tail(d)[0]


def _envelope(g, n, k, L):
    """Step profile dominating s^(k/n) g**(s) pointwise (cellwise maxima)."""
    th = k / n
    v, a, b = g.values, g.left, g.breakpoints
    D = g.cumulative(a) - v * a
    with np.errstate(divide="ignore", invalid="ignore"):
        h_a = np.where(a > 0, v * a ** th + D * np.where(a > 0, a, 1.0) ** (th - 1), 0.0)
        h_b = v * b ** th + D * b ** (th - 1)
        s_star = np.where(v > 0, D * (1 - th) / (v * th), 0.0)
        inside = (s_star > a) & (s_star < b)
        h_s = np.where(inside, v * s_star ** th + D * np.where(inside, s_star, 1.0) ** (th - 1), 0.0)
    cell = np.maximum(np.maximum(h_a, h_b), h_s)
    C, B = g.integral(), b[-1]
    if L > B * (1 + 1e-12):
        m = max(int(math.ceil(PROBES_PER_DECADE * math.log10(L / B))), 1)
        edges = np.geomspace(B, L, m + 1)
        tail_b = edges[1:]
        tail_v = C * edges[:-1] ** (th - 1)
        b = np.concatenate([b, tail_b])
        cell = np.concatenate([cell, tail_v])
    return StepProfile(b, cell, L)


def optimal_target_norm(f, X, n, k, size=20):
    """Two-sided bracket (lower, upper) for the norm of f in the optimal target of X.

    Upper: Hoelder with ||g||_{X_k'} >= int g* s^(k/n) ... gives
    ||f||_{X_k} <= ||s^(-k/n) f*(s)||_X. Lower: power-log test functions g
    normalised by a certified upper bound of ||s^(k/n) g**||_{X'}.
    """
    f = _prepare(f, X)
    if X.L >= L_MAX and not check_may8(X, n, k):
        raise PreconditionError("||(1+r)^(k/n-1)||_{X'} is infinite")
    if f.values.size == 0:
        return 0.0, 0.0
    th = k / n
    if X.tag == "Lebesgue" and X.p < math.inf:
        upper = _star_norm(f, 1.0 / X.p, X.p, shift=-th)
    elif X.tag == "LorentzStar" and X.p > 1:
        upper = _star_norm(f, 1.0 / X.p, X.q, shift=-th)
    else:
        raise NotImplementedError(f"optimal target bracket not available for {X.tag}")
    Xp = associate_spec(X)
    A, Bt, T = _dual_grid(size, X.L)
    lower = 0.0
    for tau in T:
        for a in A:
            for beta in Bt:
                g = family_profile(a, beta, tau, X.L)
                nu = norm(_envelope(g, n, k, X.L), Xp)
                if 0 < nu < math.inf:
                    lower = max(lower, pairing(f, g) / nu)
    return lower, upper
