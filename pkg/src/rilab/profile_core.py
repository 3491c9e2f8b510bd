"""Step profiles on (0, L) and the rearrangement calculus built on them.

A StepProfile with breakpoints b_1 < ... < b_m and values v_1..v_m is the
function equal to v_i on (b_{i-1}, b_i] (b_0 = 0) and to 0 on (b_m, L).
Every integral below is evaluated block by block from closed-form
antiderivatives.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

L_MAX = 1e8          # stand-in for an infinite measure space
GRID_MIN = 1e-8      # left end of the canonical probe grid
PROBES_PER_DECADE = 50


class DomainError(ValueError):
    pass


class MeasureOverflowError(ValueError):
    pass


class IncompatibleDomainError(ValueError):
    pass


def resolve_length(L):
    """Map an infinite length to the L_MAX surrogate."""
    L = float(L)
    if math.isinf(L):
        return L_MAX
    if not L > 0:
        raise DomainError(f"length must be positive, got {L}")
    return L


def probe_grid(lo=GRID_MIN, hi=L_MAX, per_decade=PROBES_PER_DECADE):
    """Log-spaced probe points from lo to hi, `per_decade` per decade."""
    n = max(int(math.ceil(per_decade * math.log10(hi / lo))), 1) + 1
    return np.logspace(math.log10(lo), math.log10(hi), n)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StepProfile:
    breakpoints: np.ndarray
    values: np.ndarray
    L: float = L_MAX
    rearranged: bool = False
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        b = _frozen(np.atleast_1d(self.breakpoints))
        v = _frozen(np.atleast_1d(self.values))
        L = resolve_length(self.L)
        if b.shape != v.shape or b.ndim != 1:
            raise ValueError("breakpoints and values must be 1-d and of equal length")
        if b.size:
            if not np.all(np.isfinite(b)) or b[0] <= 0 or np.any(np.diff(b) <= 0):
                raise ValueError("breakpoints must be finite, positive and strictly increasing")
            if b[-1] > L:
                raise ValueError(f"last breakpoint {b[-1]} exceeds L={L}")
            if not np.all(np.isfinite(v)) or np.any(v < 0):
                raise ValueError("values must be finite and nonnegative")
            if self.rearranged and np.any(np.diff(v) > 0):
                raise ValueError("a rearranged profile must be nonincreasing")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "L", L)
        widths = np.diff(np.concatenate([[0.0], b]))
        object.__setattr__(self, "_cum", _frozen(np.concatenate([[0.0], np.cumsum(v * widths)])))

    # -- basic views -------------------------------------------------------
    @property
    def left(self):
        return np.concatenate([[0.0], self.breakpoints[:-1]])

    @property
    def widths(self):
        return self.breakpoints - self.left

    @property
    def support(self):
        return float(self.breakpoints[-1]) if self.breakpoints.size else 0.0

    def __call__(self, s):
        s = np.asarray(s, float)
        idx = np.searchsorted(self.breakpoints, s, side="left")
        vals = np.concatenate([self.values, [0.0]])
        return vals[idx]

    def integral(self):
        return float(self._cum[-1])

    def cumulative(self, s):
        """int_0^s f, exact; s may be an array."""
        s = np.asarray(s, float)
        b = self.breakpoints
        if b.size == 0:
            return np.zeros_like(s)
        idx = np.searchsorted(b, s, side="left")
        idx_c = np.minimum(idx, b.size - 1)
        left = np.where(idx_c > 0, b[idx_c - 1], 0.0)
        part = self.values[idx_c] * (np.minimum(s, b[idx_c]) - left)
        return np.where(idx >= b.size, self._cum[-1], self._cum[idx_c] + part)

    def distribution(self, t):
        """Measure of {f > t} (exact for rearranged profiles, summed otherwise)."""
        t = np.asarray(t, float)
        if self.rearranged:
            # nonincreasing values: {f > t} is (0, b_j) with j the last block above t
            cnt = self.values.size - np.searchsorted(self.values[::-1], t, side="right")
            b = np.concatenate([[0.0], self.breakpoints])
            return b[cnt]
        w = self.widths
        return np.array([math.fsum(w[self.values > x]) for x in np.atleast_1d(t)]).reshape(t.shape)

    def sup(self):
        return float(self.values.max()) if self.values.size else 0.0

    def scaled(self, c):
        return StepProfile(self.breakpoints, c * self.values, self.L, self.rearranged)

    def with_length(self, L):
        return StepProfile(self.breakpoints, self.values, L, self.rearranged)

    def to_cloud(self):
        return SampleCloud(self.values, self.widths)


@dataclass(frozen=True)
class SampleCloud:
    values: np.ndarray
    measures: np.ndarray

    def __post_init__(self):
        v = _frozen(np.atleast_1d(self.values))
        m = _frozen(np.atleast_1d(self.measures))
        if v.shape != m.shape:
            raise ValueError("values and measures must match")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("values must be finite and nonnegative")
        if np.any(m <= 0) or not np.all(np.isfinite(m)):
            raise ValueError("measures must be positive and finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "measures", m)

    def total_measure(self):
        return math.fsum(self.measures)

    def distribution(self, t):
        """Measure of {value > t}, correctly rounded."""
        return math.fsum(self.measures[self.values > t])


def _prefix_sums(m):
    # correctly rounded prefix sums; uniform measures reduce to count * m
    if m.size and np.all(m == m[0]):
        return np.arange(1, m.size + 1) * m[0]
    acc = Fraction(0)
    out = np.empty(m.size)
    for i, x in enumerate(m.tolist()):
        acc += Fraction(x)
        out[i] = float(acc)
    return out


def rearrange(cloud, L=None):
    """Decreasing rearrangement of a SampleCloud (or StepProfile) on (0, L)."""
    if isinstance(cloud, StepProfile):
        L = cloud.L if L is None else L
        cloud = cloud.to_cloud()
    L = L_MAX if L is None else L
    L = resolve_length(L)
    total = cloud.total_measure()
    if total > L:
        raise MeasureOverflowError(f"total measure {total} exceeds L={L}")
    keep = cloud.values > 0
    vals, meas = cloud.values[keep], cloud.measures[keep]
    if vals.size == 0:
        return StepProfile([], [], L, rearranged=True)
    order = np.argsort(-vals, kind="stable")
    vals, meas = vals[order], meas[order]
    # merge ties: the block for value v ends at fsum of all measures with value >= v
    uniq, start = np.unique(-vals, return_index=True)
    ends = np.concatenate([start[1:], [vals.size]]) - 1
    bps = _prefix_sums(meas)[ends]
    return StepProfile(bps, -uniq, L, rearranged=True)


def rearrange_values(values, measure, L=1.0):
    """Rearrangement of |values| where every sample carries the same measure."""
    vals = np.abs(np.asarray(values, float)).ravel()
    return rearrange(SampleCloud(np.where(vals > 0, vals, 0.0), np.full(vals.size, float(measure))), L)


class DoubleStar:
    """Evaluator s -> (1/s) int_0^s f*(r) dr for a rearranged profile."""

    def __init__(self, fstar):
        if not fstar.rearranged:
            raise DomainError("double_star expects a rearranged profile")
        self.f = fstar
        v, w = fstar.values, fstar.widths
        # on block j, f** = v_j + E_j / s with E_j = sum_{i<j} (v_i - v_j) w_i >= 0,
        # so f** >= f* survives rounding
        head = np.concatenate([[0.0], np.cumsum(v * w)])
        mass = np.concatenate([[0.0], np.cumsum(w)])
        vv = np.concatenate([v, [0.0]])
        self._v = vv
        self._excess = np.maximum(head - vv * mass, 0.0)

    def __call__(self, s):
        s = np.asarray(s, float)
        if np.any(s <= 0):
            raise DomainError("f** is defined for s > 0 only")
        j = np.searchsorted(self.f.breakpoints, s, side="left")
        return self._v[j] + self._excess[j] / s


def double_star(fstar):
    return DoubleStar(fstar)


def _merged(f, g):
    if not math.isclose(f.L, g.L, rel_tol=0, abs_tol=0):
        raise IncompatibleDomainError(f"lengths differ: {f.L} vs {g.L}")
    return np.union1d(f.breakpoints, g.breakpoints)


def pairing(f, g):
    """int_0^L f g on the merged partition."""
    pts = _merged(f, g)
    if pts.size == 0:
        return 0.0
    w = np.diff(np.concatenate([[0.0], pts]))
    return math.fsum(f(pts) * g(pts) * w)


def power_integral(a, b, gamma):
    """int_a^b r^gamma dr for arrays 0 <= a <= b, written to avoid cancellation."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    e = gamma + 1.0
    pos = a > 0
    sa = np.where(pos, a, 1.0)
    lr = np.log(np.where(b > a, b, sa) / sa)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if e == 0.0:
            out = np.where(pos, lr, np.inf)
        else:
            out = np.where(pos, sa ** e * np.expm1(e * lr) / e, b ** e / e if e > 0 else np.inf)
    return np.where(b <= a, 0.0, out)


def _check_s(s):
    s = np.asarray(s, float)
    if np.any(s <= 0):
        raise DomainError("s must be positive")
    return s


def tail_weighted_integral(f, gamma, s):
    """int_s^L r^gamma f(r) dr, exact per block; zero for s >= L."""
    s = _check_s(s)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    b, a, v = f.breakpoints, f.left, f.values
    if b.size == 0:
        return 0.0 if scalar else np.zeros(s.shape)
    full = v * power_integral(a, b, gamma)
    suffix = np.concatenate([np.cumsum(full[::-1])[::-1], [0.0]])
    i = np.searchsorted(b, s, side="left")  # s in (a_i, b_i]
    inside = i < b.size
    ic = np.minimum(i, b.size - 1)
    part = np.where(inside, v[ic] * power_integral(np.minimum(s, b[ic]), b[ic], gamma), 0.0)
    out = part + suffix[np.minimum(i + 1, b.size)] * inside
    return float(out[0]) if scalar else out


def head_weighted_integral(f, gamma, t):
    """int_0^t r^gamma f(r) dr for gamma > -1, exact per block."""
    t = np.asarray(t, float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    if gamma <= -1 and f.values.size and f.values[0] > 0:
        return np.inf if scalar else np.full(t.shape, np.inf)
    b, a, v = f.breakpoints, f.left, f.values
    if b.size == 0:
        return 0.0 if scalar else np.zeros(t.shape)
    full = v * power_integral(a, b, gamma)
    prefix = np.concatenate([[0.0], np.cumsum(full)])
    i = np.searchsorted(b, t, side="left")
    ic = np.minimum(i, b.size - 1)
    part = np.where(i < b.size, v[ic] * power_integral(a[ic], np.maximum(np.minimum(t, b[ic]), a[ic]), gamma), 0.0)
    out = prefix[i] + part
    return float(out[0]) if scalar else out


def nested_tail_integral(f, beta, gamma, t, scale=1.0):
    """int_0^t s^-beta int_{s/scale}^L r^gamma f(r) dr ds, outer blocks exact.

    Requires beta < 1. The inner integral is the block-exact tail; on each
    block of f it is an affine combination of 1 and s^(gamma+1), so the outer
    integral is a sum of power integrals. The substitution s = scale*u moves
    `scale` outside.
    """
    t = np.atleast_1d(np.asarray(t, float)) / scale
    b, a, v = f.breakpoints, f.left, f.values
    out = np.zeros(t.shape)
    if b.size == 0:
        return out
    tail_from_b = tail_weighted_integral(f, gamma, b)
    e = gamma + 1.0
    # on (a_i, b_i]: inner(s) = tail(b_i) + v_i int_s^{b_i} r^gamma dr
    if e == 0.0:
        const = tail_from_b + v * np.log(b)
    else:
        const = tail_from_b + v * b ** e / e
    step = max(1, 2_000_000 // b.size)
    for j in range(0, t.size, step):
        tt = t[j:j + step, None]
        lo = np.minimum(a[None, :], tt)
        hi = np.minimum(b[None, :], tt)
        acc = const * power_integral(lo, hi, -beta)
        if e == 0.0:
            acc -= v * _log_power_integral(lo, hi, -beta)
        else:
            acc -= (v / e) * power_integral(lo, hi, e - beta)
        out[j:j + step] = acc.sum(axis=1)
    # beyond the support the inner integral vanishes
    return out * scale ** (1.0 - beta)


def _log_power_integral(a, b, gamma):
    # int_a^b s^gamma log s ds with gamma > -1
    e = gamma + 1.0
    def F(x):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, x ** e * (np.log(np.where(x > 0, x, 1.0)) / e - 1.0 / e**2), 0.0)
    return np.where(b > a, F(b) - F(a), 0.0)


# -- text format -------------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def write_profile(path, f):
    lines = [f"L={_fmt(f.L)}"]
    lines += [f"{_fmt(b)} {_fmt(v)}" for b, v in zip(f.breakpoints, f.values)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_profile(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("L="):
        raise ValueError("profile file must start with 'L=<value>'")
    L = float(lines[0][2:])
    rows = [tuple(map(float, ln.split())) for ln in lines[1:]]
    b = [r[0] for r in rows]
    v = [r[1] for r in rows]
    rearranged = all(v[i] >= v[i + 1] for i in range(len(v) - 1))
    return StepProfile(b, v, L, rearranged=rearranged)


def random_profile(rng, blocks=20, L=L_MAX, lo=1e-4, hi=None, rearranged=True):
    """Random profile with log-uniform breakpoints in (lo, hi] and log-uniform values."""
    L = resolve_length(L)
    hi = min(hi if hi is not None else L, L)
    bps = np.unique(np.exp(rng.uniform(np.log(lo), np.log(hi), blocks)))
    vals = np.exp(rng.uniform(-3, 3, bps.size))
    if rearranged:
        vals = np.sort(vals)[::-1]
    return StepProfile(bps, vals, L, rearranged=rearranged)


def random_cloud(rng, size=50, L=L_MAX):
    vals = np.round(np.exp(rng.uniform(-2, 2, size)), 3)
    meas = rng.uniform(0.01, 1.0, size) * min(resolve_length(L), 100.0) / size
    return SampleCloud(vals, meas)
