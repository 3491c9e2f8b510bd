"""One-dimensional Hardy operator behind the reduction principle.

H f(s) = int_s^L r^(k/n - 1) f(r) dr. Operator norms between r.i. spaces are
estimated empirically over power-log profiles, dilation rays and random
profiles; a ray whose ratio grows monotonically past DIVERGE_FACTOR marks the
pair as unbounded.
"""
import math
from dataclasses import dataclass

import numpy as np

from .norm_engine import family_profile, norm
from .profile_core import (
    GRID_MIN, PROBES_PER_DECADE, StepProfile, head_weighted_integral,
    nested_tail_integral, random_profile, rearrange, tail_weighted_integral,
)

DIVERGE_FACTOR = 1e3
RAY_MIN_MEMBERS = 6
RAY_DECADES = 40


class HardyImage:
    """Evaluator for s -> int_s^L r^gamma f(r) dr, gamma = k/n - 1 unless overridden."""

    def __init__(self, f, n, k, gamma=None):
        self.f, self.n, self.k = f, n, k
        self.gamma = k / n - 1.0 if gamma is None else gamma

    def __call__(self, s):
        return tail_weighted_integral(self.f, self.gamma, s)

    def to_profile(self, per_decade=PROBES_PER_DECADE, lo=None):
        """Step approximation on a log grid (value at each cell's geometric midpoint)."""
        f = self.f
        if f.values.size == 0 or not np.any(f.values):
            return StepProfile([], [], f.L, rearranged=True)
        top = f.breakpoints[-1]
        lo = min(GRID_MIN, f.breakpoints[0] * 1e-4) if lo is None else lo
        m = max(int(math.ceil(per_decade * math.log10(top / lo))), 1)
        grid = np.union1d(np.geomspace(lo, top, m + 1), f.breakpoints)
        mids = np.sqrt(grid[:-1] * grid[1:])
        vals = np.concatenate([[self(lo * 1e-3)], self(mids)])
        pos = np.flatnonzero(vals > 0)
        if pos.size == 0:
            return StepProfile([], [], f.L, rearranged=True)
        cut = pos[-1] + 1
        prof = StepProfile(grid[:cut], vals[:cut], f.L, rearranged=False)
        return prof if f.rearranged and np.all(f.values >= 0) else rearrange(prof, f.L)


def hardy_operator(f, n, k, gamma=None):
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < n")
    return HardyImage(f, n, k, gamma)


def _ratio(f, X, Y, n, k, gamma):
    nf = norm(f, X)
    if not (0 < nf < math.inf):
        return math.nan
    h = hardy_operator(f, n, k, gamma).to_profile()
    nh = norm(h, Y)
    return nh / nf


@dataclass
class HardyEstimate:
    constant: float
    witness: StepProfile
    verdict: str
    ray_growth: float

    @property
    def bounded(self):
        return self.verdict == "bounded"


def _rays(L):
    """Dilations of fixed shapes: f_sigma(s) = phi(s/sigma)/sigma, sigma -> 0 and sigma -> L."""
    shapes = [StepProfile([1.0], [1.0], L, rearranged=True),
              StepProfile([0.5, 1.0], [2.0, 1.0], L, rearranged=True)]
    down = 10.0 ** -np.arange(0, RAY_DECADES + 1)
    up = 10.0 ** np.arange(1, int(math.floor(math.log10(L))) + 1) if L >= 10 else np.zeros(0)
    rays = []
    for phi in shapes:
        for sig in (down, up):
            if sig.size >= RAY_MIN_MEMBERS:
                rays.append([StepProfile(phi.breakpoints * s, phi.values / s, L, rearranged=True)
                             for s in sig])
    return rays


def _ray_diverges(ratios):
    r = np.asarray(ratios, float)
    r = r[np.isfinite(r)]
    best = 1.0
    start = 0
    for i in range(1, r.size + 1):
        if i == r.size or r[i] < r[i - 1] * (1 - 1e-9):
            if i - start >= RAY_MIN_MEMBERS and r[start] > 0:
                best = max(best, r[i - 1] / r[start])
            start = i
    return best


def estimate_hardy_norm(X, Y, n, k, family_size=6, random_count=100, seed=0, gamma=None):
    """Empirical sup ||H f||_Y / ||f||_X over an adversarial family."""
    L = X.L
    if not math.isclose(L, Y.L, rel_tol=1e-12):
        raise ValueError("domain and target lengths differ")
    best, witness = 0.0, None

    def consider(f):
        nonlocal best, witness
        r = _ratio(f, X, Y, n, k, gamma)
        if r > best:
            best, witness = r, f
        return r

    growth = 1.0
    for ray in _rays(L):
        ratios = [consider(f) for f in ray]
        growth = max(growth, _ray_diverges(ratios))
    tops = sorted({min(1.0, L), L})
    for a in np.linspace(0.0, 0.9, family_size):
        for beta in np.linspace(-1.0, 2.0, family_size):
            for delta in (0.0, 2.0):
                for top in tops:
                    consider(family_profile(a, beta, top, L, lo=1e-12 * top,
                                            per_decade=10, delta=delta))
    rng = np.random.default_rng(seed)
    for _ in range(random_count):
        consider(random_profile(rng, L=L, lo=min(1e-4, L * 1e-4)))
    verdict = "diverging" if growth > DIVERGE_FACTOR else "bounded"
    return HardyEstimate(best, witness, verdict, growth)


def transfer_hypothesis_ratio(f, g, n, k, c, t_grid):
    """max over t of LHS/RHS in the transfer hypothesis.

    LHS(t) = int_0^t s^-k/n g*(s) ds,
    RHS(t) = c int_0^t s^-k/n int_{s/c}^L r^(k/n-1) f*(r) dr ds.
    """
    th = k / n
    g = g if g.rearranged else rearrange(g, g.L)
    f = f if f.rearranged else rearrange(f, f.L)
    t = np.asarray(t_grid, float)
    lhs = head_weighted_integral(g, -th, t) if g.values.size else np.zeros(t.shape)
    rhs = c * nested_tail_integral(f, th, th - 1.0, t, scale=c) if f.values.size else np.zeros(t.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lhs > 0, lhs / rhs, 0.0)
    return float(np.max(ratio)) if ratio.size else 0.0


@dataclass
class TransferReport:
    verdict: str
    hypothesis_ratio: float
    norm_ratio: float
    bound: float


def transfer_check(f, g, X, Y, n, k, c, t_grid=None, hardy=None):
    """Check the transfer hypothesis on a grid and, if it holds, the norm bound.

    The bound on ||g||_Y / ||f||_X is taken as c * (n/(n-k)) * (empirical Hardy
    constant); `hardy` may pass a precomputed HardyEstimate.
    """
    if t_grid is None:
        t_grid = np.geomspace(GRID_MIN, f.L, 8 * PROBES_PER_DECADE)
    if g.values.size == 0 or not np.any(g.values):
        return TransferReport("holds", 0.0, 0.0, 0.0)
    hr = transfer_hypothesis_ratio(f, g, n, k, c, t_grid)
    if hr > 1.0 + 1e-9:
        return TransferReport("hypothesis-violated", hr, math.nan, math.nan)
    if hardy is None:
        hardy = estimate_hardy_norm(X, Y, n, k)
    nr = norm(g, Y) / norm(f, X)
    if not hardy.bounded:
        return TransferReport("hardy-unbounded", hr, nr, math.inf)
    bound = c * (n / (n - k)) * hardy.constant
    return TransferReport("holds" if nr <= bound else "bound-exceeded", hr, nr, bound)


def fubini_identity_check(F, alpha, n, t_grid):
    """Max relative deviation between the two sides of the Fubini identity

    int_0^t F* + t^(1-a/n) int_t^L s^(a/n-1) F* = ((n-a)/n) int_0^t s^(-a/n) int_s^L r^(a/n-1) F*.
    """
    F = F if F.rearranged else rearrange(F, F.L)
    t = np.asarray(t_grid, float)
    if F.values.size == 0 or not np.any(F.values):
        return 0.0
    th = alpha / n
    lhs = F.cumulative(t) + t ** (1.0 - th) * tail_weighted_integral(F, th - 1.0, t)
    rhs = (1.0 - th) * nested_tail_integral(F, th, th - 1.0, t)
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    dev = np.where(scale > 0, np.abs(lhs - rhs) / np.where(scale > 0, scale, 1.0), 0.0)
    return float(np.max(dev))
