"""Spectral calculus for periodic fields on the unit torus.

A GridField stores m real components on an M^d grid, axis 0 being x. Fields
of symmetric k-tensors keep one component per multi-index beta (|beta| = k,
colex order) and carry multiplicity weights k!/beta!, so the Frobenius norm
is sqrt(sum w_beta F_beta^2) and the k-th order divergence is
sum_beta w_beta d^beta F_beta. With this convention div_k grad_k = Laplacian^k
and the Helmholtz projector is orthogonal in the weighted inner product.
"""
import itertools
import json
import math
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .profile_core import SampleCloud, head_weighted_integral, nested_tail_integral, rearrange
from .young_calculus import PreconditionError

MEAN_ZERO_RTOL = 1e-12
DIVFREE_RTOL = 1e-8
DEFAULT_BOX = 5  # largest integer frequency used by corpus generators


@lru_cache(maxsize=None)
def multi_indices(d, k):
    """All beta in N^d with |beta| = k, in colex order."""
    out = [b for b in itertools.product(range(k + 1), repeat=d) if sum(b) == k]
    return tuple(sorted(out, key=lambda b: b[::-1]))


@lru_cache(maxsize=None)
def multiplicities(d, k):
    f = math.factorial
    return np.array([f(k) / math.prod(f(x) for x in b) for b in multi_indices(d, k)])


def tensor_components(d, k):
    return math.comb(d + k - 1, k)


@dataclass(frozen=True)
class GridField:
    values: np.ndarray          # shape (m, M, ..., M)
    weights: np.ndarray = None  # per-component multiplicity, default ones

    def __post_init__(self):
        v = np.asarray(self.values, float)
        if v.ndim < 3 or v.ndim > 4:
            raise ValueError("values must have shape (m, M, M) or (m, M, M, M)")
        if len(set(v.shape[1:])) != 1:
            raise ValueError("grid must be M^d")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)
        w = np.ones(v.shape[0]) if self.weights is None else np.asarray(self.weights, float)
        if w.shape != (v.shape[0],):
            raise ValueError("one weight per component")
        object.__setattr__(self, "weights", w)

    @property
    def d(self):
        return self.values.ndim - 1

    @property
    def M(self):
        return self.values.shape[1]

    @property
    def m(self):
        return self.values.shape[0]

    @property
    def h(self):
        return 1.0 / self.M

    @property
    def mean_zero(self):
        s = np.abs(self.values.sum(axis=tuple(range(1, self.d + 1))))
        scale = np.abs(self.values).sum(axis=tuple(range(1, self.d + 1)))
        return bool(np.all(s <= MEAN_ZERO_RTOL * np.maximum(scale, 1e-300)))

    def pointwise_norm(self):
        return np.sqrt(np.tensordot(self.weights, self.values ** 2, axes=1))

    def l2(self):
        return float(np.sqrt(np.sum(self.pointwise_norm() ** 2) * self.h ** self.d))

    def l1(self):
        return float(np.sum(self.pointwise_norm()) * self.h ** self.d)

    def __add__(self, other):
        return GridField(self.values + other.values, self.weights)

    def __sub__(self, other):
        return GridField(self.values - other.values, self.weights)

    def scaled(self, c):
        return GridField(self.values * c, self.weights)


def scalar_field(u):
    u = np.asarray(u, float)
    return GridField(u[None])


def tensor_field(values, k):
    values = np.asarray(values, float)
    return GridField(values, multiplicities(values.ndim - 1, k))


# -- spectral helpers ---------------------------------------------------------------

@lru_cache(maxsize=16)
def _freqs(d, M):
    k1 = np.fft.fftfreq(M, 1.0 / M)
    return tuple(np.meshgrid(*([k1] * d), indexing="ij"))


def _fft(F):
    return np.fft.fftn(F.values, axes=tuple(range(1, F.d + 1)))


def _ifft(Fh, d):
    return np.fft.ifftn(Fh, axes=tuple(range(1, d + 1))).real


def _symbol_power(xi, beta):
    out = 1.0
    for x, b in zip(xi, beta):
        if b:
            out = out * x ** b
    return out


def _unit_tensor(d, M, k):
    """e_beta = xi^beta / |xi|^k on the frequency grid (zero at xi = 0)."""
    xi = _freqs(d, M)
    r = np.sqrt(sum(x ** 2 for x in xi))
    safe = np.where(r > 0, r, 1.0)
    e = np.stack([np.asarray(_symbol_power(xi, b) / safe ** k) * np.ones(r.shape)
                  for b in multi_indices(d, k)])
    e[:, r == 0] = 0.0
    return e


def _check_components(F, k):
    N = tensor_components(F.d, k)
    if F.m != N:
        raise ValueError(f"expected {N} components for symmetric {k}-tensors in d={F.d}, got {F.m}")


def _require_mean_zero(F):
    if not F.mean_zero:
        raise PreconditionError("field must have zero mean in every component")


# -- operators ----------------------------------------------------------------------

def riesz_potential(F, alpha):
    """Multiplier (2 pi |xi|)^-alpha on each component; zero mode sent to zero."""
    if not 0 < alpha < F.d:
        raise ValueError("need 0 < alpha < d")
    _require_mean_zero(F)
    xi = _freqs(F.d, F.M)
    r = 2 * np.pi * np.sqrt(sum(x ** 2 for x in xi))
    mult = np.where(r > 0, np.where(r > 0, r, 1.0) ** (-alpha), 0.0)
    return GridField(_ifft(_fft(F) * mult, F.d), F.weights)


def divergence_k(F, k):
    """Scalar field sum_beta w_beta d^beta F_beta."""
    _check_components(F, k)
    xi = _freqs(F.d, F.M)
    Fh = _fft(F)
    w = multiplicities(F.d, k)
    out = np.zeros(Fh.shape[1:], complex)
    for i, b in enumerate(multi_indices(F.d, k)):
        out += w[i] * (2j * np.pi) ** k * _symbol_power(xi, b) * Fh[i]
    return scalar_field(_ifft(out[None], F.d)[0])


def divk_residual(F, k):
    """Relative spectral residual ||<e, F^>_w|| / ||F^||_w of the div_k constraint."""
    _check_components(F, k)
    Fh = _fft(F)
    e = _unit_tensor(F.d, F.M, k)
    w = multiplicities(F.d, k)
    c = np.tensordot(w, e * Fh, axes=1)
    den = np.sqrt(np.sum(w[:, None] * np.abs(Fh.reshape(F.m, -1)) ** 2))
    return float(np.sqrt(np.sum(np.abs(c) ** 2)) / den) if den > 0 else 0.0


def helmholtz_k(F, k):
    """-e <e, F^>_w per frequency, e_beta = xi^beta / |xi|^k (the zero mode is untouched)."""
    _check_components(F, k)
    Fh = _fft(F)
    e = _unit_tensor(F.d, F.M, k)
    w = multiplicities(F.d, k)
    c = np.tensordot(w, e * Fh, axes=1)
    return GridField(_ifft(-e * c[None], F.d), F.weights)


def projector_pk(F, k):
    return F + helmholtz_k(F, k)


def grad_k(u, k):
    """All k-th derivatives d^beta u_c; components ordered (c, beta)."""
    xi = _freqs(u.d, u.M)
    uh = _fft(u)
    comps, weights = [], []
    w = multiplicities(u.d, k)
    for c in range(u.m):
        for i, b in enumerate(multi_indices(u.d, k)):
            comps.append((2j * np.pi) ** k * _symbol_power(xi, b) * uh[c])
            weights.append(w[i] * u.weights[c])
    return GridField(_ifft(np.stack(comps), u.d), np.array(weights))


def _check_vector(u):
    if u.m != u.d:
        raise ValueError("symmetric gradients need a d-vector field")


def symmetric_gradient(u):
    """(grad u + grad u^T)/2 stored as a symmetric 2-tensor (beta = e_i + e_j)."""
    _check_vector(u)
    d = u.d
    g = grad_k(u, 1).values.reshape(d, d, *u.values.shape[1:])  # g[c, i] = d_i u_c
    comps = []
    for b in multi_indices(d, 2):
        idx = [i for i in range(d) for _ in range(b[i])]
        i, j = idx
        comps.append(0.5 * (g[j, i] + g[i, j]))
    return tensor_field(np.stack(comps), 2)


def deviatoric_symmetric_gradient(u):
    if u.d < 3:
        raise NotImplementedError("the deviatoric symmetric gradient is only supported for d >= 3")
    E = symmetric_gradient(u)
    betas = multi_indices(u.d, 2)
    diag = [i for i, b in enumerate(betas) if max(b) == 2]
    tr = E.values[diag].sum(axis=0)
    vals = E.values.copy()
    vals[diag] -= tr / u.d
    return GridField(vals, E.weights)


def trace2(E):
    betas = multi_indices(E.d, 2)
    return sum(E.values[i] for i, b in enumerate(betas) if max(b) == 2)


# -- corpus generators --------------------------------------------------------------

def band_limited(seed, d, M, m, box=DEFAULT_BOX, weights=None, decay=1.0):
    """Random mean-zero real field whose modes lie in |xi_j| <= box.

    Coefficients depend only on (seed, d, m, box), so the same continuum field
    is sampled for every M large enough to resolve the box; modes above M/3
    are dropped.
    """
    rng = np.random.default_rng(seed)
    box = min(box, max(M // 3, 1))
    rng_box = np.arange(-DEFAULT_BOX, DEFAULT_BOX + 1)
    shape = (m,) + (rng_box.size,) * d
    coef = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    grids = np.meshgrid(*([rng_box] * d), indexing="ij")
    r = np.sqrt(sum(g ** 2 for g in grids))
    coef *= (1.0 + r) ** (-decay)
    keep = (r > 0) & np.all([np.abs(g) <= box for g in grids], axis=0)
    coef *= keep
    Fh = np.zeros((m,) + (M,) * d, complex)
    pos = np.nonzero(keep)
    idx = tuple(np.mod(rng_box[p], M) for p in pos)
    for c in range(m):
        Fh[c][idx] = coef[c][pos] * M ** d
    vals = _ifft(Fh, d)
    return GridField(vals, weights)


def make_divk_free(seed, d, M, k, box=DEFAULT_BOX):
    """P_k applied to a random band-limited field; residual certified below 1e-10."""
    N = tensor_components(d, k)
    F = band_limited(seed, d, M, N, box, multiplicities(d, k))
    P = projector_pk(F, k)
    res = divk_residual(P, k)
    if res >= 1e-10:
        raise RuntimeError(f"div_k certificate failed: residual {res:.3e}")
    return P


def make_gradient_field(seed, d, M, k, box=DEFAULT_BOX):
    """grad_k of a random band-limited scalar: a field that is far from div_k-free."""
    phi = band_limited(seed, d, M, 1, box, decay=1.0 + k)
    return grad_k(phi, k)


def stream_field(seed, M, box=DEFAULT_BOX):
    """Perpendicular gradient (-d_y psi, d_x psi) of a random stream function, d = 2."""
    psi = band_limited(seed, 2, M, 1, box, decay=2.0)
    g = grad_k(psi, 1).values
    return tensor_field(np.stack([-g[1], g[0]]), 1)


def concentrated_field(d, M, k, width):
    """Mean-zero Gaussian bump in the first tensor component only; not div_k-free.

    As width -> 0 it approaches a point mass, the configuration the div_k
    constraint rules out.
    """
    b = gaussian_bump(d, M, width)
    vals = np.zeros((tensor_components(d, k),) + (M,) * d)
    vals[0] = b - b.mean()
    return GridField(vals, multiplicities(d, k))


def gaussian_bump(d, M, width, center=0.5):
    """exp(-|x-center|^2 / (2 width^2)) on the periodic grid (minimal image distance)."""
    x = (np.arange(M) + 0.5) / M - center
    x = x - np.round(x)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    r2 = sum(g ** 2 for g in grids)
    return np.exp(-r2 / (2 * width ** 2))


# -- mollification and rearrangement -----------------------------------------------

def _bump_kernel(d, M, h):
    x = np.arange(M) / M
    x = x - np.round(x)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    r2 = sum(g ** 2 for g in grids) * h ** 2
    with np.errstate(divide="ignore", over="ignore"):
        ker = np.where(r2 < 1.0, np.exp(-1.0 / np.maximum(1.0 - r2, 1e-300)), 0.0)
    if ker.sum() == 0:
        ker.flat[0] = 1.0
    return ker / ker.sum()


def mollify(F, h):
    """Periodic convolution with a normalised smooth bump supported in the ball of radius 1/h."""
    ker = np.fft.fftn(_bump_kernel(F.d, F.M, h))
    return GridField(_ifft(_fft(F) * ker[None], F.d), F.weights)


def field_rearrangement(F):
    """Decreasing rearrangement of the pointwise norm |F| on (0, 1]."""
    a = F.pointwise_norm().ravel()
    cloud = SampleCloud(a, np.full(a.size, F.h ** F.d))
    return rearrange(cloud, 1.0)


def contraction_deviation(F, h, probes=None):
    """max_s of (int_0^s (F_h)* - int_0^s F*) relative to int_0^s F*; <= 0 when contraction holds."""
    s = np.geomspace(F.h ** F.d, 1.0, 200) if probes is None else np.asarray(probes, float)
    f0 = field_rearrangement(F)
    f1 = field_rearrangement(mollify(F, h))
    c0, c1 = f0.cumulative(s), f1.cumulative(s)
    scale = np.where(c0 > 0, c0, 1.0)
    return float(np.max((c1 - c0) / scale))


def rearrangement_inequality_check(F, alpha, t_grid=None, k=None):
    """max over t of LHS/RHS with G = sum_beta I_alpha F_beta (identity operators).

    LHS(t) = int_0^t s^(-a/d) G*(s) ds,
    RHS(t) = int_0^t s^(-a/d) int_s^1 F*(r) r^(a/d - 1) dr ds.
    If k is given the div_k certificate is enforced first.
    """
    if k is not None and divk_residual(F, k) > DIVFREE_RTOL:
        raise PreconditionError("field is not div_k-free")
    if not np.any(F.values):
        return 0.0
    th = alpha / F.d
    t = np.geomspace(F.h ** F.d, 1.0, 40) if t_grid is None else np.asarray(t_grid, float)
    G = riesz_potential(F, alpha)
    g = scalar_field(G.values.sum(axis=0))
    gs = field_rearrangement(g)
    fs = field_rearrangement(F)
    lhs = head_weighted_integral(gs, -th, t)
    rhs = nested_tail_integral(fs, th, th - 1.0, t)
    return float(np.max(lhs / rhs))


# -- grid file format ---------------------------------------------------------------

_HEADER = struct.Struct("<4i")
FLAG_MEAN_ZERO = 1


def write_grid(path, F, meta=None):
    """Little-endian header (d, M, m, flags) then float64 data, component-major, x fastest."""
    flags = FLAG_MEAN_ZERO if F.mean_zero else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(F.d, F.M, F.m, flags))
        for c in range(F.m):
            fh.write(np.ascontiguousarray(F.values[c].ravel(order="F"), dtype="<f8").tobytes())
    side = {"d": F.d, "M": F.M, "m": F.m, "flags": flags, "weights": F.weights.tolist()}
    side.update(meta or {})
    with open(str(path) + ".json", "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)


def read_grid(path):
    with open(path, "rb") as fh:
        d, M, m, _ = _HEADER.unpack(fh.read(_HEADER.size))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != m * M ** d:
        raise ValueError("grid file is truncated")
    vals = np.stack([data[c * M ** d:(c + 1) * M ** d].reshape((M,) * d, order="F") for c in range(m)])
    weights = None
    try:
        with open(str(path) + ".json") as fh:
            weights = json.load(fh).get("weights")
    except FileNotFoundError:
        pass
    return GridField(vals, weights)


# -- grid Sobolev ratios ------------------------------------------------------------

def sobolev_ratio(u, X, Y, k, operator="grad"):
    """||u||_Y / ||D u||_X on the torus with D = grad_k, symmetric or deviatoric gradient."""
    from .norm_engine import norm
    if operator == "grad":
        Du = grad_k(u, k)
    elif operator == "sym":
        Du = symmetric_gradient(u)
    elif operator == "dev":
        Du = deviatoric_symmetric_gradient(u)
    else:
        raise ValueError(operator)
    den = norm(field_rearrangement(Du), X)
    return norm(field_rearrangement(u), Y) / den if den > 0 else math.nan


def bump_ray(d, M, m=1, widths=None):
    """Mean-zero Gaussian bumps of shrinking width (each component a copy)."""
    widths = np.geomspace(0.12, 4.0 / M, 6) if widths is None else widths
    out = []
    for w in widths:
        b = gaussian_bump(d, M, w)
        b = b - b.mean()
        out.append(GridField(np.stack([b] * m)))
    return list(widths), out
