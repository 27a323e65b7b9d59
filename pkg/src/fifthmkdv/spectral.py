"""Periodic grids, Fourier transforms, spectral calculus and Sobolev/Bourgain norms.

Conventions
-----------
Space is the periodic interval ``[0, L)`` sampled at ``n`` points.  Spectral
samples are coefficients against the orthonormal basis ``exp(i k x)/sqrt(L)``::

    c_k = sqrt(L) / n * sum_j f(x_j) exp(-i k x_j)

so that the discrete L2 norm ``sqrt(dx * sum |f_j|^2)`` equals ``sqrt(sum |c_k|^2)``
exactly, and norms are stable under grid refinement.  Space-time fields use the
same convention in both variables, with the dual frequency ``tau`` paired to
``t`` through ``exp(i (t tau + x xi))``; the linear flow of ``d_t - d_x^5`` then
lives on ``tau = xi^5``.

All arrays are stored in FFT ordering.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ResolutionError, UsageError

PHYSICAL = "physical"
SPECTRAL = "spectral"

DEFAULT_B = 0.51


def japanese(xi):
    """<xi> = sqrt(1 + xi^2)."""
    return np.sqrt(1.0 + np.square(xi))


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform periodic grid on ``[0, length)``."""

    length: float
    points: int

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise UsageError(f"grid length must be positive, got {self.length}")
        if self.points < 8 or self.points % 2:
            raise UsageError(f"grid points must be even and >= 8, got {self.points}")

    @property
    def spacing(self):
        return self.length / self.points

    @property
    def dk(self):
        return 2.0 * math.pi / self.length

    @property
    def k_max(self):
        return math.pi * self.points / self.length

    @cached_property
    def x(self):
        return np.arange(self.points) * self.spacing

    @cached_property
    def index(self):
        """Integer mode numbers in FFT order, in ``[-n/2, n/2)``."""
        return np.fft.fftfreq(self.points, 1.0 / self.points).astype(np.int64)

    @cached_property
    def wavenumbers(self):
        return self.index * self.dk

    def mode_index(self, k):
        """Integer mode number of the grid wavenumber ``k`` (must be commensurate)."""
        m = k / self.dk
        mi = int(round(m))
        if abs(m - mi) > 1e-9 * max(1.0, abs(m)):
            raise ResolutionError(f"wavenumber {k} is not a multiple of 2*pi/L = {self.dk}")
        return mi


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Product of a :class:`SpaceGrid` with a uniform time window.

    Times are ``time_start + j * time_extent / time_points``.  The time window is
    treated periodically; callers multiply by a :class:`TimeCutoff` that vanishes
    near both ends before transforming.
    """

    space: SpaceGrid
    time_extent: float
    time_points: int
    time_start: float = 0.0

    def __post_init__(self):
        if not self.time_extent > 0:
            raise UsageError("time_extent must be positive")
        if self.time_points < 1:
            raise UsageError("time_points must be positive")

    @property
    def dt(self):
        return self.time_extent / self.time_points

    @cached_property
    def t(self):
        return self.time_start + np.arange(self.time_points) * self.dt

    @cached_property
    def tau(self):
        return 2.0 * math.pi * np.fft.fftfreq(self.time_points, self.dt)


@dataclass(frozen=True, eq=False)
class ShearedGrid:
    """Cell-centred quadrature grid in sheared coordinates ``(xi, mu = tau - xi^5)``.

    ``xi`` and ``mu`` are cell centres, ``dxi`` and ``dmu`` the matching cell
    widths.  Samples living on this grid are continuum space-time spectral
    densities ``f~(tau, xi)``.
    """

    xi: np.ndarray
    dxi: np.ndarray
    mu: np.ndarray
    dmu: np.ndarray

    @classmethod
    def from_windows(cls, xi_windows, mu_window, cells_xi, cells_mu):
        xs, dxs = [], []
        for lo, hi in xi_windows:
            edges = np.linspace(lo, hi, cells_xi + 1)
            xs.append(0.5 * (edges[1:] + edges[:-1]))
            dxs.append(np.diff(edges))
        edges = np.linspace(mu_window[0], mu_window[1], cells_mu + 1)
        return cls(
            xi=np.concatenate(xs),
            dxi=np.concatenate(dxs),
            mu=0.5 * (edges[1:] + edges[:-1]),
            dmu=np.diff(edges),
        )


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Samples of a function on a grid, on the physical or the spectral side."""

    grid: object
    samples: np.ndarray
    side: str = PHYSICAL

    def __post_init__(self):
        if self.side not in (PHYSICAL, SPECTRAL):
            raise UsageError(f"unknown side {self.side!r}")
        arr = np.asarray(self.samples)
        expected = _grid_shape(self.grid)
        if arr.shape != expected:
            raise UsageError(f"samples shape {arr.shape} does not match grid shape {expected}")
        arr = arr.astype(self._dtype(), copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def _dtype(self):
        return np.complex128

    @property
    def is_space_time(self):
        return isinstance(self.grid, SpaceTimeGrid)

    def with_samples(self, samples, side=None):
        return type(self)(self.grid, samples, self.side if side is None else side)


class RealField(ComplexField):
    """A real-valued function; its spectral side is conjugate symmetric."""

    def _dtype(self):
        return np.float64 if self.side == PHYSICAL else np.complex128

    def __post_init__(self):
        if self.side == PHYSICAL:
            arr = np.asarray(self.samples)
            if np.iscomplexobj(arr):
                scale = max(np.max(np.abs(arr)), 1e-300) if arr.size else 1.0
                if arr.size and np.max(np.abs(arr.imag)) > 1e-12 * scale:
                    raise UsageError("RealField samples have a non-negligible imaginary part")
                object.__setattr__(self, "samples", arr.real)
        super().__post_init__()


@dataclass(frozen=True, eq=False)
class ShearedField:
    """Space-time spectral density on a :class:`ShearedGrid`; shape ``(len(mu), len(xi))``."""

    grid: ShearedGrid
    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.complex128)
        if arr.shape != (self.grid.mu.size, self.grid.xi.size):
            raise UsageError("sheared samples must have shape (len(mu), len(xi))")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)


def _grid_shape(grid):
    if isinstance(grid, SpaceGrid):
        return (grid.points,)
    if isinstance(grid, SpaceTimeGrid):
        return (grid.time_points, grid.space.points)
    raise UsageError(f"unsupported grid type {type(grid).__name__}")


def _scale(grid):
    if isinstance(grid, SpaceGrid):
        return math.sqrt(grid.length) / grid.points
    return math.sqrt(grid.space.length * grid.time_extent) / (grid.time_points * grid.space.points)


def to_spectral(f: ComplexField) -> ComplexField:
    """Orthonormal-basis coefficients of a physical field."""
    if f.side != PHYSICAL:
        raise UsageError("to_spectral expects a physical-side field")
    if f.is_space_time:
        coeffs = sfft.fft2(f.samples) * _scale(f.grid)
    else:
        coeffs = sfft.fft(f.samples) * _scale(f.grid)
    return type(f)(f.grid, coeffs, SPECTRAL)


def to_physical(f: ComplexField) -> ComplexField:
    if f.side != SPECTRAL:
        raise UsageError("to_physical expects a spectral-side field")
    if f.is_space_time:
        vals = sfft.ifft2(f.samples) / _scale(f.grid)
    else:
        vals = sfft.ifft(f.samples) / _scale(f.grid)
    if isinstance(f, RealField):
        vals = vals.real
    return type(f)(f.grid, vals, PHYSICAL)


def spectral_coefficients(f: ComplexField) -> np.ndarray:
    return f.samples if f.side == SPECTRAL else to_spectral(f).samples


def l2_norm(f: ComplexField) -> float:
    """Physical-side L2 norm by the rectangle rule (exact for trigonometric polynomials)."""
    if f.side == SPECTRAL:
        return float(np.sqrt(np.sum(np.abs(f.samples) ** 2)))
    g = f.grid
    cell = g.spacing if isinstance(g, SpaceGrid) else g.space.spacing * g.dt
    return float(np.sqrt(cell * np.sum(np.abs(f.samples) ** 2)))


def spectral_derivative(f: ComplexField, order: int) -> ComplexField:
    """Apply ``d_x^order`` through the symbol ``(i k)^order``; returns the input's side."""
    if order < 0:
        raise UsageError("derivative order must be non-negative")
    if f.is_space_time:
        k = f.grid.space.wavenumbers[None, :]
    else:
        k = f.grid.wavenumbers
    symbol = (1j * k) ** order
    if order % 2 == 1:
        # odd derivatives of a real field: the unpaired Nyquist mode is dropped
        symbol = symbol * (_nyquist_mask(f.grid) if not f.is_space_time else _nyquist_mask(f.grid.space)[None, :])
    coeffs = spectral_coefficients(f) * symbol
    out = type(f)(f.grid, coeffs, SPECTRAL)
    return out if f.side == SPECTRAL else to_physical(out)


def _nyquist_mask(grid: SpaceGrid):
    mask = np.ones(grid.points)
    mask[grid.points // 2] = 0.0
    return mask


def dealias(f: ComplexField, rule: str = "half") -> ComplexField:
    """Zero the modes a cubic product cannot resolve on this grid.

    ``rule="half"`` keeps ``|index| <= n/4`` (sufficient for exact cubic products
    on the same grid); ``rule="two_thirds"`` keeps ``|index| <= n/3`` (quadratic
    products).  For exact products with no mode loss use :func:`padded_product`.
    """
    if f.side != SPECTRAL:
        raise UsageError("dealias expects a spectral-side field")
    n = f.grid.points if not f.is_space_time else f.grid.space.points
    idx = np.abs(np.fft.fftfreq(n, 1.0 / n))
    if rule == "half":
        keep = idx <= n // 4
    elif rule == "two_thirds":
        keep = idx <= n // 3
    elif rule == "none":
        keep = idx < n // 2
    else:
        raise UsageError(f"unknown dealias rule {rule!r}")
    keep = keep & (idx < n // 2)
    return type(f)(f.grid, f.samples * (keep if not f.is_space_time else keep[None, :]), SPECTRAL)


def pad_spectrum(c: np.ndarray, m: int) -> np.ndarray:
    """Embed FFT-ordered coefficients of length n into length m >= n (zero padding)."""
    n = c.shape[-1]
    out = np.zeros(c.shape[:-1] + (m,), dtype=np.complex128)
    h = n // 2
    out[..., :h] = c[..., :h]
    out[..., m - h + 1 :] = c[..., n - h + 1 :]
    # the Nyquist mode of the short grid has no unique partner; split it
    out[..., h] += 0.5 * c[..., h]
    out[..., m - h] += 0.5 * c[..., h]
    return out


def truncate_spectrum(c: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`pad_spectrum` for modes representable on n points."""
    m = c.shape[-1]
    h = n // 2
    out = np.zeros(c.shape[:-1] + (n,), dtype=np.complex128)
    out[..., :h] = c[..., :h]
    out[..., n - h + 1 :] = c[..., m - h + 1 :]
    return out


def padded_product(*fields: ComplexField, padding: float = 2.0) -> ComplexField:
    """Pointwise product evaluated on a zero-padded grid, projected back.

    With ``padding >= (p + 1) / 2`` for a p-fold product the result is free of
    aliasing on every retained mode.
    """
    grid = fields[0].grid
    if not isinstance(grid, SpaceGrid) or any(g.grid != grid for g in fields):
        raise UsageError("padded_product needs fields on one SpaceGrid")
    n = grid.points
    m = int(2 * math.ceil(padding * n / 2))
    prod = None
    for f in fields:
        c = pad_spectrum(spectral_coefficients(f), m)
        vals = sfft.ifft(c) * m
        prod = vals if prod is None else prod * vals
    # each factor carries one 1/sqrt(L) from the basis normalisation
    c = truncate_spectrum(sfft.fft(prod) / m, n) * math.sqrt(grid.length) ** (1 - len(fields))
    real = all(isinstance(f, RealField) for f in fields)
    cls = RealField if real else ComplexField
    if real:
        c[n // 2] = 0.0
    return cls(grid, c, SPECTRAL)


# ---------------------------------------------------------------------------
# Time cutoff
# ---------------------------------------------------------------------------


def _smooth_step(z):
    """C-infinity step: 0 for z <= 0, 1 for z >= 1."""
    z = np.clip(np.asarray(z, dtype=float), 0.0, 1.0)
    out = np.zeros_like(z)
    inner = (z > 0) & (z < 1)
    zi = z[inner]
    a = np.exp(-1.0 / zi)
    b = np.exp(-1.0 / (1.0 - zi))
    out[inner] = a / (a + b)
    out[z >= 1] = 1.0
    return out


@dataclass(frozen=True)
class TimeCutoff:
    """Smooth cutoff equal to 1 on ``plateau`` and 0 outside ``support``.

    The ramps are the standard ``exp(-1/z)`` quotient, which has continuous
    derivatives of every order.
    """

    plateau: tuple = (0.0, 1.0)
    support: tuple = (-1.0, 2.0)

    def __post_init__(self):
        a, b = self.support
        p, q = self.plateau
        if not (a < p <= q < b):
            raise UsageError("need support[0] < plateau[0] <= plateau[1] < support[1]")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.support
        p, q = self.plateau
        up = _smooth_step((t - a) / (p - a))
        down = _smooth_step((b - t) / (b - q))
        return np.minimum(up, down)


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def sobolev_norm(f: ComplexField, s: float) -> float:
    """H^s norm ``(sum <k>^{2s} |c_k|^2)^{1/2}`` of a spatial field."""
    if f.is_space_time:
        raise UsageError("sobolev_norm expects a spatial field")
    c = spectral_coefficients(f)
    w = japanese(f.grid.wavenumbers) ** (2.0 * s)
    return float(np.sqrt(np.sum(w * np.abs(c) ** 2)))


def sobolev_norm_rescaled(f: ComplexField, s: float, lam: float) -> float:
    """H^s norm of ``lam * f(lam x)`` computed from the unscaled spectrum."""
    c = spectral_coefficients(f)
    w = japanese(lam * f.grid.wavenumbers) ** (2.0 * s)
    return float(np.sqrt(lam * np.sum(w * np.abs(c) ** 2)))


class ModulationTruncationWarning(RuntimeWarning):
    pass


def xsb_norm(f, s: float, b: float = DEFAULT_B, symbol=None, tail_tolerance=0.01) -> float:
    """Bourgain norm ``|| <xi>^s <tau - xi^5>^b u~ ||`` of a space-time field.

    Accepts a field on a :class:`SpaceTimeGrid` (physical or spectral side) or a
    :class:`ShearedField`.  On a rectangular grid the part of the weighted mass
    sitting in the outermost tenth of the resolved tau band is used as a tail
    estimate; a :class:`ModulationTruncationWarning` is issued when it exceeds
    ``tail_tolerance``.
    """
    if isinstance(f, ShearedField):
        g = f.grid
        w = japanese(g.xi)[None, :] ** (2 * s) * japanese(g.mu)[:, None] ** (2 * b)
        cell = g.dmu[:, None] * g.dxi[None, :]
        return float(np.sqrt(np.sum(w * np.abs(f.samples) ** 2 * cell)) / (2 * math.pi))
    if not f.is_space_time:
        raise UsageError("xsb_norm expects a space-time field")
    symbol = symbol or (lambda xi: xi**5)
    c = spectral_coefficients(f)
    xi = f.grid.space.wavenumbers[None, :]
    tau = f.grid.tau[:, None]
    w = japanese(xi) ** (2 * s) * japanese(tau - symbol(xi)) ** (2 * b)
    dens = w * np.abs(c) ** 2
    total = float(np.sum(dens))
    if total > 0:
        tmax = np.max(np.abs(f.grid.tau))
        edge = np.abs(f.grid.tau) > 0.9 * tmax
        frac = float(np.sum(dens[edge, :])) / total
        if frac > tail_tolerance:
            warnings.warn(
                f"tau range truncates the modulation weight: {frac:.3g} of the weighted mass "
                "sits in the outer tenth of the tau band",
                ModulationTruncationWarning,
                stacklevel=2,
            )
    return math.sqrt(total)


def space_time_field(grid: SpaceTimeGrid, func, cutoff: TimeCutoff | None = None, real=False):
    """Sample ``func(t, x)`` on a space-time grid, optionally times a cutoff in t."""
    tt, xx = np.meshgrid(grid.t, grid.space.x, indexing="ij")
    vals = func(tt, xx)
    if cutoff is not None:
        vals = vals * cutoff(grid.t)[:, None]
    return (RealField if real else ComplexField)(grid, vals, PHYSICAL)
