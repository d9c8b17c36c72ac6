"""Fourier representation of real 2*pi-periodic functions.

Coefficients follow the normalisation ``c_k = (1/2pi) * int u(x) exp(-ikx) dx``
and are stored for ``k = -N..N`` in a single complex array, index ``k + N``.
Sobolev norms are plain weighted l2 norms of that sequence; no factor 2*pi.

The private helpers working on half spectra (``k = 0..N``, arbitrary leading
batch axes) are what the time stepper uses; the public functions wrap them
around :class:`SpectralField`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

HERMITIAN_TOL = 1e-10
RANDOM_SLOPE_OFFSET = 0.01


class StructuralError(ValueError):
    """Coefficient array does not describe a real field."""


class ConfigurationError(ValueError):
    """Grid too small for the requested operation."""


@dataclass(frozen=True)
class GridSpec:
    """Resolved wavenumbers ``-max_mode..max_mode`` and a physical grid.

    ``phys_points`` defaults to the smallest FFT-friendly size that makes
    quadratic products alias free (``M >= 3N + 1``).
    """

    max_mode: int
    phys_points: int | None = None

    def __post_init__(self):
        n = int(self.max_mode)
        if n < 1:
            raise ConfigurationError(f"max_mode must be a positive integer, got {self.max_mode}")
        object.__setattr__(self, "max_mode", n)
        m = self.phys_points
        if m is None:
            m = sfft.next_fast_len(3 * n + 1, real=True)
        m = int(m)
        if m < 2 * n + 1:
            raise ConfigurationError(f"phys_points={m} cannot resolve {n} modes (need >= {2 * n + 1})")
        object.__setattr__(self, "phys_points", m)

    @property
    def N(self) -> int:
        return self.max_mode

    @property
    def M(self) -> int:
        return self.phys_points

    @property
    def dealiased(self) -> bool:
        return self.phys_points >= 3 * self.max_mode + 1

    def require_dealiased(self):
        if not self.dealiased:
            raise ConfigurationError(
                f"quadratic products need phys_points >= 3N+1 = {3 * self.N + 1}, got {self.M}"
            )

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    @property
    def x(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.M) / self.M


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Truncated Fourier series of a real periodic function."""

    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (2 * self.grid.N + 1,):
            raise ValueError(f"expected {2 * self.grid.N + 1} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: GridSpec) -> SpectralField:
        return cls(grid, np.zeros(2 * grid.N + 1, dtype=complex))

    @classmethod
    def from_modes(cls, grid: GridSpec, modes: dict[int, complex], hermitian: bool = True) -> SpectralField:
        """Build a field from ``{k: c_k}``; with ``hermitian`` the ``-k`` partners are filled in."""
        c = np.zeros(2 * grid.N + 1, dtype=complex)
        for k, val in modes.items():
            if abs(k) > grid.N:
                raise ValueError(f"mode {k} outside the band |k| <= {grid.N}")
            c[k + grid.N] = val
            if hermitian and k:
                c[-k + grid.N] = np.conj(val)
        return cls(grid, c)

    @classmethod
    def from_half(cls, grid: GridSpec, half: np.ndarray) -> SpectralField:
        return cls(grid, full_from_half(half))

    @property
    def half(self) -> np.ndarray:
        return self.coeffs[self.grid.N:]

    def mode(self, k: int) -> complex:
        if abs(k) > self.grid.N:
            return 0j
        return complex(self.coeffs[k + self.grid.N])

    @property
    def mean(self) -> complex:
        return self.mode(0)

    def hermitian_defect(self) -> float:
        c = self.coeffs
        return float(np.max(np.abs(c - np.conj(c[::-1])))) if c.size else 0.0

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.coeffs))))
        return self.hermitian_defect() <= tol * scale

    def _check_grid(self, other: SpectralField):
        if other.grid != self.grid:
            raise ConfigurationError("fields live on different grids")

    def __add__(self, other: SpectralField) -> SpectralField:
        self._check_grid(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        self._check_grid(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> SpectralField:
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar) -> SpectralField:
        if isinstance(scalar, SpectralField):
            return dealias_product(self, scalar)
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> SpectralField:
        return SpectralField(self.grid, self.coeffs / scalar)

    def l2(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def bracket(k) -> np.ndarray:
    """Japanese bracket ``<k> = (1 + k^2)^(1/2)``."""
    k = np.asarray(k, dtype=float)
    return np.sqrt(1.0 + k * k)


# --- half-spectrum kernels -------------------------------------------------

def full_from_half(half: np.ndarray) -> np.ndarray:
    half = np.asarray(half, dtype=complex)
    return np.concatenate([np.conj(half[..., :0:-1]), half], axis=-1)


def synthesize(half: np.ndarray, M: int) -> np.ndarray:
    """Physical samples on ``M`` points from half-spectrum coefficients."""
    N = half.shape[-1] - 1
    buf = np.zeros(half.shape[:-1] + (M // 2 + 1,), dtype=complex)
    buf[..., : N + 1] = half
    buf[..., 0] = buf[..., 0].real
    return sfft.irfft(buf, n=M, axis=-1) * M


def analyze(samples: np.ndarray, N: int) -> np.ndarray:
    """Half-spectrum coefficients ``k = 0..N`` of real samples (1/M normalised)."""
    M = samples.shape[-1]
    return sfft.rfft(samples, axis=-1)[..., : N + 1] / M


def half_product(a: np.ndarray, b: np.ndarray, M: int) -> np.ndarray:
    N = a.shape[-1] - 1
    return analyze(synthesize(a, M) * synthesize(b, M), N)


# --- public operations -----------------------------------------------------

def to_physical(f: SpectralField, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Samples of ``f`` on the grid ``x_j = 2 pi j / M``."""
    if not f.is_hermitian(tol):
        raise StructuralError(f"coefficients violate Hermitian symmetry (defect {f.hermitian_defect():.3e})")
    # symmetrised within tolerance, so the synthesis is real by construction
    c = f.coeffs
    half = 0.5 * (c + np.conj(c[::-1]))[f.grid.N:]
    return synthesize(half, f.grid.M)


def to_spectral(samples, grid: GridSpec) -> SpectralField:
    """Discrete version of the Fourier-coefficient integral, modes ``|k| > N`` dropped."""
    x = np.asarray(samples)
    if x.shape != (grid.M,):
        raise ValueError(f"expected {grid.M} samples, got shape {x.shape}")
    if np.iscomplexobj(x):
        if np.max(np.abs(x.imag)) > 0:
            raise ValueError("samples must be real")
        x = x.real
    return SpectralField.from_half(grid, analyze(x.astype(float), grid.N))


def sobolev_norm(f: SpectralField, s: float) -> float:
    w = bracket(f.grid.wavenumbers) ** (2.0 * s)
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def derivative(f: SpectralField, order: int = 1) -> SpectralField:
    if order < 0:
        raise ValueError("order must be nonnegative")
    return SpectralField(f.grid, (1j * f.grid.wavenumbers) ** order * f.coeffs)


def dealias_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Coefficients ``sum_{k1+k2=k} f_k1 g_k2`` for ``|k| <= N``, computed by padded FFT."""
    if f.grid != g.grid:
        raise ConfigurationError("fields live on different grids")
    f.grid.require_dealiased()
    return SpectralField.from_half(f.grid, half_product(f.half, g.half, f.grid.M))


def random_field(grid: GridSpec, s: float, seed, mean_zero: bool = True,
                 sigma: float = RANDOM_SLOPE_OFFSET) -> SpectralField:
    """Random-phase field with ``|c_k| = <k>^(-s-1/2-sigma)``.

    The data sits in ``H^s`` but its ``H^(s+eps)`` norm grows with ``N``.
    ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * np.pi, grid.N + 1)
    k = np.arange(grid.N + 1)
    half = bracket(k) ** (-s - 0.5 - sigma) * np.exp(1j * theta)
    half[0] = 0.0 if mean_zero else np.sign(np.cos(theta[0])) or 1.0
    return SpectralField.from_half(grid, half)


def embedding_constant(grid: GridSpec, mean_zero: bool = False) -> float:
    """``sup ||w||_Linf / ||w||_H1`` over band-limited ``w``.

    The supremum is attained by ``w_k = <k>^-2`` (Cauchy-Schwarz), so the
    ratio is measured on that field rather than bounded.
    """
    k = grid.wavenumbers
    c = bracket(k) ** -2.0
    if mean_zero:
        c[grid.N] = 0.0
    w = SpectralField(grid, c)
    return float(np.max(np.abs(to_physical(w))) / sobolev_norm(w, 1.0))
