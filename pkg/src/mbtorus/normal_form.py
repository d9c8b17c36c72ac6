"""Differentiation-by-parts operators and the integrated normal-form identities.

Every operator here is a weighted convolution

    out_k = sum_j a_j b_{k-j} W[k, j],     k = 0..N, |j|, |k-j| <= N,

with a kernel ``W`` that depends only on the indices.  Kernels are built
once per (alpha, grid) and applied with a gather + einsum, which costs
O(N^2) per output field and broadcasts over leading batch axes.

Index sets where a denominator vanishes exactly (the starred sums) are
found in integer arithmetic whenever alpha is an exact rational.  For a
numeric alpha only the structural exclusions apply and small divisors are
used as computed.

Sums over an intermediate frequency ``m`` (the cubic terms R1, R2, R3)
keep ``|m| <= N``, so that every identity below holds exactly for the
Galerkin-truncated system that the solver integrates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from ._kernels import weighted_convolution
from .diophantine import AlphaClassification, DomainError, classify_alpha, parse_alpha
from .dynamics import (MBState, RunRecord, SimParams, linear_flow, linear_symbols,
                       nonlinear_terms)
from .spectral import GridSpec, SpectralField, full_from_half, half_product

MEAN_ZERO_TOL = 1e-14


def _exact_int_array(values):
    """Object-dtype integers when int64 might overflow."""
    return np.array(values, dtype=object)


class NormalFormOps:
    """Kernels of B1, B2, R1, R2, R3 and the resonant index maps of rho1, rho2.

    ``excluded`` maps each operator name to the list of ``(k, j)`` pairs
    (with ``k >= 0``) that the starred sum skips because the displayed
    denominator vanishes exactly; structural zeros (``k = 0`` for B1 and R1,
    ``j = 0`` for B2, R2, R3) are listed separately in ``structural``.
    """

    def __init__(self, alpha, grid: GridSpec):
        self.alpha = alpha if isinstance(alpha, AlphaClassification) else classify_alpha(alpha)
        self.grid = grid
        N = grid.N
        self.N = N
        k = np.arange(N + 1)
        j = np.arange(-N, N + 1)
        K, J = np.meshgrid(k, j, indexing="ij")
        band = np.abs(K - J) <= N
        self._gather = np.where(band, K - J + N, 0)
        self._band = band

        a_float = self.alpha.alpha_float
        if self.alpha.exact:
            a, b = self.alpha.alpha.numerator, self.alpha.alpha.denominator
            big = 4 * max(a, b) * (N + 1) ** 3 >= 2 ** 62
            Ki = _exact_int_array(K) if big else K.astype(np.int64)
            Ji = _exact_int_array(J) if big else J.astype(np.int64)
            # b * Omega1(k, j),  Omega1 = k^3 - alpha j^3 - alpha (k-j)^3
            om1 = b * Ki ** 3 - a * (Ji ** 3 + (Ki - Ji) ** 3)
            # b * Omega2(k, j),  Omega2 = alpha k^3 - j^3 - alpha (k-j)^3
            om2 = a * Ki ** 3 - b * Ji ** 3 - a * (Ki - Ji) ** 3
            # b * 3 alpha (m - c1 k)(m - c2 k) with m = j
            q1 = 3 * a * Ji ** 2 - 3 * a * Ji * Ki + (a - b) * Ki ** 2
            zero1 = np.asarray(om1 == 0, dtype=bool)
            zero2 = np.asarray(om2 == 0, dtype=bool)
            zeroq = np.asarray(q1 == 0, dtype=bool)
            omega1 = om1.astype(float) / b
            omega2 = om2.astype(float) / b
            qden = q1.astype(float) / b
        else:
            c1, c2, d1, d2 = (self.alpha.c1, self.alpha.c2, self.alpha.d1, self.alpha.d2)
            Kf, Jf = K.astype(float), J.astype(float)
            omega1 = -3 * a_float * Kf * (Jf - c1 * Kf) * (Jf - c2 * Kf)
            omega2 = -(1 - a_float) * Jf * (Jf - d1 * Kf) * (Jf - d2 * Kf)
            qden = 3 * a_float * (Jf - c1 * Kf) * (Jf - c2 * Kf)
            zero1 = np.zeros_like(band)
            zero2 = np.zeros_like(band)
            zeroq = np.zeros_like(band)

        k_zero = K == 0
        j_zero = J == 0
        live_b1 = band & ~k_zero & ~zero1
        live_2 = band & ~j_zero & ~zero2
        live_r1 = band & ~k_zero & ~zeroq
        self._omega1 = np.where(live_b1, omega1, np.inf)
        self._omega2 = np.where(live_2, omega2, np.inf)
        self._qden = np.where(live_r1, qden, np.inf)

        with np.errstate(divide="ignore", invalid="ignore"):
            self.W_b1 = np.where(live_b1, -0.5 * K / np.where(live_b1, omega1, 1.0), 0.0)
            self.W_b2 = np.where(live_2, -K / np.where(live_2, omega2, 1.0), 0.0)
            self.W_r1 = np.where(live_r1, -1j * J / np.where(live_r1, qden, 1.0), 0.0)
            self.W_r2 = np.where(live_2, 0.5j * K * J / np.where(live_2, omega2, 1.0), 0.0)
            self.W_r3 = np.where(live_2, 1j * K / np.where(live_2, omega2, 1.0), 0.0)
        for name in ("W_b1", "W_b2", "W_r1", "W_r2", "W_r3"):
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=complex))

        def pairs(mask):
            kk, jj = np.nonzero(mask)
            return [(int(x), int(y) - N) for x, y in zip(kk, jj)]

        self.excluded = {
            "b1": pairs(band & ~k_zero & zero1),
            "b2": pairs(band & ~j_zero & zero2),
            "r1": pairs(band & ~k_zero & zeroq),
        }
        self.excluded["r2"] = self.excluded["b2"]
        self.excluded["r3"] = self.excluded["b2"]
        self.structural = {"b1": "k = 0", "r1": "k = 0", "b2": "k1 = 0", "r2": "m = 0", "r3": "k1 = 0"}
        self._build_rho()

    # --- resonant index maps ----------------------------------------------

    def _build_rho(self):
        N = self.N
        self.rho1_index: list[tuple[int, int, int]] = []
        self.rho2_index: list[tuple[int, int, int]] = []
        if not self.alpha.special:
            return
        roots = self.alpha.exact_roots
        c1 = Fraction(roots["c1"])
        d_roots = [Fraction(roots["d1"]), Fraction(roots["d2"])]
        for k in range(1, N + 1):
            x = c1 * k
            if x.denominator == 1 and abs(x) <= N and abs(k - x) <= N:
                self.rho1_index.append((k, int(x), k - int(x)))
            for d in d_roots:
                y = d * k
                if y.denominator == 1 and abs(y) <= N and abs(k - y) <= N and y != 0:
                    self.rho2_index.append((k, int(y), k - int(y)))

    # --- application kernels ------------------------------------------------

    def _full(self, f) -> np.ndarray:
        if isinstance(f, SpectralField):
            if f.grid != self.grid:
                raise ValueError("field lives on a different grid")
            return f.coeffs
        arr = np.asarray(f, dtype=complex)
        if arr.shape[-1] == self.N + 1:
            return full_from_half(arr)
        if arr.shape[-1] != 2 * self.N + 1:
            raise ValueError(f"unexpected spectrum length {arr.shape[-1]}")
        return arr

    def _half(self, f) -> np.ndarray:
        return self._full(f)[..., self.N:]

    def _apply(self, a, b, W) -> np.ndarray:
        """Half spectrum of ``sum_j a_j b_{k-j} W[k, j]``."""
        return weighted_convolution(a, b, W, self._gather)

    def _wrap(self, half, like):
        if isinstance(like, SpectralField):
            return SpectralField.from_half(self.grid, half)
        return half

    def _product(self, f, g) -> np.ndarray:
        self.grid.require_dealiased()
        return full_from_half(half_product(self._half(f), self._half(g), self.grid.M))

    def _require_mean_zero(self, u, name="u"):
        mean = self._full(u)[..., self.N]
        if np.max(np.abs(mean)) > MEAN_ZERO_TOL:
            raise DomainError(f"{name} must be mean zero (|u_0| = {np.max(np.abs(mean)):.3e})")

    # --- operators -----------------------------------------------------------

    def b1(self, v1, v2):
        """``-(k/2) sum* v1_k1 v2_k2 / (k^3 - alpha k1^3 - alpha k2^3)``."""
        return self._wrap(self._apply(self._full(v1), self._full(v2), self.W_b1), v1)

    def b2(self, u, v):
        """``-k sum* u_k1 v_k2 / (alpha k^3 - k1^3 - alpha k2^3)``; ``u`` must be mean zero."""
        self._require_mean_zero(u)
        return self._wrap(self._apply(self._full(u), self._full(v), self.W_b2), u)

    def r1(self, u, v, w):
        """``-(i/3 alpha) sum*_m m (u*v)_m w_{k-m} / ((m - c1 k)(m - c2 k))``."""
        uv = self._product(u, v)
        return self._wrap(self._apply(uv, self._full(w), self.W_r1), u)

    def r2(self, v1, v2, v3):
        """``(ik/2) sum*_m m (v1*v2)_m v3_{k-m} / Omega2(k, m)``."""
        vv = self._product(v1, v2)
        return self._wrap(self._apply(vv, self._full(v3), self.W_r2), v1)

    def r3(self, u1, u2, v):
        """``ik sum*_k1 u1_k1 m (u2*v)_m / Omega2(k, k1)`` with ``m = k - k1``."""
        self._require_mean_zero(u1, "u1")
        m = np.arange(-self.N, self.N + 1)
        uv = m * self._product(u2, v)
        return self._wrap(self._apply(self._full(u1), uv, self.W_r3), u1)

    def r3_split(self, u1, u2, v):
        """R3 split by whether ``k1 + k2 = 0``; returns ``(I, II)`` as half spectra.

        ``II = ik v_k sum*_k1 u1_k1 u2_{-k1} (k - k1) / Omega2(k, k1)`` collects
        the pairs with ``k1 + k2 = 0``; ``I`` is everything else.
        """
        N = self.N
        u1f, u2f, vf = self._full(u1), self._full(u2), self._full(v)
        k = np.arange(N + 1)
        j = np.arange(-N, N + 1)
        mfac = (k[:, None] - j[None, :])
        pair = u1f * u2f[..., ::-1]  # u1_k1 u2_{-k1}
        kern = self.W_r3 * mfac
        ii = vf[..., N:] * np.einsum("...j,kj->...k", pair, kern)
        conv = self._product(u2f, vf)
        gathered = conv[..., self._gather] - u2f[..., ::-1][..., None, :] * vf[..., N:][..., :, None]
        first = np.einsum("...j,...kj,kj->...k", u1f, gathered, kern)
        return first, ii

    def rho1(self, v1, v2):
        """``-ik v1_{c1 k} v2_{c2 k}`` on the exact resonant modes; zero otherwise."""
        a, b = self._full(v1), self._full(v2)
        out = np.zeros(a.shape[:-1] + (self.N + 1,), dtype=complex)
        N = self.N
        for k, x, y in self.rho1_index:
            out[..., k] = -1j * k * a[..., x + N] * b[..., y + N]
        return self._wrap(out, v1)

    def rho2(self, u, v):
        """``-ik (u_{d1 k} v_{(1-d1) k} + u_{d2 k} v_{(1-d2) k})`` on exact resonances."""
        a, b = self._full(u), self._full(v)
        out = np.zeros(a.shape[:-1] + (self.N + 1,), dtype=complex)
        N = self.N
        for k, x, y in self.rho2_index:
            out[..., k] += -1j * k * a[..., x + N] * b[..., y + N]
        return self._wrap(out, u)

    # --- diagnostics ---------------------------------------------------------

    def min_divisor(self) -> dict[str, float]:
        """Smallest nonzero denominator magnitude kept in each starred sum."""
        return {
            "omega1": float(np.min(np.abs(self._omega1))),
            "omega2": float(np.min(np.abs(self._omega2))),
            "r1_quadratic": float(np.min(np.abs(self._qden))),
        }

    # --- the transformed vector field ----------------------------------------

    def transformed_rhs(self, u, v):
        """``(rho1 + R1, rho2 + R2 + R3)`` as half spectra for arrays of half spectra."""
        uf, vf = self._full(u), self._full(v)
        fu = self.rho1(vf, vf) + self.r1(uf, vf, vf)
        fv = self.rho2(uf, vf) + self.r2(vf, vf, vf) + self.r3(uf, uf, vf)
        return fu, fv

    def boundary_terms(self, u, v):
        uf, vf = self._full(u), self._full(v)
        return self.b1(vf, vf), self.b2(uf, vf)


# --- integrated identities ---------------------------------------------------

@dataclass
class IdentityResidual:
    times: np.ndarray
    res_u: np.ndarray
    res_v: np.ndarray
    rule: str
    annotations: list[str] = field(default_factory=list)

    @property
    def max_u(self) -> float:
        return float(np.max(self.res_u)) if self.res_u.size else 0.0

    @property
    def max_v(self) -> float:
        return float(np.max(self.res_v)) if self.res_v.size else 0.0


def _cumulative(values: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, str]:
    # cumulative_simpson casts to real, so the parts are integrated separately
    rule, fn = ("simpson", cumulative_simpson) if t.size >= 3 else ("trapezoid", cumulative_trapezoid)
    re = fn(values.real, x=t, axis=0, initial=0.0)
    im = fn(values.imag, x=t, axis=0, initial=0.0)
    return re + 1j * im, rule


def identity_residual(record: RunRecord, params: SimParams | None = None,
                      include_rho: bool = True, ops: NormalFormOps | None = None) -> IdentityResidual:
    """Relative l2 residual of the integrated normal-form identities along a trajectory.

    For each stored time ``t``::

        u(t) - e^{ik^3 t} u(0) + B1(t) - e^{ik^3 t} B1(0) - int_0^t e^{ik^3 (t-r)} [R1 + rho1](r) dr

    and the analogue for ``v`` with B2, ``R2 + R3 + rho2`` and ``e^{i alpha k^3 t}``.
    The time integral is a cumulative composite Simpson rule over the
    snapshots (trapezoid when fewer than three).  Only conservative,
    unforced runs satisfy these identities.
    """
    params = record.params if params is None else params
    if params.damped or params.forced:
        raise ValueError("the integrated identities hold for the conservative system only")
    if not params.nonlinear:
        raise ValueError("identities describe the nonlinear flow")
    snaps = record.snapshots
    if len(snaps) < 2:
        raise ValueError("need at least two snapshots")
    ops = NormalFormOps(params.alpha, params.grid) if ops is None else ops
    t = np.array([s.t for s in snaps])
    h = np.diff(t)
    if np.max(np.abs(h - h[0])) > 1e-9 * max(1.0, t[-1]):
        raise ValueError("snapshots must be uniformly spaced")
    U = np.stack([s.u.half for s in snaps])
    V = np.stack([s.v.half for s in snaps])
    k3 = np.arange(ops.N + 1, dtype=float) ** 3
    a = params.alpha_value
    Bu, Bv = ops.boundary_terms(U, V)
    Fu, Fv = ops.transformed_rhs(U, V)
    if not include_rho:
        Fu = Fu - ops.rho1(V, V)
        Fv = Fv - ops.rho2(U, V)
    ph_u = np.exp(1j * np.outer(t, k3))
    ph_v = np.exp(1j * a * np.outer(t, k3))
    Iu, rule = _cumulative(Fu / ph_u, t)
    Iv, _ = _cumulative(Fv / ph_v, t)
    ru = U - ph_u * U[0] + Bu - ph_u * Bu[0] - ph_u * Iu
    rv = V - ph_v * V[0] + Bv - ph_v * Bv[0] - ph_v * Iv

    def rel(res, ref):
        w = np.full(ops.N + 1, 2.0)
        w[0] = 1.0
        num = np.sqrt(np.sum(w * np.abs(res) ** 2, axis=-1))
        den = np.sqrt(np.sum(w * np.abs(ref) ** 2, axis=-1))
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), num)

    note = [] if rule == "simpson" else ["fewer than three snapshots: trapezoid rule used"]
    return IdentityResidual(t, rel(ru, U), rel(rv, V), rule, note)


def rho_correction_integral(record: RunRecord, params: SimParams | None = None,
                            ops: NormalFormOps | None = None) -> tuple[SpectralField, SpectralField]:
    """``int_0^t e^{L(t-r)} rho(r) dr`` at the last snapshot, with L the damped linear symbol."""
    params = record.params if params is None else params
    ops = NormalFormOps(params.alpha, params.grid) if ops is None else ops
    snaps = record.snapshots
    t = np.array([s.t for s in snaps])
    U = np.stack([s.u.half for s in snaps])
    V = np.stack([s.v.half for s in snaps])
    Lu, Lv = linear_symbols(params)
    Fu = ops.rho1(V, V) * np.exp(-np.outer(t, Lu))
    Fv = ops.rho2(U, V) * np.exp(-np.outer(t, Lv))
    Iu, _ = _cumulative(Fu, t)
    Iv, _ = _cumulative(Fv, t)
    T = t[-1]
    grid = params.grid
    return (SpectralField.from_half(grid, np.exp(Lu * T) * Iu[-1]),
            SpectralField.from_half(grid, np.exp(Lv * T) * Iv[-1]))


def nonlinear_residual(state: MBState, u0: SpectralField, v0: SpectralField, alpha,
                       gamma: float = 0.0, delta: float = 0.0,
                       rho_correction: tuple[SpectralField, SpectralField] | None = None):
    """``u(t) - S(t) u0`` and ``v(t) - S_alpha(t) v0`` with the (damped) linear propagators.

    ``rho_correction``, if given, is subtracted as well (see
    :func:`rho_correction_integral`).
    """
    a = alpha.alpha_float if isinstance(alpha, AlphaClassification) else float(parse_alpha(alpha))
    ru = state.u - linear_flow(u0, 1.0, gamma, state.t)
    rv = state.v - linear_flow(v0, a, delta, state.t)
    if rho_correction is not None:
        ru = ru - rho_correction[0]
        rv = rv - rho_correction[1]
    return ru, rv


# --- time stepping in normal-form variables -----------------------------------

class RecoveryError(RuntimeError):
    """The fixed-point inversion of the normal-form change of variables failed."""


class PartialNormalFormStepper:
    """IFRK4 applied to partially normal-formed variables.

    With ``Lambda = theta / dt`` the new unknowns are

        U = u + B1>(v, v),    V = v + B2>(u, v),

    where ``>`` keeps only the pairs with ``|Omega| > Lambda``, i.e. the
    interactions whose phases a step of size ``dt`` cannot resolve.  Those
    are integrated analytically by the change of variables; the remaining
    quadratic interactions are slow and go to RK4 together with the cubic
    terms the transformation produces.  The map is exact, so the stepper
    solves the same truncated system as :class:`~mbtorus.dynamics.IFRK4`;
    only the error structure differs.  ``(u, v)`` is recovered from
    ``(U, V)`` by fixed-point iteration, which contracts because every
    retained kernel entry is ``O(k dt / theta)``.

    Damping and forcing are supported::

        U' = L_u U + N_u< + f + 2 B1>(N_v + g, v) + (gamma - 2 delta) B1>(v, v)
        V' = L_v V + N_v< + g + B2>(N_u + f, v) + B2>(u, N_v + g) - gamma B2>(u, v)
    """

    def __init__(self, params: SimParams, dt: float | None = None, theta: float = 1.0,
                 tol: float = 1e-14, max_iter: int = 100, ops: NormalFormOps | None = None):
        params.grid.require_dealiased()
        self.params = params
        self.dt = params.dt if dt is None else dt
        self.ops = NormalFormOps(params.alpha, params.grid) if ops is None else ops
        ops = self.ops
        N = ops.N
        self.threshold = theta / self.dt
        hi1 = np.isfinite(ops._omega1) & (np.abs(ops._omega1) > self.threshold)
        hi2 = np.isfinite(ops._omega2) & (np.abs(ops._omega2) > self.threshold)
        K = np.broadcast_to(np.arange(N + 1)[:, None], hi1.shape)
        self.W_b1 = np.ascontiguousarray(np.where(hi1, ops.W_b1, 0.0), dtype=complex)
        self.W_b2 = np.ascontiguousarray(np.where(hi2, ops.W_b2, 0.0), dtype=complex)
        self.W_nu = np.ascontiguousarray(np.where(ops._band & ~hi1, -0.5j * K, 0.0), dtype=complex)
        self.W_nv = np.ascontiguousarray(np.where(ops._band & ~hi2, -1j * K, 0.0), dtype=complex)
        Lu, Lv = linear_symbols(params)
        h = self.dt
        self.Eu, self.Ev = np.exp(Lu * h), np.exp(Lv * h)
        self.Eu2, self.Ev2 = np.exp(Lu * h / 2), np.exp(Lv * h / 2)
        zero = np.zeros(N + 1, dtype=complex)
        self.f = params.f.half if params.f is not None else zero
        self.g = params.g.half if params.g is not None else zero
        self.gamma, self.delta = params.gamma, params.delta
        self.tol, self.max_iter = tol, max_iter
        self.iterations = 0

    def _conv(self, a, b, W):
        return weighted_convolution(full_from_half(a), full_from_half(b), W, self.ops._gather)

    def forward(self, u, v):
        return u + self._conv(v, v, self.W_b1), v + self._conv(u, v, self.W_b2)

    def recover(self, U, V, u, v):
        scale = max(1.0, float(np.max(np.abs(U))), float(np.max(np.abs(V))))
        for it in range(1, self.max_iter + 1):
            u_new = U - self._conv(v, v, self.W_b1)
            v_new = V - self._conv(u_new, v, self.W_b2)
            diff = max(np.max(np.abs(u_new - u)), np.max(np.abs(v_new - v)))
            u, v = u_new, v_new
            if not np.isfinite(diff):
                break
            if diff <= self.tol * scale:
                self.iterations += it
                return u, v
        raise RecoveryError(f"normal-form inversion did not converge (last update {diff:.3e})")

    def _rhs(self, U, V, guess):
        u, v = self.recover(U, V, *guess)
        nu, nv = nonlinear_terms(u, v, self.params.grid.M)
        su, sv = nu + self.f, nv + self.g
        fu = self._conv(v, v, self.W_nu) + self.f + 2 * self._conv(sv, v, self.W_b1)
        fv = (self._conv(u, v, self.W_nv) + self.g + self._conv(su, v, self.W_b2)
              + self._conv(u, sv, self.W_b2))
        if self.gamma or self.delta:
            fu = fu + (self.gamma - 2 * self.delta) * self._conv(v, v, self.W_b1)
            fv = fv - self.gamma * self._conv(u, v, self.W_b2)
        return fu, fv, (u, v)

    # stepper protocol: state is (U, V, u, v)
    def begin(self, u, v):
        U, V = self.forward(u, v)
        return U, V, u, v

    def advance(self, state):
        U, V, u, v = state
        h = self.dt
        Eu, Ev, Eu2, Ev2 = self.Eu, self.Ev, self.Eu2, self.Ev2
        au, av, g0 = self._rhs(U, V, (u, v))
        bu, bv, g1 = self._rhs(Eu2 * (U + 0.5 * h * au), Ev2 * (V + 0.5 * h * av),
                               (Eu2 * g0[0], Ev2 * g0[1]))
        cu, cv, g2 = self._rhs(Eu2 * U + 0.5 * h * bu, Ev2 * V + 0.5 * h * bv, g1)
        du, dv, g3 = self._rhs(Eu * U + h * Eu2 * cu, Ev * V + h * Ev2 * cv, (Eu * g0[0], Ev * g0[1]))
        U_new = Eu * U + (h / 6) * (Eu * au + 2 * Eu2 * (bu + cu) + du)
        V_new = Ev * V + (h / 6) * (Ev * av + 2 * Ev2 * (bv + cv) + dv)
        U_new[..., 0] = U_new[..., 0].real
        V_new[..., 0] = V_new[..., 0].real
        u_new, v_new = self.recover(U_new, V_new, *g3)
        return U_new, V_new, u_new, v_new

    def physical(self, state):
        return state[2], state[3]
