"""Time evolution of the coupled KdV system and its forced-damped variant.

    u_t + u_xxx + gamma u + (v^2)_x / 2 = f
    v_t + alpha v_xxx + delta v + (u v)_x = g

The linear part ``ik^3 - gamma`` (resp. ``i alpha k^3 - delta``) is
propagated exactly by an integrating factor; the quadratic terms go through
a Lawson-type RK4 stage structure.  Internally everything runs on half
spectra ``k = 0..N`` with optional leading batch axes, so ensembles step
together through the same FFT calls.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np
import scipy.fft as sfft

from .diophantine import AlphaClassification, classify_alpha, parse_alpha
from .spectral import GridSpec, SpectralField, analyze, sobolev_norm, synthesize

BLOWUP_THRESHOLD = 1e12
MEAN_ZERO_TOL = 1e-14
SCHEMES = ("ifrk4", "etdrk4", "normal_form")


class BlowUpError(RuntimeError):
    """Raised when a coefficient becomes non-finite or exceeds the threshold."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


def default_dt(N: int) -> float:
    return min(1e-3, 0.5 / N)


@dataclass(frozen=True, eq=False)
class MBState:
    u: SpectralField
    v: SpectralField
    t: float = 0.0


@dataclass(frozen=True, eq=False)
class SimParams:
    """Configuration of one run.  ``alpha`` may be given raw; it is classified on construction."""

    alpha: AlphaClassification
    grid: GridSpec
    t_end: float = 1.0
    dt: float | None = None
    gamma: float = 0.0
    delta: float = 0.0
    f: SpectralField | None = None
    g: SpectralField | None = None
    nonlinear: bool = True
    blowup_threshold: float = BLOWUP_THRESHOLD
    scheme: str = "ifrk4"
    nf_theta: float = 1.0

    def __post_init__(self):
        if not isinstance(self.alpha, AlphaClassification):
            object.__setattr__(self, "alpha", classify_alpha(self.alpha))
        if self.dt is None:
            object.__setattr__(self, "dt", default_dt(self.grid.N))
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.gamma < 0 or self.delta < 0:
            raise ValueError("damping rates must be nonnegative")
        for name in ("f", "g"):
            h = getattr(self, name)
            if h is None:
                continue
            if h.grid != self.grid:
                raise ValueError(f"forcing {name} lives on a different grid")
            if abs(h.mean) > MEAN_ZERO_TOL:
                raise ValueError(f"forcing {name} must be mean zero")
        if self.nonlinear:
            self.grid.require_dealiased()
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.nf_theta > 0:
            raise ValueError("nf_theta must be positive")

    @property
    def alpha_value(self) -> float:
        return self.alpha.alpha_float

    @property
    def damped(self) -> bool:
        return self.gamma > 0 or self.delta > 0

    @property
    def forced(self) -> bool:
        return self.f is not None or self.g is not None

    def n_steps(self, t_end: float | None = None) -> int:
        t_end = self.t_end if t_end is None else t_end
        return int(math.ceil(t_end / self.dt - 1e-9)) if t_end > 0 else 0


def linear_symbols(params: SimParams) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(params.grid.N + 1, dtype=float)
    k3 = k ** 3
    return 1j * k3 - params.gamma, 1j * params.alpha_value * k3 - params.delta


def linear_flow(field: SpectralField, dispersion_coeff: float = 1.0, damping: float = 0.0,
                t: float = 0.0) -> SpectralField:
    """Exact solution of ``w_t + c w_xxx + damping w = 0``: ``w_k -> exp((i c k^3 - damping) t) w_k``."""
    k = field.grid.wavenumbers.astype(float)
    mult = np.exp((1j * dispersion_coeff * k ** 3 - damping) * t)
    return SpectralField(field.grid, field.coeffs * mult)


def nonlinear_terms(u: np.ndarray, v: np.ndarray, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Half-spectrum ``(-(ik/2)(v*v)_k, -ik(u*v)_k)``."""
    ik = 1j * np.arange(u.shape[-1])
    U = synthesize(u, M)
    V = synthesize(v, M)
    n = u.shape[-1] - 1
    vv = analyze(V * V, n)
    uv = analyze(U * V, n)
    return -0.5 * ik * vv, -ik * uv


def rhs_nonlinear(state: MBState, params: SimParams) -> tuple[SpectralField, SpectralField]:
    """Quadratic part of the right-hand side only; linear, damping and forcing terms excluded."""
    params.grid.require_dealiased()
    du, dv = nonlinear_terms(state.u.half, state.v.half, params.grid.M)
    return SpectralField.from_half(params.grid, du), SpectralField.from_half(params.grid, dv)


class IFRK4:
    """Integrating-factor RK4 stepper on (batched) half spectra."""

    def __init__(self, params: SimParams, dt: float | None = None):
        self.params = params
        self.dt = params.dt if dt is None else dt
        self.M = params.grid.M
        Lu, Lv = linear_symbols(params)
        h = self.dt
        self.Eu, self.Ev = np.exp(Lu * h), np.exp(Lv * h)
        self.Eu2, self.Ev2 = np.exp(Lu * h / 2), np.exp(Lv * h / 2)
        n = params.grid.N + 1
        self.fu = params.f.half.copy() if params.f is not None else np.zeros(n, complex)
        self.gv = params.g.half.copy() if params.g is not None else np.zeros(n, complex)
        self.nonlinear = params.nonlinear

    def forcing_terms(self, u, v):
        if self.nonlinear:
            nu, nv = nonlinear_terms(u, v, self.M)
        else:
            nu, nv = np.zeros_like(u), np.zeros_like(v)
        return nu + self.fu, nv + self.gv

    def step(self, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h = self.dt
        Eu, Ev, Eu2, Ev2 = self.Eu, self.Ev, self.Eu2, self.Ev2
        au, av = self.forcing_terms(u, v)
        bu, bv = self.forcing_terms(Eu2 * (u + 0.5 * h * au), Ev2 * (v + 0.5 * h * av))
        cu, cv = self.forcing_terms(Eu2 * u + 0.5 * h * bu, Ev2 * v + 0.5 * h * bv)
        du, dv = self.forcing_terms(Eu * u + h * Eu2 * cu, Ev * v + h * Ev2 * cv)
        u_new = Eu * u + (h / 6) * (Eu * au + 2 * Eu2 * (bu + cu) + du)
        v_new = Ev * v + (h / 6) * (Ev * av + 2 * Ev2 * (bv + cv) + dv)
        # k = 0 carries no dispersion; keep the mean exactly real
        u_new[..., 0] = u_new[..., 0].real
        v_new[..., 0] = v_new[..., 0].real
        return u_new, v_new

    # uniform stepper protocol shared with the normal-form stepper
    def begin(self, u, v):
        return u, v

    def advance(self, state):
        return self.step(*state)

    def physical(self, state):
        return state


def _etd_coefficients(z: np.ndarray, n_contour: int = 64):
    """Cox-Matthews ETDRK4 weights ``phi(z)`` by the Kassam-Trefethen contour mean."""
    r = np.exp(2j * np.pi * (np.arange(1, n_contour + 1) - 0.5) / n_contour)
    lr = z[:, None] + r[None, :]
    e = np.exp(lr)
    q = np.mean((np.exp(lr / 2) - 1) / lr, axis=1)
    f1 = np.mean((-4 - lr + e * (4 - 3 * lr + lr * lr)) / lr ** 3, axis=1)
    f2 = np.mean((2 + lr + e * (lr - 2)) / lr ** 3, axis=1)
    f3 = np.mean((-4 - 3 * lr - lr * lr + e * (4 - lr)) / lr ** 3, axis=1)
    return q, f1, f2, f3


class ETDRK4(IFRK4):
    """Exponential time differencing RK4 (Cox-Matthews).

    Exact for a constant right-hand side, so unlike the Lawson scheme it
    keeps forced stationary states fixed even where ``|L dt| >> 1``.
    """

    def __init__(self, params: SimParams, dt: float | None = None):
        super().__init__(params, dt)
        Lu, Lv = linear_symbols(params)
        h = self.dt
        self.cu = [h * c for c in _etd_coefficients(Lu * h)]
        self.cv = [h * c for c in _etd_coefficients(Lv * h)]

    def step(self, u, v):
        Eu2, Ev2 = self.Eu2, self.Ev2
        Qu, f1u, f2u, f3u = self.cu
        Qv, f1v, f2v, f3v = self.cv
        nu, nv = self.forcing_terms(u, v)
        au, av = Eu2 * u + Qu * nu, Ev2 * v + Qv * nv
        nau, nav = self.forcing_terms(au, av)
        bu, bv = Eu2 * u + Qu * nau, Ev2 * v + Qv * nav
        nbu, nbv = self.forcing_terms(bu, bv)
        cu, cv = Eu2 * au + Qu * (2 * nbu - nu), Ev2 * av + Qv * (2 * nbv - nv)
        ncu, ncv = self.forcing_terms(cu, cv)
        u_new = self.Eu * u + f1u * nu + 2 * f2u * (nau + nbu) + f3u * ncu
        v_new = self.Ev * v + f1v * nv + 2 * f2v * (nav + nbv) + f3v * ncv
        u_new[..., 0] = u_new[..., 0].real
        v_new[..., 0] = v_new[..., 0].real
        return u_new, v_new


def step_ifrk4(state: MBState, params: SimParams) -> MBState:
    """One integrating-factor RK4 step of size ``params.dt``."""
    u, v = IFRK4(params).step(state.u.half, state.v.half)
    peak = max(np.max(np.abs(u)), np.max(np.abs(v)))
    if not np.isfinite(peak) or peak > params.blowup_threshold:
        raise BlowUpError(f"coefficient magnitude {peak:.3e} at t={state.t + params.dt:.6g}", state=state)
    return state_from_half(params.grid, u, v, state.t + params.dt)


def make_stepper(params: SimParams, dt: float | None = None):
    """Stepper selected by ``params.scheme``: ``"ifrk4"``, ``"etdrk4"`` or ``"normal_form"``."""
    # without the quadratic term the change of variables is the identity
    if params.scheme == "etdrk4":
        return ETDRK4(params, dt)
    if params.scheme == "ifrk4" or not params.nonlinear:
        return IFRK4(params, dt)
    from .normal_form import PartialNormalFormStepper
    return PartialNormalFormStepper(params, dt, theta=params.nf_theta)


def integrate(params: SimParams, u: np.ndarray, v: np.ndarray, n_steps: int,
              callback: Callable | None = None, every: int = 1, dt: float | None = None,
              t0: float = 0.0, stepper=None):
    """Advance half-spectrum arrays ``n_steps`` steps.

    ``callback(i, t, u, v)`` runs at step 0 and every ``every`` steps after
    (and at the final step).  Raises :class:`BlowUpError` carrying the last
    good arrays.
    """
    stepper = make_stepper(params, dt) if stepper is None else stepper
    h = stepper.dt
    thresh = params.blowup_threshold
    u = np.array(u, dtype=complex)
    v = np.array(v, dtype=complex)
    if callback is not None:
        callback(0, t0, u, v)
    state = stepper.begin(u, v)
    for i in range(1, n_steps + 1):
        new_state = stepper.advance(state)
        u_new, v_new = stepper.physical(new_state)
        peak = max(np.max(np.abs(u_new)), np.max(np.abs(v_new)))
        if not np.isfinite(peak) or peak > thresh:
            raise BlowUpError(f"coefficient magnitude {peak:.3e} at t={t0 + i * h:.6g}",
                              state=(t0 + (i - 1) * h, u, v))
        state = new_state
        u, v = u_new, v_new
        if callback is not None and (i % every == 0 or i == n_steps):
            callback(i, t0 + i * h, u, v)
    return u, v


# --- diagnostics -----------------------------------------------------------

def _half_weights(n: int) -> np.ndarray:
    w = np.full(n, 2.0)
    w[0] = 1.0
    return w


def _cubic_integral(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``int u v^2 dx`` by quadrature on a grid of at least 4N+1 points (alias free)."""
    N = u.shape[-1] - 1
    M4 = sfft.next_fast_len(4 * N + 1, real=True)
    U = synthesize(u, M4)
    V = synthesize(v, M4)
    return 2 * np.pi * np.mean(U * V * V, axis=-1)


def conserved_arrays(u: np.ndarray, v: np.ndarray, alpha: float) -> dict[str, np.ndarray]:
    w = _half_weights(u.shape[-1])
    k2 = np.arange(u.shape[-1], dtype=float) ** 2
    au, av = np.abs(u) ** 2, np.abs(v) ** 2
    U2 = 2 * np.pi * np.sum(w * au, axis=-1)
    V2 = 2 * np.pi * np.sum(w * av, axis=-1)
    grad = 2 * np.pi * np.sum(w * k2 * (au + alpha * av), axis=-1)
    return {
        "E1": 2 * np.pi * u[..., 0].real,
        "E2": 2 * np.pi * v[..., 0].real,
        "E3": U2 + V2,
        "E4": grad - _cubic_integral(u, v),
        "U2": U2,
        "V2": V2,
    }


def conserved_quantities(state: MBState, alpha) -> tuple[float, float, float, float]:
    """``(E1, E2, E3, E4)`` as physical integrals over ``[0, 2 pi]``."""
    a = alpha.alpha_float if isinstance(alpha, AlphaClassification) else float(parse_alpha(alpha))
    d = conserved_arrays(state.u.half, state.v.half, a)
    return tuple(float(d[key]) for key in ("E1", "E2", "E3", "E4"))


def _pairing(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``int a b dx`` for real fields given by half spectra."""
    w = _half_weights(a.shape[-1])
    return 2 * np.pi * np.sum(w * (a * np.conj(b)).real, axis=-1)


def sobolev_half(h: np.ndarray, s: float) -> np.ndarray:
    w = _half_weights(h.shape[-1]) * (1.0 + np.arange(h.shape[-1], dtype=float) ** 2) ** s
    return np.sqrt(np.sum(w * np.abs(h) ** 2, axis=-1))


@dataclass
class RunRecord:
    """Sampled time series (and optional snapshots) of one trajectory."""

    params: SimParams
    times: np.ndarray
    series: dict[str, np.ndarray]
    snapshots: list[MBState] = field(default_factory=list)
    snapshot_times: np.ndarray | None = None
    annotations: list[str] = field(default_factory=list)

    @property
    def final(self) -> MBState | None:
        return self.snapshots[-1] if self.snapshots else None


def evolve(params: SimParams, u0: SpectralField, v0: SpectralField,
           observers: Iterable[Callable[[MBState], Mapping[str, float]]] = (),
           sample_every: int = 1, snapshot_every: int | None = None,
           norm_indices: Iterable[float] = (0.0, 1.0)) -> RunRecord:
    """Run from ``(u0, v0)`` to ``params.t_end``.

    Diagnostics (E1..E4, the pieces of E3, the forcing work ``int fu + gv``
    and Sobolev norms) are sampled every ``sample_every`` steps, plus any
    observer outputs.  With ``snapshot_every`` the states themselves are
    kept; the final state is always kept.  The step size is shrunk slightly
    if needed so that ``t_end`` is hit exactly.
    """
    grid = params.grid
    for name, fld in (("u0", u0), ("v0", v0)):
        if fld.grid != grid:
            raise ValueError(f"{name} lives on a different grid")
    n_steps = params.n_steps()
    dt = params.t_end / n_steps if n_steps else params.dt
    alpha = params.alpha_value
    norm_indices = tuple(norm_indices)
    f_half = params.f.half if params.f is not None else None
    g_half = params.g.half if params.g is not None else None
    observers = tuple(observers)

    times = []
    rows: dict[str, list] = {}
    snaps, snap_t = [], []

    def push(key, val):
        rows.setdefault(key, []).append(float(val))

    def record(i, t, u, v):
        emit_sample = i % sample_every == 0 or i == n_steps
        emit_snap = (snapshot_every is not None and i % snapshot_every == 0) or i == n_steps
        state = None
        if emit_sample:
            times.append(t)
            for key, val in conserved_arrays(u, v, alpha).items():
                push(key, val)
            work = 0.0
            if f_half is not None:
                work += _pairing(f_half, u)
            if g_half is not None:
                work += _pairing(g_half, v)
            push("W", work)
            for s in norm_indices:
                push(f"u_H{s:g}", sobolev_half(u, s))
                push(f"v_H{s:g}", sobolev_half(v, s))
            if observers:
                state = MBState(SpectralField.from_half(grid, u), SpectralField.from_half(grid, v), t)
                for obs in observers:
                    for key, val in (obs(state) or {}).items():
                        push(key, val)
        if emit_snap:
            if state is None:
                state = MBState(SpectralField.from_half(grid, u), SpectralField.from_half(grid, v), t)
            if not snaps or snap_t[-1] != t:
                snaps.append(state)
                snap_t.append(t)

    every = sample_every if snapshot_every is None else math.gcd(sample_every, snapshot_every)
    integrate(params, u0.half, v0.half, n_steps, callback=record, every=every, dt=dt)
    return RunRecord(params, np.array(times), {k: np.array(v) for k, v in rows.items()},
                     snaps, np.array(snap_t))


def damped_energy_residual(record: RunRecord, params: SimParams | None = None,
                           coarse_limit: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Residual of ``dE3/dt + 2 gamma int u^2 + 2 delta int v^2 - 2 int (fu + gv)``.

    The derivative is a centred difference over the stored samples, so the
    residual is returned at interior sample times and is second order in
    the sampling stride.  When ``gamma = delta`` this is the balance law
    ``dE3/dt + 2 gamma E3 = 2 int fu + gv``.
    """
    params = record.params if params is None else params
    t = record.times
    if t.size < 3:
        raise ValueError("need at least three samples")
    h = np.diff(t)
    if np.max(np.abs(h - h[0])) > 1e-9 * max(1.0, abs(t[-1])):
        raise ValueError("samples must be uniformly spaced")
    h = h[0]
    rate = max(params.gamma, params.delta)
    if rate * h > coarse_limit:
        msg = f"sampling stride {h:g} is coarse relative to damping {rate:g}"
        warnings.warn(msg, stacklevel=2)
        record.annotations.append(msg)
    s = record.series
    dE3 = (s["E3"][2:] - s["E3"][:-2]) / (2 * h)
    res = (dE3 + 2 * params.gamma * s["U2"][1:-1] + 2 * params.delta * s["V2"][1:-1]
           - 2 * s["W"][1:-1])
    return t[1:-1], res


def state_from_half(grid: GridSpec, u: np.ndarray, v: np.ndarray, t: float = 0.0) -> MBState:
    return MBState(SpectralField.from_half(grid, u), SpectralField.from_half(grid, v), t)


def state_norm(state: MBState, s: float = 1.0) -> float:
    return sobolev_norm(state.u, s) + sobolev_norm(state.v, s)
