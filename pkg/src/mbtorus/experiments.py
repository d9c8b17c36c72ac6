"""Desk-scale numerical studies: smoothing, growth, absorbing set, stationary pair, attractor."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .diophantine import AlphaClassification, classify_alpha
from .dynamics import (BlowUpError, SimParams, _cubic_integral, _half_weights, _pairing,
                       conserved_arrays, integrate, sobolev_half)
from .normal_form import NormalFormOps, RecoveryError
from .spectral import (GridSpec, SpectralField, bracket, derivative, embedding_constant,
                       half_product, random_field, sobolev_norm, to_physical, to_spectral)

R2_GATE = 0.9
DIVERGED = 1e8                      # Picard growth factor treated as divergence


class StationaryDivergence(RuntimeError):
    """The stationary Picard iteration failed; ``pair`` holds the divergence report."""

    def __init__(self, pair):
        super().__init__(f"stationary solve did not converge after {pair.iterations} iterations "
                         f"(last H^2 difference {pair.differences[-1]:.3e})")
        self.pair = pair


# --- slope fits -------------------------------------------------------------

@dataclass(frozen=True)
class SlopeFit:
    """Least-squares fit ``log|c_k| = a - exponent * log<k>`` over a mode window."""

    exponent: float
    intercept: float
    r2: float
    window: tuple[int, int]

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "intercept": self.intercept, "r2": self.r2,
                "window": list(self.window)}


def fit_window(N: int) -> tuple[int, int]:
    return max(1, N // 8), N // 2


def spectral_slope(amplitudes: np.ndarray, window: tuple[int, int]) -> SlopeFit:
    """Fit the decay exponent of ``amplitudes[k]`` (indexed by ``k >= 0``) over ``window``.

    Returns NaN fields when the window holds zeros (e.g. a vanishing residual).
    """
    lo, hi = window
    k = np.arange(lo, hi + 1)
    amp = np.asarray(amplitudes, dtype=float)[lo:hi + 1]
    if amp.size < 3 or np.any(~np.isfinite(amp)) or np.any(amp <= 0):
        return SlopeFit(math.nan, math.nan, math.nan, window)
    x = np.log(bracket(k))
    y = np.log(amp)
    slope, intercept = np.polyfit(x, y, 1)
    pred = intercept + slope * x
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else math.nan
    return SlopeFit(float(-slope), float(intercept), r2, window)


def _h_norm(u: np.ndarray, v: np.ndarray, s: float) -> np.ndarray:
    return np.sqrt(sobolev_half(u, s) ** 2 + sobolev_half(v, s) ** 2)


def _seed_pair(grid: GridSpec, s: float, seed: int) -> tuple[SpectralField, SpectralField]:
    return random_field(grid, s, [seed, 0]), random_field(grid, s, [seed, 1])


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


# --- smoothing ----------------------------------------------------------------

@dataclass
class SmoothingReport:
    """Residual ``u(t) - S(t)u0`` against the solution: norms and spectral slopes.

    Exponents are decay rates (positive); ``slope_gap`` is the residual
    exponent minus the solution exponent, so a smoothing gain shows up as
    a positive gap.
    """

    alpha_class: AlphaClassification
    s: float
    s1_grid: tuple[float, ...]
    N: int
    t_end: float
    seeds: tuple[int, ...]
    times: np.ndarray
    residual_norm_series: dict[float, np.ndarray]
    solution_fits: dict[int, SlopeFit]
    residual_fits: dict[int, SlopeFit]
    seed_gaps: dict[int, float]
    slope_gap: float
    fit_times: tuple[float, float]
    settings: dict = field(default_factory=dict)
    annotations: list[str] = field(default_factory=list)
    blown_up: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "alpha_class": self.alpha_class.to_dict(),
            "s": self.s,
            "s1_grid": list(self.s1_grid),
            "N": self.N,
            "t_end": self.t_end,
            "seeds": list(self.seeds),
            "fit_times": list(self.fit_times),
            "solution_fits": {str(k): v.to_dict() for k, v in self.solution_fits.items()},
            "residual_fits": {str(k): v.to_dict() for k, v in self.residual_fits.items()},
            "seed_gaps": {str(k): _jsonable(v) for k, v in self.seed_gaps.items()},
            "slope_gap": _jsonable(self.slope_gap),
            "r2_gate": R2_GATE,
            "final_residual_norms": {f"{s1:g}": float(v[-1]) for s1, v in self.residual_norm_series.items()},
            "blown_up": list(self.blown_up),
            "settings": self.settings,
            "annotations": list(self.annotations),
        }

    def series(self) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        return self.times, {f"residual_H{s1:g}": v for s1, v in self.residual_norm_series.items()}


def _smoothing_batch(params, U0, V0, sample_every, n_steps, k3, a, ops, subtract_rho):
    """Run a batch; returns sample times and residual/solution snapshots."""
    T, SU, SV, RU, RV = [], [], [], [], []
    rho = {"Iu": np.zeros_like(U0), "Iv": np.zeros_like(V0), "t": 0.0, "fu": None, "fv": None}

    def rho_terms(t, u, v):
        # integrand in the interaction picture: e^{-ik^3 t} rho(t)
        return ops.rho1(v, v) * np.exp(-1j * k3 * t), ops.rho2(u, v) * np.exp(-1j * a * k3 * t)

    def cb(i, t, u, v):
        if subtract_rho:
            fu, fv = rho_terms(t, u, v)
            if rho["fu"] is not None:
                h = t - rho["t"]
                rho["Iu"] = rho["Iu"] + 0.5 * h * (fu + rho["fu"])
                rho["Iv"] = rho["Iv"] + 0.5 * h * (fv + rho["fv"])
            rho["fu"], rho["fv"], rho["t"] = fu, fv, t
        if i % sample_every == 0 or i == n_steps:
            pu, pv = np.exp(1j * k3 * t), np.exp(1j * a * k3 * t)
            ru = u - pu * U0
            rv = v - pv * V0
            if subtract_rho:
                ru = ru - pu * rho["Iu"]
                rv = rv - pv * rho["Iv"]
            T.append(t)
            SU.append(u.copy())
            SV.append(v.copy())
            RU.append(ru)
            RV.append(rv)

    every = 1 if subtract_rho else sample_every
    integrate(params, U0, V0, n_steps, callback=cb, every=every)
    return np.array(T), np.stack(SU, 1), np.stack(SV, 1), np.stack(RU, 1), np.stack(RV, 1)


def smoothing_experiment(alpha, s: float = 1.0, s1_grid: Sequence[float] = (1.0, 1.25, 1.4, 1.5),
                         N: int = 256, t_end: float = 10.0, seeds: Sequence[int] = range(5),
                         dt: float | None = None, scheme: str = "normal_form", nf_theta: float = 1.0,
                         sample_interval: float = 0.5, t_fit_start: float = 1.0,
                         nonlinear: bool = True, subtract_rho: bool = False,
                         grid: GridSpec | None = None) -> SmoothingReport:
    """Measure the smoothing gain of the nonlinear residual on random ``H^s`` data.

    Each seed draws mean-zero ``H^s`` data for ``u`` and ``v``, evolves the
    undamped system and records, at every sample time, the residual
    ``(u - S(t)u0, v - S_alpha(t)v0)``.  The per-mode RMS amplitude over the
    samples with ``t >= t_fit_start`` is fitted for solution and residual
    over ``k in [N/8, N/2]``; the gap is taken per seed (when both fits pass
    the R^2 gate) and the median is reported.  With ``subtract_rho`` the
    integrated exact-resonance terms are removed from the residual as well.
    """
    if s <= 0.5:
        raise ValueError("s must exceed 1/2")
    cls = classify_alpha(alpha) if not isinstance(alpha, AlphaClassification) else alpha
    grid = GridSpec(N) if grid is None else grid
    N = grid.N
    seeds = tuple(int(x) for x in seeds)
    if dt is None:
        dt = 2e-3 if scheme == "normal_form" else min(1e-3, 0.5 / N)
    params = SimParams(cls.alpha, grid, t_end=t_end, dt=dt, nonlinear=nonlinear, scheme=scheme,
                       nf_theta=nf_theta)
    n_steps = params.n_steps()
    h = t_end / n_steps
    sample_every = max(1, int(round(sample_interval / h)))
    a = cls.alpha_float
    k3 = np.arange(N + 1, dtype=float) ** 3
    ops = NormalFormOps(cls.alpha, grid) if subtract_rho else None
    data = [_seed_pair(grid, s, sd) for sd in seeds]
    U0 = np.stack([d[0].half for d in data])
    V0 = np.stack([d[1].half for d in data])
    notes: list[str] = []
    blown: list[int] = []
    try:
        T, SU, SV, RU, RV = _smoothing_batch(params, U0, V0, sample_every, n_steps, k3, a, ops,
                                             subtract_rho)
        keep = list(range(len(seeds)))
    except (BlowUpError, RecoveryError):
        # rerun seed by seed so a single bad trajectory does not sink the rest
        parts, keep = [], []
        for i, sd in enumerate(seeds):
            try:
                parts.append(_smoothing_batch(params, U0[i:i + 1], V0[i:i + 1], sample_every,
                                              n_steps, k3, a, ops, subtract_rho))
                keep.append(i)
            except (BlowUpError, RecoveryError) as exc:
                blown.append(sd)
                notes.append(f"seed {sd} aborted: {exc}")
        if not parts:
            raise BlowUpError("every seed blew up")
        T = parts[0][0]
        SU, SV, RU, RV = (np.concatenate([p[j] for p in parts]) for j in range(1, 5))

    mask = T >= t_fit_start - 1e-12
    if not np.any(mask):
        raise ValueError("no samples after t_fit_start")
    window = fit_window(N)
    sol_fits, res_fits, gaps = {}, {}, {}
    for row, i in enumerate(keep):
        sd = seeds[i]
        sol_amp = np.sqrt(0.5 * np.mean(np.abs(SU[row, mask]) ** 2 + np.abs(SV[row, mask]) ** 2, axis=0))
        res_amp = np.sqrt(0.5 * np.mean(np.abs(RU[row, mask]) ** 2 + np.abs(RV[row, mask]) ** 2, axis=0))
        sol_fits[sd] = spectral_slope(sol_amp, window)
        res_fits[sd] = spectral_slope(res_amp, window)
        ok = sol_fits[sd].r2 >= R2_GATE and res_fits[sd].r2 >= R2_GATE
        gaps[sd] = res_fits[sd].exponent - sol_fits[sd].exponent if ok else math.nan
    defined = [g for g in gaps.values() if math.isfinite(g)]
    gap = float(np.median(defined)) if defined else math.nan
    if not defined:
        notes.append("slope gap undefined: no seed passed the R^2 gate")
    elif len(defined) < len(gaps):
        notes.append(f"{len(gaps) - len(defined)} seed(s) failed the R^2 gate")
    norms = {float(s1): np.median(_h_norm(RU, RV, s1), axis=0) for s1 in s1_grid}
    settings = {"dt": h, "scheme": scheme, "nf_theta": nf_theta, "sample_interval": sample_every * h,
                "t_fit_start": t_fit_start, "nonlinear": nonlinear, "subtract_rho": subtract_rho,
                "M": grid.M}
    return SmoothingReport(cls, s, tuple(float(x) for x in s1_grid), N, t_end, seeds, T, norms,
                           sol_fits, res_fits, gaps, gap, (float(T[mask][0]), float(T[-1])),
                           settings, notes, tuple(blown))


# --- growth ---------------------------------------------------------------------

@dataclass
class GrowthReport:
    alpha_class: AlphaClassification
    s: float
    times: np.ndarray
    norms: np.ndarray          # ||u||_{H^s} + ||v||_{H^s}
    exponent: float            # fit of log norm against log(1 + t)
    exponential_rate: float    # fit of log norm against t
    E3_drift: float
    settings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"alpha_class": self.alpha_class.to_dict(), "s": self.s,
                "exponent": self.exponent, "exponential_rate": self.exponential_rate,
                "initial_norm": float(self.norms[0]), "final_norm": float(self.norms[-1]),
                "max_norm": float(np.max(self.norms)), "E3_drift": self.E3_drift,
                "settings": self.settings}

    def series(self):
        return self.times, {f"norm_H{self.s:g}": self.norms}


def growth_tracking(alpha, s: float = 1.0, N: int = 64, t_end: float = 10.0, seed: int = 0,
                    dt: float | None = None, data_s: float | None = None, amplitude: float = 1.0,
                    sample_interval: float = 0.1, nonlinear: bool = True,
                    scheme: str = "ifrk4") -> GrowthReport:
    """Track ``||u||_{H^s} + ||v||_{H^s}`` and fit polynomial and exponential trends.

    Data are drawn with regularity ``data_s`` (default ``s``) and scaled so
    the initial ``H^s`` norm of each component is ``amplitude`` (at most).
    """
    if s < 1:
        raise ValueError("growth tracking needs s >= 1")
    cls = classify_alpha(alpha) if not isinstance(alpha, AlphaClassification) else alpha
    grid = GridSpec(N)
    u0, v0 = _seed_pair(grid, s if data_s is None else data_s, seed)
    u0 = u0 * (amplitude / sobolev_norm(u0, s))
    v0 = v0 * (amplitude / sobolev_norm(v0, s))
    params = SimParams(cls.alpha, grid, t_end=t_end, dt=dt, nonlinear=nonlinear, scheme=scheme)
    n_steps = params.n_steps()
    h = t_end / n_steps
    every = max(1, int(round(sample_interval / h)))
    T, Y, E3 = [], [], []

    def cb(i, t, u, v):
        T.append(t)
        Y.append(float(sobolev_half(u, s) + sobolev_half(v, s)))
        E3.append(float(conserved_arrays(u, v, cls.alpha_float)["E3"]))

    integrate(params, u0.half, v0.half, n_steps, callback=cb, every=every)
    T, Y = np.array(T), np.array(Y)
    logy = np.log(Y)
    if T.size >= 2 and np.ptp(logy) > 0:
        exponent = float(np.polyfit(np.log1p(T), logy, 1)[0])
        rate = float(np.polyfit(T, logy, 1)[0])
    else:
        exponent = rate = 0.0
    drift = abs(E3[-1] - E3[0]) / abs(E3[0]) if E3[0] else 0.0
    return GrowthReport(cls, s, T, Y, exponent, rate, drift,
                        {"N": N, "dt": h, "seed": seed, "t_end": t_end, "amplitude": amplitude,
                         "data_s": s if data_s is None else data_s, "nonlinear": nonlinear,
                         "scheme": scheme})


# --- forced, damped runs -----------------------------------------------------------

def make_forcing(grid: GridSpec, spec, seed: int = 0, amplitude: float = 0.1,
                 s: float = 2.0) -> SpectralField:
    """Mean-zero forcing from a ``{k: amplitude}`` mode dict or, if ``spec`` is None, a seed.

    Seeded forcing has ``||f||_{H^1} = amplitude``.
    """
    if spec is None:
        f = random_field(grid, s, [seed, 2])
        return f * (amplitude / sobolev_norm(f, 1.0))
    modes = {int(k): complex(c) for k, c in dict(spec).items()}
    if modes.get(0, 0) != 0:
        raise ValueError("forcing must be mean-zero")
    return SpectralField.from_modes(grid, modes)


@dataclass
class AbsorbingReport:
    times: np.ndarray
    norms: np.ndarray               # (members, samples), ||u||_H1 + ||v||_H1
    initial_norms: np.ndarray
    late_bounds: np.ndarray         # sup over [t_end/2, t_end]
    extended_bounds: np.ndarray     # sup over [t_end, 2 t_end]
    settings: dict = field(default_factory=dict)

    @property
    def spread(self) -> float:
        return float(np.max(self.late_bounds) / np.min(self.late_bounds))

    @property
    def horizon_change(self) -> float:
        return float(abs(np.max(self.extended_bounds) - np.max(self.late_bounds)) / np.max(self.late_bounds))

    def to_dict(self) -> dict:
        return {"initial_norms": self.initial_norms.tolist(), "late_bounds": self.late_bounds.tolist(),
                "extended_bounds": self.extended_bounds.tolist(), "spread": self.spread,
                "horizon_change": self.horizon_change, "uniform_bound": float(np.max(self.late_bounds)),
                "settings": self.settings}

    def series(self):
        return self.times, {f"member{i}_H1": row for i, row in enumerate(self.norms)}


def absorbing_set_experiment(alpha="1/2", N: int = 32, t_end: float = 10.0, gamma: float = 1.0,
                             delta: float | None = None, n_members: int = 20,
                             norm_range: tuple[float, float] = (0.1, 10.0), forcing=None, g_forcing=None,
                             forcing_amplitude: float = 0.5, seed: int = 0, dt: float | None = None,
                             s: float = 1.0, sample_interval: float = 0.05, scheme: str = "etdrk4") -> AbsorbingReport:
    """Late-time ``H^1`` bounds of a damped, forced ensemble with log-spaced initial sizes.

    The run goes to ``2 t_end`` so that the bound over ``[t_end/2, t_end]``
    and the one over ``[t_end, 2 t_end]`` come out of one integration.
    """
    delta = gamma if delta is None else delta
    if gamma <= 0 or delta <= 0:
        raise ValueError("absorbing set needs gamma, delta > 0")
    grid = GridSpec(N)
    f = make_forcing(grid, forcing, seed, forcing_amplitude) if forcing_amplitude or forcing else None
    g = (make_forcing(grid, g_forcing, seed + 1, forcing_amplitude)
         if forcing_amplitude or g_forcing else None)
    if dt is None:
        dt = min(1e-3, 0.5 / N)
    params = SimParams(alpha, grid, t_end=2 * t_end, dt=dt, gamma=gamma, delta=delta, f=f, g=g,
                       scheme=scheme)
    targets = np.geomspace(norm_range[0], norm_range[1], n_members)
    U0, V0 = [], []
    for i, target in enumerate(targets):
        u, v = _seed_pair(grid, s, seed * 1000 + i)
        scale = target / (sobolev_norm(u, 1.0) + sobolev_norm(v, 1.0))
        U0.append(u.half * scale)
        V0.append(v.half * scale)
    U0, V0 = np.stack(U0), np.stack(V0)
    n_steps = params.n_steps()
    h = params.t_end / n_steps
    every = max(1, int(round(sample_interval / h)))
    T, Y = [], []

    def cb(i, t, u, v):
        T.append(t)
        Y.append(sobolev_half(u, 1.0) + sobolev_half(v, 1.0))

    integrate(params, U0, V0, n_steps, callback=cb, every=every)
    T = np.array(T)
    Y = np.stack(Y, axis=1)
    late = (T >= t_end / 2 - 1e-12) & (T <= t_end + 1e-12)
    ext = T >= t_end - 1e-12
    return AbsorbingReport(T, Y, Y[:, 0], Y[:, late].max(axis=1), Y[:, ext].max(axis=1),
                           {"alpha": str(alpha), "N": N, "t_end": t_end, "gamma": gamma, "delta": delta,
                            "dt": h, "scheme": scheme, "n_members": n_members, "norm_range": list(norm_range),
                            "forcing_H1": sobolev_norm(f, 1.0) if f is not None else 0.0,
                            "g_forcing_H1": sobolev_norm(g, 1.0) if g is not None else 0.0})


# --- stationary pair -----------------------------------------------------------

@dataclass
class StationaryPair:
    p: SpectralField
    q: SpectralField
    residual: float
    iterations: int
    contraction_margin: dict
    converged: bool
    differences: list[float] = field(default_factory=list)
    iterate_norms: list[float] = field(default_factory=list)

    @property
    def ratios(self) -> np.ndarray:
        d = np.array(self.differences)
        return d[1:] / d[:-1] if d.size > 1 else np.array([])

    def to_dict(self) -> dict:
        return {"residual": self.residual, "iterations": self.iterations, "converged": self.converged,
                "contraction_margin": self.contraction_margin, "differences": self.differences,
                "ratios": self.ratios.tolist(), "iterate_norms": self.iterate_norms,
                "p_H1": sobolev_norm(self.p, 1.0), "q_H1": sobolev_norm(self.q, 1.0),
                "p_H2": sobolev_norm(self.p, 2.0), "q_H2": sobolev_norm(self.q, 2.0)}


def _multipliers(grid: GridSpec, alpha: float, gamma: float, delta: float):
    k3 = np.arange(grid.N + 1, dtype=float) ** 3
    return 1.0 / (gamma - 1j * k3), 1.0 / (delta - 1j * alpha * k3)


def stationary_solve(f: SpectralField, g: SpectralField, gamma: float, delta: float, alpha,
                     tol: float = 1e-13, max_iter: int = 500) -> StationaryPair:
    """Picard iteration ``q <- M2(g - (M1(f - q q_x) q)_x)`` from ``q0 = M2(g)``.

    ``M1 w = w / (gamma - ik^3)`` and ``M2 w = w / (delta - i alpha k^3)``.
    Stops when successive ``H^2`` differences of ``q`` drop below ``tol``
    (relative to ``max(1, ||q||_{H^2})``).  The contraction preconditions
    ``||f||_{H^1}/gamma^{4/3}`` and ``||g||_{H^1}/gamma^{4/3}`` are reported,
    with ``min(gamma, delta)`` in place of ``gamma``; they are not enforced.
    """
    if gamma <= 0 or delta <= 0:
        raise ValueError("stationary solve needs gamma, delta > 0")
    grid = f.grid
    grid.require_dealiased()
    if g.grid != grid:
        raise ValueError("f and g live on different grids")
    for name, w in (("f", f), ("g", g)):
        if abs(w.mean) > 1e-14:
            raise ValueError(f"{name} must be mean-zero")
    a = float(classify_alpha(alpha).alpha_float) if not isinstance(alpha, (float, int)) else float(alpha)
    M1, M2 = _multipliers(grid, a, gamma, delta)
    ik = 1j * np.arange(grid.N + 1)
    M = grid.M
    fh, gh = f.half, g.half

    def p_of(q):
        return M1 * (fh - 0.5 * ik * half_product(q, q, M))

    def T(q):
        return M2 * (gh - ik * half_product(p_of(q), q, M))

    rate = min(gamma, delta)
    C = embedding_constant(grid)
    margin = {"f_H1_over_gamma43": sobolev_norm(f, 1.0) / rate ** (4 / 3),
              "g_H1_over_gamma43": sobolev_norm(g, 1.0) / rate ** (4 / 3),
              "embedding_constant": C}
    q = M2 * gh
    diffs, norms = [], [float(sobolev_half(q, 2.0))]
    converged = False
    it = 0
    if not np.any(gh):
        converged = True
        it = 1
        diffs.append(0.0)
        norms.append(norms[0])
    else:
        for it in range(1, max_iter + 1):
            with np.errstate(over="ignore", invalid="ignore"):
                q_new = T(q)
                d = float(sobolev_half(q_new - q, 2.0))
                n_new = float(sobolev_half(q_new, 2.0))
            diffs.append(d)
            norms.append(n_new)
            if not np.isfinite(n_new) or n_new > DIVERGED * max(1.0, norms[0]):
                break                       # diverged: keep the last finite iterate
            q = q_new
            if d < tol * max(1.0, norms[-1]):
                converged = True
                break
    p = p_of(q)
    for arr in (p, q):
        arr[0] = arr[0].real
    P, Q = SpectralField.from_half(grid, p), SpectralField.from_half(grid, q)
    res = stationary_residual(P, Q, f, g, gamma, delta, alpha)
    return StationaryPair(P, Q, res, it, margin, converged, diffs, norms)


def stationary_residual(p: SpectralField, q: SpectralField, f: SpectralField, g: SpectralField,
                        gamma: float, delta: float, alpha) -> float:
    """Max L^2 residual of ``p''' + gamma p + q q' = f`` and ``alpha q''' + delta q + (pq)' = g``.

    Computed by substitution through physical space: derivatives
    spectrally, products pointwise on the dealiased grid, and the result
    projected back onto the resolved modes.
    """
    a = float(alpha) if isinstance(alpha, (float, int)) else classify_alpha(alpha).alpha_float
    grid = p.grid
    P, Q = to_physical(p), to_physical(q)
    Qx, PQ = to_physical(derivative(q, 1)), P * Q
    r1 = derivative(p, 3) + p * gamma + to_spectral(Q * Qx, grid) - f
    r2 = derivative(q, 3) * a + q * delta + derivative(to_spectral(PQ, grid), 1) - g
    return float(math.sqrt(2 * math.pi) * max(r1.l2(), r2.l2()))


# --- trivial attractor -----------------------------------------------------------

@dataclass
class AttractorReport:
    times: np.ndarray
    distance: np.ndarray        # (members, samples): ||u - p||_H1 + ||v - q||_H1
    E3: np.ndarray              # (members, samples) of (y, z)
    H4: np.ndarray
    stationary_drift: float     # max distance of the run started at (p, q)
    decay_rates: np.ndarray     # fitted -d/dt log E3(y,z) per member
    monotone_from: np.ndarray   # time after which E3(y,z) is non-increasing
    rate_bound: float           # 2 gamma - C ||p||_H2 - C ||q||_H2
    h4_excess: np.ndarray       # max_t [H4(t) - H4(0) e^{-2 gamma t}]
    stationary: StationaryPair | None = None
    settings: dict = field(default_factory=dict)
    tol: float = 1e-6

    @property
    def final_distance(self) -> np.ndarray:
        return self.distance[:, -1]

    @property
    def converged(self) -> bool:
        return bool(np.all(self.final_distance < self.tol))

    def to_dict(self) -> dict:
        return {"final_distance": self.final_distance.tolist(), "converged": self.converged,
                "stationary_drift": self.stationary_drift, "decay_rates": self.decay_rates.tolist(),
                "monotone_from": self.monotone_from.tolist(), "rate_bound": self.rate_bound,
                "h4_excess": self.h4_excess.tolist(), "tolerance": self.tol,
                "stationary": self.stationary.to_dict() if self.stationary else None,
                "settings": self.settings}

    def series(self):
        cols = {}
        for i in range(self.distance.shape[0]):
            cols[f"member{i}_dist_H1"] = self.distance[i]
            cols[f"member{i}_E3"] = self.E3[i]
            cols[f"member{i}_H4"] = self.H4[i]
        return self.times, cols


def modified_energy(y: np.ndarray, z: np.ndarray, p: np.ndarray, q: np.ndarray, alpha: float,
                    M: int) -> np.ndarray:
    """``H4 = int y_x^2 + alpha z_x^2 - y z^2 - 2 q y z - p z^2`` for (batched) half spectra.

    The quadratic products only meet resolved modes in the pairings, so the
    dealiased grid ``M`` is exact for them; the cubic term uses a finer grid.
    """
    N = y.shape[-1] - 1
    w = _half_weights(N + 1)
    k2 = np.arange(N + 1, dtype=float) ** 2
    grad = 2 * np.pi * np.sum(w * k2 * (np.abs(y) ** 2 + alpha * np.abs(z) ** 2), axis=-1)
    qz = half_product(np.broadcast_to(q, z.shape), z, M)
    pz = half_product(np.broadcast_to(p, z.shape), z, M)
    return grad - _cubic_integral(y, z) - 2 * _pairing(qz, y) - _pairing(pz, z)


def _decay_rate(t: np.ndarray, e: np.ndarray, t_start: float, floor: float) -> float:
    sel = (t >= t_start) & (e > floor)
    if np.count_nonzero(sel) < 3:
        return math.nan
    return float(-np.polyfit(t[sel], np.log(e[sel]), 1)[0])


def trivial_attractor_experiment(alpha="1/2", N: int = 64, gamma: float = 5.0, delta: float | None = None,
                                 t_end: float = 5.0, seeds: Sequence[int] = range(5),
                                 forcing_amplitude: float = 0.5, forcing=None, g_forcing=None,
                                 data_norm: float = 1.0, dt: float | None = None,
                                 sample_interval: float = 0.05, transient: float = 0.5,
                                 tol: float = 1e-6, stationary_tol: float = 1e-13, scheme: str = "etdrk4") -> AttractorReport:
    """Convergence of damped, forced trajectories to the stationary pair ``(p, q)``.

    Solves for ``(p, q)``, checks that the flow started there stays put, then
    evolves random ``H^1`` data of size ``data_norm`` and tracks the
    distance, ``E3(y, z)`` and the modified energy ``H4(y, z)``.
    """
    delta = gamma if delta is None else delta
    grid = GridSpec(N)
    f = make_forcing(grid, forcing, 0, forcing_amplitude)
    g = make_forcing(grid, g_forcing, 1, forcing_amplitude)
    pair = stationary_solve(f, g, gamma, delta, alpha, tol=stationary_tol)
    if not pair.converged:
        raise StationaryDivergence(pair)
    if dt is None:
        dt = min(1e-3, 0.5 / N)
    params = SimParams(alpha, grid, t_end=t_end, dt=dt, gamma=gamma, delta=delta, f=f, g=g, scheme=scheme)
    a = params.alpha_value
    n_steps = params.n_steps()
    h = t_end / n_steps
    every = max(1, int(round(sample_interval / h)))
    ph, qh = pair.p.half, pair.q.half
    seeds = tuple(int(sd) for sd in seeds)
    U0, V0 = [ph], [qh]
    for sd in seeds:
        u, v = _seed_pair(grid, 1.0, sd)
        scale = data_norm / (sobolev_norm(u, 1.0) + sobolev_norm(v, 1.0))
        U0.append(u.half * scale)
        V0.append(v.half * scale)
    T, D, E, H = [], [], [], []

    def cb(i, t, u, v):
        y, z = u - ph, v - qh
        T.append(t)
        D.append(sobolev_half(y, 1.0) + sobolev_half(z, 1.0))
        w = _half_weights(N + 1)
        E.append(2 * np.pi * np.sum(w * (np.abs(y) ** 2 + np.abs(z) ** 2), axis=-1))
        H.append(modified_energy(y, z, ph, qh, a, grid.M))

    integrate(params, np.stack(U0), np.stack(V0), n_steps, callback=cb, every=every)
    T = np.array(T)
    D, E, H = (np.stack(x, axis=1) for x in (D, E, H))
    drift = float(np.max(D[0]))
    D, E, H = D[1:], E[1:], H[1:]
    floor = 1e-26 * max(1.0, float(np.max(E[:, 0])))
    rates = np.array([_decay_rate(T, e, transient, floor) for e in E])
    mono = []
    for e in E:
        inc = np.nonzero(np.diff(e) > 1e-14 * e[:-1] + floor)[0]
        mono.append(float(T[inc[-1] + 1]) if inc.size else 0.0)
    C = embedding_constant(grid)
    bound = 2 * min(gamma, delta) - C * sobolev_norm(pair.p, 2.0) - C * sobolev_norm(pair.q, 2.0)
    excess = np.max(H - H[:, :1] * np.exp(-2 * min(gamma, delta) * T), axis=1)
    return AttractorReport(T, D, E, H, drift, rates, np.array(mono), float(bound), excess, pair,
                           {"alpha": str(alpha), "N": N, "gamma": gamma, "delta": delta, "t_end": t_end,
                            "dt": h, "scheme": scheme, "seeds": list(seeds), "forcing_amplitude": forcing_amplitude,
                            "data_norm": data_norm, "embedding_constant": C}, tol)
