"""Resonance algebra for the coupling parameter alpha.

The quadratic resonance functions ``k^3 - alpha k1^3 - alpha (k-k1)^3`` and
``alpha k^3 - k1^3 - alpha (k-k1)^3`` vanish on the lines ``k1 = c_i k`` and
``k1 = d_i k``.  Whether those lines carry integer points is an arithmetic
question about alpha, answered here in exact rational arithmetic.
"""
from __future__ import annotations

import decimal
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

HURWITZ_K = 1 / math.sqrt(5)
RATIONAL_REMAINDER_TOL = 1e-14


class DomainError(ValueError):
    """Coupling parameter outside (0, 1)."""


def parse_alpha(alpha) -> Fraction | float:
    """Exact ``Fraction`` for rationals, strings and decimals; ``float`` stays numeric."""
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, (int, Rational)):
        return Fraction(alpha)
    if isinstance(alpha, decimal.Decimal):
        return Fraction(alpha)
    if isinstance(alpha, str):
        try:
            return Fraction(alpha.strip())
        except ValueError:
            raise DomainError(f"cannot parse alpha={alpha!r}") from None
    return float(alpha)


def _check_domain(alpha):
    if alpha == 1:
        raise DomainError("alpha = 1 is the KdV-like case handled by separate theory; not supported")
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def resonance_roots(alpha) -> tuple[float, float, float, float]:
    """``(c1, c2, d1, d2)`` with ``c1 > 1 > d1 > 0 > c2, d2`` for ``0 < alpha < 1``."""
    a = parse_alpha(alpha)
    _check_domain(a)
    a = float(a)
    r = math.sqrt(-3.0 + 12.0 / a) / 6.0
    c1, c2 = 0.5 + r, 0.5 - r
    return c1, c2, 1.0 / c1, 1.0 / c2


def _rational_sqrt(x: Fraction) -> Fraction | None:
    if x < 0:
        return None
    n, d = x.numerator, x.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def _high_precision_roots(alpha: Fraction, digits: int = 60) -> tuple[Fraction, Fraction]:
    """c1, c2 to ``digits`` decimal places as exact fractions (for CF scans)."""
    with decimal.localcontext() as ctx:
        ctx.prec = digits + 10
        a = decimal.Decimal(alpha.numerator) / decimal.Decimal(alpha.denominator)
        r = (decimal.Decimal(-3) + decimal.Decimal(12) / a).sqrt() / 6
        half = decimal.Decimal(1) / 2
        return Fraction(half + r), Fraction(half - r)


@dataclass(frozen=True)
class AlphaClassification:
    """Coupling parameter with its resonance roots and arithmetic class.

    ``kind`` is ``"special_rational"``, ``"rational_nonspecial"`` or
    ``"irrational_numeric"``.  For special rationals ``p, q`` are the
    witness with ``alpha = q^2 / (3p(p-q) + q^2)`` and the exact roots are
    ``c1 = p/q``, ``c2 = (q-p)/q``, ``d1 = q/p``, ``d2 = q/(q-p)``.
    """

    alpha: Fraction | float
    c1: float
    c2: float
    d1: float
    d2: float
    kind: str
    p: int | None = None
    q: int | None = None
    nu_c_estimates: tuple[float, float] = (math.nan, math.nan)
    nu_d_estimates: tuple[float, float] = (math.nan, math.nan)
    exact_roots: dict = field(default_factory=dict, compare=False, repr=False)
    nearest_special: tuple = field(default=(), compare=False, repr=False)

    @property
    def exact(self) -> bool:
        return isinstance(self.alpha, Fraction)

    @property
    def special(self) -> bool:
        return self.kind == "special_rational"

    @property
    def alpha_float(self) -> float:
        return float(self.alpha)

    @property
    def nu_c_estimate(self) -> float:
        return max(self.nu_c_estimates)

    @property
    def nu_d_estimate(self) -> float:
        return max(self.nu_d_estimates)

    @property
    def alpha_str(self) -> str:
        if self.exact:
            return f"{self.alpha.numerator}/{self.alpha.denominator}"
        return repr(self.alpha)

    def to_dict(self) -> dict:
        def num(x):
            if math.isnan(x):
                return None
            return "inf" if x == math.inf else x

        out = {
            "alpha": self.alpha_str,
            "exact": self.exact,
            "kind": self.kind,
            "c1": self.c1, "c2": self.c2, "d1": self.d1, "d2": self.d2,
            "nu_c_estimates": [num(x) for x in self.nu_c_estimates],
            "nu_d_estimates": [num(x) for x in self.nu_d_estimates],
            "nu_c_estimate": num(self.nu_c_estimate),
            "nu_d_estimate": num(self.nu_d_estimate),
        }
        if self.special:
            out["p"], out["q"] = self.p, self.q
            out["exact_roots"] = {k: f"{v.numerator}/{v.denominator}" for k, v in self.exact_roots.items()}
        if self.nearest_special:
            out["nearest_special"] = [
                {"p": p, "q": q, "alpha": f"{a.numerator}/{a.denominator}", "distance": dist}
                for p, q, a, dist in self.nearest_special
            ]
        return out


def nearest_special_rationals(alpha, c1=None, q_bound: int = 1000, count: int = 3):
    """Special rationals ``q^2/(3p(p-q)+q^2)`` closest to ``alpha`` among CF convergents p/q of c1.

    A special rational is determined by its root ``c1 = p/q``, so good
    rational approximations of ``c1`` give the nearby special values.
    Returns up to ``count`` tuples ``(p, q, alpha_pq, |alpha - alpha_pq|)``.
    """
    if c1 is None:
        c1 = resonance_roots(alpha)[0]
    cf = continued_fraction_expand(c1, depth=64)
    found = {}
    for p, q in cf.convergents:
        if q > q_bound:
            break
        if p > q >= 1:
            a_pq = special_rational(p, q)
            found[(p, q)] = (p, q, a_pq, abs(float(alpha) - float(a_pq)))
    return tuple(sorted(found.values(), key=lambda item: item[3])[:count])


def classify_alpha(alpha, q_max: int = 10**6, estimate_type: bool = True) -> AlphaClassification:
    """Arithmetic class of alpha plus empirical type-index diagnostics.

    Exact inputs (``Fraction``, ``int``, ``"a/b"`` or decimal strings) are
    decided in integer arithmetic: the roots are rational exactly when the
    discriminant ``3 alpha (4 - alpha)`` is a rational square.  A ``float``
    is treated as an irrational numeric value.  ``estimate_type=False``
    skips the continued-fraction scans (estimates are then NaN).
    """
    a = parse_alpha(alpha)
    _check_domain(a)
    c1, c2, d1, d2 = resonance_roots(a)

    nan2 = (math.nan, math.nan)

    if not isinstance(a, Fraction):
        nu_c = nu_d = nan2
        if estimate_type:
            nu_c = (type_index_estimate(c1, q_max), type_index_estimate(c2, q_max))
            nu_d = (type_index_estimate(d1, q_max), type_index_estimate(d2, q_max))
        return AlphaClassification(a, c1, c2, d1, d2, "irrational_numeric",
                                   nu_c_estimates=nu_c, nu_d_estimates=nu_d,
                                   nearest_special=nearest_special_rationals(a, c1))

    root = _rational_sqrt(3 * a * (4 - a))
    if root is None:
        nu_c = nu_d = nan2
        near = ()
        if estimate_type:
            hc1, hc2 = _high_precision_roots(a)
            hd1, hd2 = 1 / hc1, 1 / hc2
            nu_c = (type_index_estimate(hc1, q_max), type_index_estimate(hc2, q_max))
            nu_d = (type_index_estimate(hd1, q_max), type_index_estimate(hd2, q_max))
            near = nearest_special_rationals(a, hc1)
        return AlphaClassification(a, c1, c2, d1, d2, "rational_nonspecial",
                                   nu_c_estimates=nu_c, nu_d_estimates=nu_d, nearest_special=near)

    ec1 = Fraction(1, 2) + root / (6 * a)
    p, q = ec1.numerator, ec1.denominator
    assert p > q >= 1 and a == Fraction(q * q, 3 * p * (p - q) + q * q)
    ec2 = 1 - ec1
    exact = {"c1": ec1, "c2": ec2, "d1": 1 / ec1, "d2": 1 / ec2}
    inf = (math.inf, math.inf)
    return AlphaClassification(a, float(ec1), float(ec2), float(1 / ec1), float(1 / ec2),
                               "special_rational", p=p, q=q,
                               nu_c_estimates=inf, nu_d_estimates=inf, exact_roots=exact)


def special_rational(p: int, q: int) -> Fraction:
    """``q^2 / (3p(p-q) + q^2)`` for integers ``p > q >= 1``."""
    if not p > q >= 1:
        raise ValueError("need integers p > q >= 1")
    return Fraction(q * q, 3 * p * (p - q) + q * q)


# --- continued fractions ---------------------------------------------------

@dataclass(frozen=True)
class ContinuedFraction:
    value: float
    partial_quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]
    terminated: bool


def _exact(rho) -> tuple[Fraction, bool]:
    if isinstance(rho, float):
        return Fraction(rho), False
    return Fraction(rho), True


def continued_fraction_expand(rho, depth: int = 64) -> ContinuedFraction:
    """Partial quotients and convergents of ``rho``.

    Floats are expanded exactly (as the dyadic rational they are) and the
    expansion stops once the fractional remainder drops below 1e-14; exact
    rationals stop when the remainder is exactly zero.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    x, exact = _exact(rho)
    tol = 0 if exact else RATIONAL_REMAINDER_TOL
    quotients = []
    convergents = []
    p_prev, q_prev, p, q = 0, 1, 1, 0
    terminated = False
    for _ in range(depth):
        a = math.floor(x)
        quotients.append(a)
        p_prev, q_prev, p, q = p, q, a * p + p_prev, a * q + q_prev
        convergents.append((p, q))
        frac = x - a
        if frac <= tol or 1 - frac <= tol:
            if frac > tol:
                # remainder just below an integer: round the last quotient up
                quotients[-1] += 1
                p, q = p + p_prev, q + q_prev
                convergents[-1] = (p, q)
            terminated = True
            break
        x = 1 / frac
    return ContinuedFraction(float(rho), tuple(quotients), tuple(convergents), terminated)


def type_index_estimate(rho, q_max: int = 10**6) -> float:
    """Empirical minimal-type-index proxy over convergents with ``q_n <= q_max``.

    For each convergent the smallest ``nu`` with
    ``|rho - p/q| >= K / q^(2+nu)`` is computed with ``K = 1/sqrt(5)`` (the
    Hurwitz constant, so the golden ratio scores ~0); the estimate is the
    maximum over the scanned window, clipped at 0.  It is a lower-bound
    diagnostic, not the true index.  Rationals (expansion terminating inside
    the window) return ``inf``.
    """
    x, _ = _exact(rho)
    nu = 0.0
    # depth bound: q_n grows at least like Fibonacci numbers
    depth = int(math.log(max(q_max, 2)) / math.log((1 + math.sqrt(5)) / 2)) + 4
    cf = continued_fraction_expand(rho, depth=depth)
    last = len(cf.convergents) - 1
    for i, (p, q) in enumerate(cf.convergents):
        if q > q_max:
            break
        if i == last and cf.terminated:
            return math.inf
        if q < 2:
            continue
        err = abs(x - Fraction(p, q))
        if err == 0:
            return math.inf
        val = (math.log(HURWITZ_K) - 2 * math.log(q) - _log_fraction(err)) / math.log(q)
        nu = max(nu, val)
    return nu


def _log_fraction(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


# --- resonant index sets ---------------------------------------------------

@dataclass(frozen=True)
class ResonantMode:
    """Exact resonance at output mode ``k``: ``partners = (k1, k2)`` with ``k1 + k2 = k``."""

    family: str  # "rho1" or "rho2"
    root: str  # "c1", "d1" or "d2"
    k: int
    partners: tuple[int, int]


def resonant_modes(cls: AlphaClassification, K: int) -> list[ResonantMode]:
    """Integer resonances ``0 < |k| <= K`` feeding the resonant operators.

    ``rho1`` entries have partners ``(c1 k, c2 k)``; ``rho2`` entries have
    ``(d_i k, (1 - d_i) k)``.  Empty unless alpha is a special rational.
    ``k = 0`` is omitted: every resonant term carries a factor ``k``.
    """
    if not cls.special:
        return []
    out = []
    for k in range(-K, K + 1):
        if k == 0:
            continue
        for root, family in (("c1", "rho1"), ("d1", "rho2"), ("d2", "rho2")):
            r = cls.exact_roots[root]
            k1 = r * k
            if k1.denominator == 1:
                out.append(ResonantMode(family, root, k, (int(k1), k - int(k1))))
    return out


@dataclass(frozen=True)
class NearResonance:
    k: int
    n: int
    distance: float
    root: str


def near_resonance_scan(cls: AlphaClassification, K: int, eps: float) -> list[NearResonance]:
    """Integer points within ``eps`` of the resonance lines ``n = r k``, ``0 < |k| <= K``.

    For each ``k`` and each root the nearest integer is tested, so with
    ``eps > 1/2`` every such pair is returned.  Distances are exact for
    special rationals.  Sorted by distance.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    out = []
    for root in ("c1", "c2", "d1", "d2"):
        r = cls.exact_roots[root] if cls.special else getattr(cls, root)
        for k in range(-K, K + 1):
            if k == 0:
                continue
            x = r * k
            n = round(x)
            dist = abs(n - x)
            if dist < eps:
                out.append(NearResonance(k, int(n), float(dist), root))
    out.sort(key=lambda e: (e.distance, e.root, e.k))
    return out
