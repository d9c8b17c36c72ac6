import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbtorus.diophantine import (DomainError, classify_alpha, continued_fraction_expand,
                                 near_resonance_scan, parse_alpha, resonance_roots,
                                 resonant_modes, special_rational, type_index_estimate)

GOLDEN = (1 + math.sqrt(5)) / 2


def liouville(n_terms=4) -> Fraction:
    return sum(Fraction(1, 10 ** math.factorial(n)) for n in range(1, n_terms + 1))


def brute_special_set(p_max=500):
    return {Fraction(q * q, 3 * p * (p - q) + q * q) for p in range(2, p_max + 1) for q in range(1, p)}


def test_parse_alpha_keeps_rationals_exact():
    assert parse_alpha("1/7") == Fraction(1, 7)
    assert parse_alpha(" 0.25 ") == Fraction(1, 4)
    assert isinstance(parse_alpha(0.25), float)
    with pytest.raises(DomainError):
        parse_alpha("one seventh")


@pytest.mark.parametrize("bad", [0, 1, "1", 1.5, -0.2, "4/3"])
def test_domain(bad):
    with pytest.raises(DomainError):
        resonance_roots(bad)
    with pytest.raises(DomainError):
        classify_alpha(bad)


def test_roots_one_seventh_and_one_half():
    c1, c2, d1, d2 = resonance_roots("1/7")
    assert (c1, c2, d1, d2) == pytest.approx((2, -1, 0.5, -1), abs=1e-14)
    c1, c2, _, _ = resonance_roots("1/2")
    assert c1 == pytest.approx(0.5 + math.sqrt(21) / 6, abs=1e-15)
    assert c1 == pytest.approx(1.26376, abs=1e-5)
    assert c2 == pytest.approx(-0.26376, abs=1e-5)
    # alpha -> 1 limit: sqrt(9)/6 = 1/2
    c1, c2, _, _ = resonance_roots(1 - 1e-12)
    assert (c1, c2) == pytest.approx((1.0, 0.0), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1 - 1e-3))
def test_root_identities(a):
    c1, c2, d1, d2 = resonance_roots(a)
    for c in (c1, c2):
        assert abs(3 * a * c * c - 3 * a * c + a - 1) < 1e-12 * max(1.0, 3 * a * c * c)
    for d in (d1, d2):
        assert abs((1 - a) * d * d + 3 * a * d - 3 * a) < 1e-12 * max(1.0, abs(3 * a * d), (1 - a) * d * d)
    assert c1 + c2 == pytest.approx(1.0, abs=1e-12)
    assert c1 * c2 == pytest.approx((a - 1) / (3 * a), rel=1e-12)
    assert d1 * c1 == pytest.approx(1.0, abs=1e-12) and d2 * c2 == pytest.approx(1.0, abs=1e-12)
    assert c1 > 1 > d1 > 0 > c2 and d2 < 0


def test_classification_examples():
    cls = classify_alpha("1/7")
    assert cls.kind == "special_rational" and (cls.p, cls.q) == (2, 1)
    assert cls.exact_roots == {"c1": 2, "c2": -1, "d1": Fraction(1, 2), "d2": -1}
    assert cls.nu_c_estimate == math.inf
    assert classify_alpha("1/3").kind == "rational_nonspecial"
    assert classify_alpha("2/3").kind == "rational_nonspecial"
    assert classify_alpha(0.5).kind == "irrational_numeric"
    d = classify_alpha("1/7").to_dict()
    assert d["alpha"] == "1/7" and d["exact_roots"]["d1"] == "1/2"


def test_no_special_rational_has_power_of_three_denominator():
    for k in range(1, 6):
        for ell in range(1, 3 ** k):
            if math.gcd(ell, 3) == 1:
                assert not classify_alpha(Fraction(ell, 3 ** k), estimate_type=False).special


def test_classification_agrees_with_brute_force():
    specials = brute_special_set(500)
    n_special = 0
    for b in range(2, 201):
        for a in range(1, b):
            if math.gcd(a, b) != 1:
                continue
            alpha = Fraction(a, b)
            cls = classify_alpha(alpha, estimate_type=False)
            assert cls.special == (alpha in specials), alpha
            if cls.special:
                n_special += 1
                assert special_rational(cls.p, cls.q) == alpha
                for key in ("c1", "c2"):
                    c = cls.exact_roots[key]
                    assert 3 * alpha * c * c - 3 * alpha * c + alpha - 1 == 0
                for key in ("d1", "d2"):
                    d = cls.exact_roots[key]
                    assert (1 - alpha) * d * d + 3 * alpha * d - 3 * alpha == 0
    assert n_special > 10


def test_continued_fractions():
    cf = continued_fraction_expand(GOLDEN, depth=30)
    assert set(cf.partial_quotients) == {1}
    cf = continued_fraction_expand(Fraction(1, 7))
    assert cf.partial_quotients == (0, 7) and cf.terminated
    cf = continued_fraction_expand(math.sqrt(2), depth=15)
    assert cf.partial_quotients == (1,) + (2,) * 14
    qs = [q for _, q in cf.convergents]
    assert all(b > a for a, b in zip(qs[1:], qs[2:]))
    for (p, q), (_, q_next) in zip(cf.convergents, cf.convergents[1:]):
        assert abs(math.sqrt(2) - p / q) < 1 / (q * q_next)
    with pytest.raises(ValueError):
        continued_fraction_expand(1.5, depth=0)


def test_type_index_estimates():
    assert type_index_estimate(GOLDEN, 10 ** 6) < 0.05
    assert type_index_estimate(liouville(4), 10 ** 30) > 1
    assert type_index_estimate(Fraction(1, 7)) == math.inf
    assert type_index_estimate(1 / 7) == math.inf
    windows = [10, 100, 10 ** 3, 10 ** 4, 10 ** 6]
    for rho in (math.sqrt(2), math.pi, GOLDEN, liouville(3)):
        vals = [type_index_estimate(rho, q) for q in windows]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_resonant_modes_one_seventh():
    cls = classify_alpha("1/7")
    modes = resonant_modes(cls, 5)
    rho1 = [m for m in modes if m.family == "rho1"]
    assert sorted(m.k for m in rho1) == [k for k in range(-5, 6) if k]
    assert all(m.partners == (2 * m.k, -m.k) for m in rho1)
    d1 = [m for m in modes if m.root == "d1"]
    assert sorted(m.k for m in d1) == [-4, -2, 2, 4]
    assert all(m.partners == (m.k // 2, m.k // 2) for m in d1)
    assert resonant_modes(classify_alpha(0.3), 5) == []
    assert resonant_modes(classify_alpha("1/2"), 50) == []


def test_near_resonance_scan():
    cls = classify_alpha("1/7")
    hits = near_resonance_scan(cls, 10, 1e-9)
    assert hits and all(h.distance == 0 for h in hits)
    half = classify_alpha("1/2")
    hits = near_resonance_scan(half, 50, 0.05)
    assert hits
    roots = dict(zip(("c1", "c2", "d1", "d2"), resonance_roots("1/2")))
    for h in hits:
        assert abs(h.n - roots[h.root] * h.k) < 0.05
        assert h.distance == pytest.approx(abs(h.n - roots[h.root] * h.k), abs=1e-12)
    # exhaustive oracle: every (k, n) within eps of any line
    oracle = {(root, k, n) for root, r in roots.items() for k in range(-50, 51) if k
              for n in range(-250, 251) if abs(n - r * k) < 0.05}
    assert {(h.root, h.k, h.n) for h in hits} == oracle
    assert [h.distance for h in hits] == sorted(h.distance for h in hits)
    assert len(near_resonance_scan(half, 7, 0.6)) == 4 * 14
    with pytest.raises(ValueError):
        near_resonance_scan(half, 5, 0.0)


def test_nearest_special_for_numeric_input():
    cls = classify_alpha(0.1430)
    p, q, a_pq, dist = cls.nearest_special[0]
    assert (p, q, a_pq) == (2, 1, Fraction(1, 7))
    assert dist == pytest.approx(abs(0.143 - 1 / 7))
