import math

import pytest

import sparselab as sl


def test_dyadic_axioms():
    b = sl.dyadic_basis(6)
    r = sl.verify_axioms(b)
    assert r["all_pass"]
    assert r["effective_c0"] == 2.0
    assert b.atoms == 64


def test_rect2d_fails_b4():
    r = sl.verify_axioms(sl.rect2d_candidate(4))
    assert not r["b4"]
    assert r["witness_balls"]


def test_step_weight():
    b = sl.dyadic_basis(3)
    w = [1, 1, 1, 1, 4, 4, 4, 4]
    assert sl.ap_constant(b, w, 2) == pytest.approx(25 / 16)
    assert sl.ap_constant(b, w, 1) == pytest.approx(2.5)
    exp_log, _ = sl.ainf_constants(sl.dyadic_basis(2), [1, 1, 4, 4])
    assert exp_log == pytest.approx(1.25)


def test_maximal_and_weak_norm():
    b = sl.dyadic_basis(4)
    f = [0.0] * 16
    f[0] = 1.0
    m = sl.maximal(b, f)
    assert m[0] == pytest.approx(1.0)
    assert m[15] == pytest.approx(1 / 16)
    assert sl.weak_norm([1.0, 0.5], 1.0, [0.5, 0.5]) == pytest.approx(0.5)


def test_variation():
    assert sl.variation_norm([0, 1, 0], 2) == pytest.approx(math.sqrt(2))


def test_rubio_de_francia_constant():
    b = sl.dyadic_basis(8)
    r = sl.rubio_de_francia(b, [1.0] * 256, 2.0)
    assert r["pass"]
    assert r["rh"][0] == pytest.approx(1 / (1 - 1 / (2 * math.sqrt(2))), rel=1e-10)


def test_global_average_domination():
    b = sl.dyadic_basis(6)
    r = sl.dominate("global_average", b, [[1.0] * 64])
    assert not r["aborted"]
    assert r["pointwise_constant"] <= 1 + 1e-12
    assert r["s1_ok"] and r["s2_ok"]


def test_apply_hilbert_is_finite():
    b = sl.dyadic_basis(6)
    f = sl.corpus_function(b, "mixed", 3, 0)
    h = sl.apply("hilbert", b, [f])
    assert len(h) == 64
    assert all(math.isfinite(v) for v in h)


def test_fit():
    t = [1, 2, 3, 4, 5]
    p = [math.exp(-((0.4 * x) ** 0.9)) for x in t]
    g, beta, r2 = sl.fit_stretched_exponential(t, p)
    assert beta == pytest.approx(0.9)
    assert g == pytest.approx(0.4)
