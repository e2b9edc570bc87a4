import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from seabedmatch.core import GeoParams, MaterialType, SeafloorParams, interface_height
from seabedmatch.library import TemplateRecord
from seabedmatch.matcher import MatchConfig, TemplateBank, classify, refine_candidates
from seabedmatch.microlocal import circle_angles, decompose, truncation_order
from seabedmatch.wavelet import dwt_multilevel, from_concatenated, idwt_multilevel

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def signals(draw, min_log=0, max_log=9):
    n = 2 ** draw(st.integers(min_log, max_log))
    return draw(arrays(np.float64, n, elements=finite))


@given(signals(), st.data())
def test_haar_round_trip_and_parseval(x, data):
    lmax = data.draw(st.integers(0, int(math.log2(x.size))))
    c = dwt_multilevel(x, lmax)
    assert np.allclose(idwt_multilevel(c), x, atol=1e-9 * (1 + np.abs(x).max()))
    e_x, e_c = np.sum(x ** 2), np.sum(c.concatenate() ** 2)
    assert abs(e_c - e_x) <= 1e-12 * max(e_x, 1e-300) + 1e-300
    assert np.array_equal(from_concatenated(c.concatenate(), lmax).concatenate(),
                          c.concatenate())


@given(signals(3, 8), st.floats(-5, 5), st.data())
def test_haar_linearity(x, a, data):
    y = data.draw(arrays(np.float64, x.size, elements=finite))
    lhs = dwt_multilevel(a * x + y, 3 if x.size >= 8 else 0).concatenate()
    rhs = a * dwt_multilevel(x, 3 if x.size >= 8 else 0).concatenate() \
        + dwt_multilevel(y, 3 if x.size >= 8 else 0).concatenate()
    assert np.allclose(lhs, rhs, atol=1e-8 * (1 + np.abs(lhs).max()))


@given(st.floats(0, 20), st.floats(0, 1.5), st.floats(0, 40),
       st.floats(0, 0.05), st.floats(-5, 5))
def test_interface_bounded(mg1, mg2, mg3, amp, x):
    g = GeoParams(mg1, mg2, mg3, amplitude=amp)
    assert abs(interface_height(x, g)) <= amp * (1 + mg2) + 1e-15
    assert interface_height(x, g) >= g.min_height() - 1e-15


@given(st.integers(0, 40), st.floats(0.1, 2.0), st.floats(-math.pi, math.pi))
def test_decomposition_rotates_with_the_wave(shift, amp, phase):
    r0 = 3 * math.pi
    n = truncation_order(r0)
    theta = circle_angles(n)
    beta = 2 * math.pi * 3 / n
    base = amp * np.exp(1j * (r0 * np.cos(theta - beta) + phase))
    rotated = amp * np.exp(1j * (r0 * np.cos(theta - beta - 2 * math.pi * shift / n) + phase))
    a = decompose(base).coefficients
    b = decompose(rotated).coefficients
    assert np.allclose(np.roll(a, shift), b, atol=1e-9)


@given(arrays(np.complex128, 41, elements=st.complex_numbers(max_magnitude=10)),
       arrays(np.complex128, 41, elements=st.complex_numbers(max_magnitude=10)),
       st.complex_numbers(max_magnitude=10))
def test_decomposition_is_linear(p, q, a):
    lhs = decompose(a * p + q).coefficients
    rhs = a * decompose(p).coefficients + decompose(q).coefficients
    assert np.allclose(lhs, rhs, atol=1e-6)


def _bank(seed, n=24, length=32):
    rng = np.random.default_rng(seed)
    mats = list(MaterialType)[:3]
    recs = [TemplateRecord(i, SeafloorParams(mats[i % 3], GeoParams(10 + i % 4, 0.5 + 0.5 * (i % 2),
                                                                   25 + i % 5)),
                           0.5, 0.05 * rng.random(length)) for i in range(n)]
    return TemplateBank(recs, 5)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-4, 1.0), st.floats(0.1, 100.0))
def test_candidate_sets_invariant_under_joint_scaling(seed, eps, scale):
    bank = _bank(seed % 7)
    rng = np.random.default_rng(seed)
    y = bank.signals[rng.integers(len(bank))] + rng.normal(0, 0.01, bank.n_samples)
    cfg = MatchConfig(epsilon_tol=eps)
    l1, idx1, g1, *_ = refine_candidates(y, bank, cfg)
    # misfits scale with scale**2, so tolerances scale the same way
    recs = [TemplateRecord(r.id, r.params, r.alpha, r.backscatter * scale) for r in bank.records]
    bank2 = TemplateBank(recs, 5)
    cfg2 = MatchConfig(epsilon_tol=eps * scale ** 2, delta_penalty=cfg.delta_penalty * scale ** 2)
    l2, idx2, g2, *_ = refine_candidates(y * scale, bank2, cfg2)
    assert l1 == l2 and np.array_equal(idx1, idx2)
    assert np.allclose(g2, g1 * scale ** 2, rtol=1e-9, atol=1e-15)
    r1 = classify(np.tile(y, 2), bank, cfg)
    r2 = classify(np.tile(y, 2) * scale, bank2, cfg2)
    assert [m.template_id for m in r1.matches] == [m.template_id for m in r2.matches]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-3, 10.0))
def test_nesting_and_cost(seed, eps):
    bank = _bank(seed % 5)
    rng = np.random.default_rng(seed)
    y = bank.signals[rng.integers(len(bank))] + rng.normal(0, 0.02, bank.n_samples)
    l_star, idx, g, counts, evals, sets = refine_candidates(y, bank, MatchConfig(epsilon_tol=eps),
                                                            keep_sets=True)
    levels = sorted(sets, reverse=True)
    for hi, lo in zip(levels, levels[1:]):
        assert set(sets[lo]) <= set(sets[hi])
        assert counts[lo] <= counts[hi]
    for level, n in evals.items():
        assert n <= counts[level + 1]
    assert len(idx) >= 1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_classify_deterministic(seed):
    bank = _bank(seed % 3)
    rng = np.random.default_rng(seed)
    y = rng.random(bank.n_samples * 3) * 0.05
    a, b = classify(y, bank), classify(y, bank)
    assert [m.template_id for m in a.matches] == [m.template_id for m in b.matches]
    assert np.array_equal(a.prediction, b.prediction)
