"""Acceptance criteria, one test each.

Every test prints a single ``ACCEPT <n> PASS|FAIL`` line with the measured
values, then asserts. Run with ``pytest -s tests/test_acceptance.py`` to see
the lines inline; ``pytest -v`` shows them in the captured output of
failures.
"""

import json
import math
import time

import numpy as np
import pytest

from seabedmatch.core import (DomainSpec, ExperimentParams, GeoParams, SeafloorParams,
                              measurement_grid)
from seabedmatch.experiments import (Fidelity, add_noise, clay_rock_model, evaluate, model_a,
                                     simulate_seabed)
from seabedmatch.matcher import MatchConfig, TemplateBank, classify, refine_candidates
from seabedmatch.microlocal import (DEFAULT_R0, BackscatterSignal, backscatter_at,
                                    circle_angles, decompose, directional_profile,
                                    truncation_order)
from seabedmatch.solver import SolveSpec, solve_template
from seabedmatch.wavelet import dwt_multilevel, idwt_multilevel

from oracles import rayleigh

pytestmark = pytest.mark.slow

FLAT_DOMAIN = DomainSpec(segment_width=0.25, sediment_depth=3.0, water_height=0.5,
                         samples_per_segment=64, receiver_line_height=0.2)
# one step of the reference grid along mg1 and mg3: (15 - 10) / 19 and (30 - 25) / 19
GRID_STEP = 5.0 / 19.0


def report(n, ok, **measured):
    vals = ", ".join(f"{k}={v}" for k, v in measured.items())
    print(f"\nACCEPT {n} {'PASS' if ok else 'FAIL'}: {vals}")
    return ok


def _cached_signal(model, desk, signal_cache, fidelity=Fidelity.SEGMENTED):
    exp, d, s = desk
    key = {"model": model.name, "obj": None if model.obj is None else
           [model.obj.start, model.obj.stop, model.obj.depth],
           "exp": exp, "d": d, "s": s, "fidelity": Fidelity(fidelity).value, "v": 1}
    values = signal_cache.get(key, lambda: simulate_seabed(model, exp, d, s, fidelity).values)
    return BackscatterSignal(values, measurement_grid(d, model.n_segments), exp.incident_angle,
                             d.segment_width)


def test_1_flat_interface_rayleigh():
    rows, ok = [], True
    for alpha in (math.pi / 2, math.pi / 12, math.pi / 6, math.pi / 4, math.pi / 3):
        exp = ExperimentParams(incident_angle=alpha)
        s = SolveSpec(points_per_wavelength_water=10.0, domain_width_factor=1)
        t0 = time.perf_counter()
        f = solve_template(SeafloorParams("sand", GeoParams.flat()), exp, FLAT_DOMAIN, s)
        dt = time.perf_counter() - t0
        v = directional_profile(f, exp, FLAT_DOMAIN, alpha).values.mean()
        r = rayleigh(exp, "sand")
        err = abs(v - r) / r
        ok &= err < 0.05 and dt < 60.0
        rows.append(f"{alpha:.4f}:|R|={v:.4f}/ref={r:.4f}/err={err:.3%}/t={dt:.1f}s")
    assert report(1, ok, cases=" ".join(rows))


def _plane_waves(rng, n, r0=DEFAULT_R0):
    n_dirs = truncation_order(r0)
    theta = circle_angles(n_dirs)
    beta = rng.uniform(0, 2 * math.pi, n)
    amp = rng.uniform(0.1, 2.0, n)
    phase = rng.uniform(-math.pi, math.pi, n)
    samples = amp[:, None] * np.exp(1j * (r0 * np.cos(theta[None, :] - beta[:, None])
                                          + phase[:, None]))
    return beta, amp, samples


def test_2_random_plane_waves():
    # directions are drawn off the angular grid; a ray between two grid angles
    # spreads over a sinc-like sidelobe pattern, not over two bins
    rng = np.random.default_rng(2024)
    beta, amp, samples = _plane_waves(rng, 50)
    t0 = time.perf_counter()
    dec = decompose(samples)
    est = np.array([abs(backscatter_at(type(dec)(dec.angles, dec.coefficients[i]), beta[i]))
                    for i in range(50)])
    dt = time.perf_counter() - t0
    a2 = dec.amplitudes ** 2
    top2 = np.sort(a2, axis=1)[:, -2:].sum(axis=1) / a2.sum(axis=1)
    amp_err = np.abs(est - amp) / amp
    mass_ok = np.mean(top2 >= 0.9)
    amp_ok = np.mean(amp_err <= 0.05)
    ok = mass_ok == 1.0 and amp_ok == 1.0 and dt < 1.0
    assert report(2, ok, frac_mass_ge_90=f"{mass_ok:.2f}", min_top2_mass=f"{top2.min():.3f}",
                  frac_amp_within_5pct=f"{amp_ok:.2f}", max_amp_err=f"{amp_err.max():.3f}",
                  time=f"{dt * 1e3:.1f}ms")


def test_2b_on_grid_plane_waves():
    # the same check for waves arriving along grid directions
    rng = np.random.default_rng(7)
    n_dirs = truncation_order(DEFAULT_R0)
    idx = rng.integers(0, n_dirs, 50)
    beta = 2 * math.pi * idx / n_dirs
    amp = rng.uniform(0.1, 2.0, 50)
    theta = circle_angles(n_dirs)
    samples = amp[:, None] * np.exp(1j * DEFAULT_R0 * np.cos(theta[None, :] - beta[:, None]))
    t0 = time.perf_counter()
    dec = decompose(samples)
    dt = time.perf_counter() - t0
    a2 = dec.amplitudes ** 2
    top2 = np.sort(a2, axis=1)[:, -2:].sum(axis=1) / a2.sum(axis=1)
    est = dec.amplitudes[np.arange(50), idx]
    amp_err = np.abs(est - amp) / amp
    ok = bool(np.all(top2 >= 0.9) and np.all(amp_err <= 0.05) and dt < 1.0)
    assert report("2b", ok, min_top2_mass=f"{top2.min():.3f}",
                  max_amp_err=f"{amp_err.max():.4f}", time=f"{dt * 1e3:.1f}ms")


def test_3_wavelet():
    x = np.random.default_rng(3).normal(size=(1000, 512))
    c = dwt_multilevel(x, 5)
    e_x = np.sum(x ** 2, axis=1)
    parseval = np.max(np.abs(np.sum(c.concatenate() ** 2, axis=1) - e_x) / e_x)
    round_trip = np.max(np.abs(idwt_multilevel(c) - x))
    hand = dwt_multilevel([1.0, 2.0, 3.0, 4.0], 2).concatenate()
    hand_ok = np.allclose(hand, [5.0, -2.0, -1 / math.sqrt(2), -1 / math.sqrt(2)], atol=1e-15)
    ok = parseval <= 1e-12 and round_trip <= 1e-12 and hand_ok
    assert report(3, ok, parseval_rel=f"{parseval:.2e}", round_trip=f"{round_trip:.2e}",
                  hand_example=hand_ok)


def test_4_noiseless_template_recovery(desk_library):
    bank = TemplateBank.from_library(desk_library, math.pi / 6, 5)
    rng = np.random.default_rng(4)
    pick = rng.choice(len(bank), 20, replace=False)
    signal = np.concatenate([bank.signals[i] for i in pick])
    cfg = MatchConfig()
    t0 = time.perf_counter()
    res = classify(signal, bank, cfg, keep_sets=True)
    dt = time.perf_counter() - t0
    got = [m.template_id for m in res.matches]
    want = [bank.ids[i] for i in pick]
    # each periodic solve stores its two middle segments, so every template has a
    # twin with the same parameters that differs only by solver rounding; the
    # tie goes to the smaller id, hence recovery is judged on parameters
    params_exact = [m.chosen for m in res.matches] == [bank.records[i].params for i in pick]
    dev = np.abs(res.prediction - signal).max() / np.abs(signal).max()
    nested = True
    for i in pick:
        *_, sets = refine_candidates(bank.signals[i], bank, cfg, keep_sets=True)
        levels = sorted(sets, reverse=True)
        nested &= all(set(sets[lo]) <= set(sets[hi]) for hi, lo in zip(levels, levels[1:]))
    ok = params_exact and dev < 1e-9 and nested and dt < 10.0
    assert report(4, ok, params_exact=params_exact, prediction_rel_dev=f"{dev:.1e}",
                  same_ids=f"{sum(a == b for a, b in zip(got, want))}/20", nested=nested,
                  time=f"{dt:.2f}s")


def test_5_model_a_detection(desk_library, desk, signal_cache):
    model = model_a()
    signals = {w: _cached_signal(model.with_object(w), desk, signal_cache)
               for w in (0.0, 0.5, 2.0)}
    rep = evaluate(20, model, [0.0, 0.5, 2.0], desk_library, rng_seed=5, noise=0.05,
                   signals=signals)
    acc = rep.material_accuracy
    det = rep.detection_rates
    ok = acc[0.0] >= 0.9 and det[2.0] >= 0.8 and det[0.5] < det[2.0]
    assert report(5, ok, accuracy={k: round(v, 3) for k, v in acc.items()},
                  detection={k: round(v, 3) for k, v in det.items()})


def test_6_enriched_library_lowers_false_alarms(desk_library, desk, signal_cache):
    model = clay_rock_model()
    sig = {0.0: _cached_signal(model, desk, signal_cache)}
    truth = [p.material.value for p in model.truth()]
    rates, junction = {}, {}
    for name, lib in (("pure", desk_library.pure()), ("enriched", desk_library)):
        rep = evaluate(20, model, [0.0], lib, rng_seed=6, noise=0.05, signals=sig)
        # share of (trial, segment) pairs over the object-free seabed labeled metal
        rates[name] = float(np.mean([[m == "metal" for m in t.materials]
                                     for t in rep.trials]))
        junction[name] = {k: round(v, 3) for k, v in rep.false_alarm_rates.items()}
    assert "metal" not in truth
    ok = rates["enriched"] < rates["pure"]
    assert report(6, ok, pure=f"{rates['pure']:.3f}", enriched=f"{rates['enriched']:.3f}",
                  per_junction_pure=junction["pure"], per_junction_enriched=junction["enriched"])


def test_7_noiseless_geometry(desk_library, desk, signal_cache):
    model = model_a()
    sig = {0.0: _cached_signal(model, desk, signal_cache)}
    rep = evaluate(1, model, [0.0], desk_library, noise=0.0, signals=sig)
    mg2 = sorted({g[1] for g in rep.trials[0].geometry})
    truth = np.array([p.geometry.as_array() for p in model.truth()])
    est = np.array(rep.trials[0].geometry)
    worst = np.abs(est - truth).max(axis=0)
    e = rep.geometry_errors
    ok = set(mg2) <= {0.5, 1.0} and e["E1"] <= GRID_STEP and e["E3"] <= GRID_STEP
    assert report(7, ok, mg2_values=mg2, E1=f"{e['E1']:.4f}", E3=f"{e['E3']:.4f}",
                  step=f"{GRID_STEP:.4f}", max_abs_dmg1=worst[0], max_abs_dmg3=worst[2])


def test_8_determinism(desk_library, small_desk):
    exp, d, s = small_desk
    model = clay_rock_model(block=2, n_blocks=2)
    a = simulate_seabed(model, exp, d, s)
    b = simulate_seabed(model, exp, d, s)
    same_signal = a.values.tobytes() == b.values.tobytes()
    noisy = [add_noise(a, 0.05, 11).values.tobytes() for _ in range(2)]
    bank = TemplateBank.from_library(desk_library, exp.incident_angle, 5)
    d512 = desk_library.domain
    sig = BackscatterSignal(bank.signals[:4].ravel(), measurement_grid(d512, 4),
                            exp.incident_angle, d512.segment_width)
    payloads = [json.dumps(evaluate(3, model, [0.0], desk_library,
                                    rng_seed=8, signals={0.0: sig}).to_dict(),
                           sort_keys=True).encode() for _ in range(2)]
    ok = same_signal and noisy[0] == noisy[1] and payloads[0] == payloads[1]
    assert report(8, ok, simulate=same_signal, noise=noisy[0] == noisy[1],
                  evaluate=payloads[0] == payloads[1])
