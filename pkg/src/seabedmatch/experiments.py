"""
Synthetic seabeds, noisy data and Monte Carlo evaluation.

Models are written in segment units: ``u`` runs over ``[0, n_segments)`` and
the physical position is ``x = u * segment_width``. On 1 m segments this is
the usual metre coordinate; at desk scale the same model shrinks with the
segments while the ripple frequencies stay in cycles per metre, matching the
library.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (DEFAULT_OBJECT_DEPTH, RIPPLE_AMPLITUDE, DomainSpec, ExperimentParams,
                   GeoParams, MaterialType, SeafloorParams, measurement_grid)
from .library import LibraryIndex
from .matcher import ClassificationResult, MatchConfig, TemplateBank, classify
from .microlocal import DEFAULT_EPSILON, DEFAULT_R0, BackscatterSignal, backscatter_profile
from .solver import _MATERIAL_CODES, MediumMap, SolveSpec, solve_medium

logger = logging.getLogger(__name__)

_M = MaterialType
OBJECT_WIDTHS = (4.0, 2.0, 1.0, 0.5, 0.0)


class Fidelity(str, Enum):
    SEGMENTED = "segmented"
    FULL_DOMAIN = "full_domain"


@dataclass(frozen=True)
class BuriedObject:
    """Metal block under ``[start, stop] x [-sediment_depth, -depth]`` (segment units)."""

    start: float
    stop: float
    depth: float = DEFAULT_OBJECT_DEPTH

    def __post_init__(self) -> None:
        if not self.stop > self.start:
            raise ValueError("object interval is empty")
        if not self.depth > 0:
            raise ValueError("object depth must be positive")

    @property
    def width(self) -> float:
        return self.stop - self.start


@dataclass(frozen=True)
class SeabedModel:
    """Ground-truth seabed.

    Parameters
    ----------
    n_segments : int
        Width in segments.
    blocks : tuple of (start, stop, material)
        Material intervals in segment units covering ``[0, n_segments)``.
    geometry : callable
        ``u -> (mg1, mg2, mg3)`` arrays for an array of positions ``u``.
    piecewise_constant : bool
        True when ``geometry`` is constant on every segment; windows with the
        same content then share one solve.
    """

    n_segments: int
    blocks: tuple[tuple[float, float, MaterialType], ...]
    geometry: Callable = field(compare=False)
    piecewise_constant: bool = False
    obj: Optional[BuriedObject] = None
    amplitude: float = RIPPLE_AMPLITUDE
    name: str = "custom"

    def __post_init__(self) -> None:
        if self.n_segments < 1:
            raise ValueError("a model needs at least one segment")
        blocks = tuple(sorted((float(a), float(b), MaterialType.parse(m))
                              for a, b, m in self.blocks))
        edge = 0.0
        for a, b, m in blocks:
            if abs(a - edge) > 1e-12 or not b > a:
                raise ValueError("material blocks must tile the model without gaps")
            if m is _M.METAL:
                raise ValueError("metal enters a model only as a buried object")
            edge = b
        if abs(edge - self.n_segments) > 1e-12:
            raise ValueError("material blocks must end at the model width")
        object.__setattr__(self, "blocks", blocks)

    # -- pointwise description --------------------------------------------
    def material_at(self, u) -> np.ndarray:
        """Base material (ignoring the object) at positions ``u``."""
        u = np.clip(np.asarray(u, float), 0.0, np.nextafter(self.n_segments, 0))
        out = np.empty(u.shape, dtype=object)
        for a, b, m in self.blocks:
            out[(u >= a) & (u < b)] = m
        return out

    def geometry_at(self, u) -> np.ndarray:
        """``(..., 3)`` array of ripple parameters at positions ``u``."""
        u = np.clip(np.asarray(u, float), 0.0, self.n_segments)
        mg1, mg2, mg3 = self.geometry(u)
        return np.stack(np.broadcast_arrays(mg1, mg2, mg3), axis=-1).astype(float)

    def with_object(self, width: float, stop: Optional[float] = None,
                    depth: float = DEFAULT_OBJECT_DEPTH) -> "SeabedModel":
        """Copy with a buried block of ``width`` segments ending at ``stop``.

        ``stop`` defaults to the model's own object position (14 for Model A,
        4 for Model B). A zero width removes the object.
        """
        if width < 0:
            raise ValueError("object width must be non-negative")
        if width == 0:
            return replace(self, obj=None)
        if stop is None:
            stop = _OBJECT_STOPS.get(self.name)
            if stop is None:
                raise ValueError("this model has no default object position")
        if stop - width < 0 or stop > self.n_segments:
            raise ValueError("object does not fit inside the model")
        return replace(self, obj=BuriedObject(stop - width, stop, depth))

    # -- per-segment truth --------------------------------------------------
    def segment_params(self, i: int) -> SeafloorParams:
        """Truth of segment ``i``: metal if the object overlaps it, geometry at its midpoint."""
        g = GeoParams(*self.geometry_at(i + 0.5), amplitude=self.amplitude)
        if self.object_overlaps(i):
            return SeafloorParams.metal(g, self.obj.depth)
        return SeafloorParams(self.material_at(i + 0.5).item(), g)

    def object_overlaps(self, i: int) -> bool:
        o = self.obj
        return o is not None and o.start < i + 1 and o.stop > i

    def truth(self) -> list[SeafloorParams]:
        return [self.segment_params(i) for i in range(self.n_segments)]

    def transitions(self) -> list[tuple[int, MaterialType, MaterialType]]:
        """Material junctions ``(i, left, right)`` at ``u = i`` between base materials."""
        out = []
        for i in range(1, self.n_segments):
            a = self.material_at(i - 0.5).item()
            b = self.material_at(i + 0.5).item()
            if a is not b:
                out.append((i, a, b))
        return out

    def object_segments(self) -> list[int]:
        return [i for i in range(self.n_segments) if self.object_overlaps(i)]

    # -- medium ---------------------------------------------------------------
    def medium(self, exp: ExperimentParams, d: DomainSpec, offset: float = 0.0) -> MediumMap:
        """Medium seen by a solve whose local ``x`` maps to model ``x + offset``.

        Outside the model the material and geometry of the nearest edge
        continue.
        """
        ds = d.segment_width
        amp = self.amplitude
        codes = {m: _MATERIAL_CODES[m] for m in MaterialType}
        obj = self.obj

        def interface(x):
            x = np.asarray(x, float) + offset
            g = self.geometry_at(x / ds)
            xi = np.mod(x, ds) if d.segment_local_ripples else x
            return amp * (np.sin(2 * np.pi * g[..., 0] * xi)
                          + g[..., 1] * np.sin(2 * np.pi * g[..., 2] * xi))

        def material(x, y):
            x = np.asarray(x, float) + offset
            u = x / ds
            out = np.vectorize(codes.__getitem__, otypes=[int])(self.material_at(u)) \
                if np.size(u) else np.zeros(np.shape(u), int)
            if obj is not None:
                inside = (u >= obj.start) & (u < obj.stop) & (np.asarray(y) < -obj.depth)
                out = np.where(inside, codes[_M.METAL], out)
            return out

        return MediumMap(interface, material, exp, description=f"{self.name}@{offset:g}")

    def window_key(self, shift: float, width: int, d: DomainSpec):
        """Hashable content of the window ``[shift, shift + width)``; None if not cacheable.

        Equal keys mean identical media: geometry is constant per segment,
        ripples restart in every segment and both windows start at the same
        fraction of a segment.
        """
        if not (self.piecewise_constant and d.segment_local_ripples):
            return None
        parts = []
        for j in range(math.floor(shift), math.ceil(shift + width)):
            jc = min(max(j, 0), self.n_segments - 1)
            g = tuple(np.round(self.geometry_at(jc + 0.5), 12))
            m = self.material_at(jc + 0.5).item().value
            o = None
            if self.obj is not None:
                lo = max(self.obj.start, j) - j
                hi = min(self.obj.stop, j + 1) - j
                if hi > lo:
                    o = (round(lo, 12), round(hi, 12), self.obj.depth)
            parts.append((m, g, o))
        return tuple(parts), round(shift % 1.0, 12)


_OBJECT_STOPS = {"A": 14.0, "B": 4.0}


def model_a(n_segments: int = 20) -> SeabedModel:
    """Constant ripples (15, 1, 26); rock on [2, 5), clay on [5, 8), sand elsewhere."""
    if n_segments != 20:
        raise ValueError("Model A is defined on 20 segments")

    def geometry(u):
        return 15.0, 1.0, 26.0

    return SeabedModel(20, ((0, 2, _M.SAND), (2, 5, _M.ROCK), (5, 8, _M.CLAY),
                            (8, 20, _M.SAND)), geometry, piecewise_constant=True, name="A")


def model_b_geometry(u):
    u = np.asarray(u, float)
    mid = (u >= 5) & (u < 10)
    far = u >= 10
    mg1 = 14.0 + (0.2 * u - 1.0) * mid + 1.0 * far
    mg2 = 1.0 + (0.5 - 0.05 * u) * far
    mg3 = 25.0 + u / 20.0
    return mg1, mg2, mg3


def model_b(n_segments: int = 20) -> SeabedModel:
    """Smoothly varying ripples; sand on [0, 5), rock on [5, 13), clay on [13, 20)."""
    if n_segments != 20:
        raise ValueError("Model B is defined on 20 segments")
    return SeabedModel(20, ((0, 5, _M.SAND), (5, 13, _M.ROCK), (13, 20, _M.CLAY)),
                       model_b_geometry, piecewise_constant=False, name="B")


def clay_rock_model(block: int = 4, n_blocks: int = 5,
                    geometry: tuple[float, float, float] = (15.0, 1.0, 26.0)) -> SeabedModel:
    """Alternating clay and rock blocks, starting with clay."""
    mats = [_M.CLAY if k % 2 == 0 else _M.ROCK for k in range(n_blocks)]
    blocks = tuple((k * block, (k + 1) * block, m) for k, m in enumerate(mats))
    g = tuple(float(v) for v in geometry)
    return SeabedModel(block * n_blocks, blocks, lambda u: g, piecewise_constant=True,
                       name="clay-rock")


def uniform_model(material: MaterialType | str, n_segments: int,
                  geometry: tuple[float, float, float] = (15.0, 1.0, 26.0),
                  amplitude: float = RIPPLE_AMPLITUDE) -> SeabedModel:
    g = tuple(float(v) for v in geometry)
    return SeabedModel(n_segments, ((0, n_segments, MaterialType.parse(material)),),
                       lambda u: g, piecewise_constant=True, amplitude=amplitude,
                       name=f"uniform-{MaterialType.parse(material).value}")


MODELS = {"a": model_a, "b": model_b, "clay-rock": clay_rock_model}


# ---------------------------------------------------------------------------
# simulation

def simulate_seabed(model: SeabedModel, exp: ExperimentParams, d: DomainSpec,
                    s: SolveSpec = SolveSpec(), fidelity: Fidelity | str = Fidelity.SEGMENTED,
                    r0: float = DEFAULT_R0, epsilon_reg: float = DEFAULT_EPSILON
                    ) -> BackscatterSignal:
    """Noiseless backscatter over the whole model.

    ``SEGMENTED`` solves one enlarged periodic window per segment, centered on
    it and filled with the surrounding model, and keeps the centre segment.
    ``FULL_DOMAIN`` solves the whole model at once with Floquet walls.
    """
    fidelity = Fidelity(fidelity)
    n = model.n_segments
    ds = d.segment_width
    base = measurement_grid(d, 1)
    x_all = measurement_grid(d, n)
    meta = {"fidelity": fidelity.value, "model": model.name, "n_segments": n,
            "object": None if model.obj is None else [model.obj.start, model.obj.stop]}
    if fidelity is Fidelity.FULL_DOMAIN:
        f = solve_medium(model.medium(exp, d), n * ds, exp, d, s)
        b = backscatter_profile(f, exp, d, r0, epsilon_reg, x_coords=x_all)
        return BackscatterSignal(b.values, x_all, exp.incident_angle, ds, meta)

    factor = s.domain_width_factor
    centre = 0.5 * (factor - 1)  # window offset of the kept segment, in segments
    cache: dict = {}
    values = np.empty(n * d.samples_per_segment)
    n_solves = 0
    for i in range(n):
        shift = i - centre
        key = model.window_key(shift, factor, d)
        seg = cache.get(key) if key is not None else None
        if seg is None:
            f = solve_medium(model.medium(exp, d, offset=shift * ds), factor * ds, exp, d, s)
            n_solves += 1
            seg = backscatter_profile(f, exp, d, r0, epsilon_reg,
                                      x_coords=base + centre * ds).values
            if key is not None:
                cache[key] = seg
        values[i * d.samples_per_segment:(i + 1) * d.samples_per_segment] = seg
    meta["solves"] = n_solves
    return BackscatterSignal(values, x_all, exp.incident_angle, ds, meta)


def add_noise(signal: BackscatterSignal, level: float, rng_seed=None) -> BackscatterSignal:
    """Add white Gaussian noise with standard deviation ``level * RMS(signal)``."""
    if level < 0:
        raise ValueError("noise level must be non-negative")
    v = signal.values
    if level == 0:
        return signal.with_values(v.copy(), noise=0.0)
    rng = np.random.default_rng(rng_seed)
    rms = float(np.sqrt(np.mean(v ** 2)))
    return signal.with_values(v + rng.normal(0.0, level * rms, v.shape), noise=float(level))


# ---------------------------------------------------------------------------
# metrics

def geometry_errors(truth: Sequence[SeafloorParams],
                    estimate: Sequence[SeafloorParams]) -> dict[str, float]:
    """``E_i = |m_i - est_i| / (sqrt(N) |m_i|)`` for the three ripple parameters."""
    if len(truth) != len(estimate):
        raise ValueError("truth and estimate differ in length")
    t = np.array([p.geometry.as_array() for p in truth])
    e = np.array([p.geometry.as_array() for p in estimate])
    n = len(truth)
    out = {}
    for k in range(3):
        norm = np.linalg.norm(t[:, k])
        err = np.linalg.norm(t[:, k] - e[:, k])
        out[f"E{k + 1}"] = float(err / (math.sqrt(n) * norm)) if norm > 0 else float(err)
    return out


@dataclass(frozen=True)
class TrialResult:
    """Labels and geometry estimated in one noisy realization."""

    object_width: float
    seed: int
    materials: tuple[str, ...]
    geometry: tuple[tuple[float, float, float], ...]
    l_star: tuple[int, ...]
    template_ids: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {"object_width": self.object_width, "seed": self.seed,
                "materials": list(self.materials),
                "geometry": [list(g) for g in self.geometry], "l_star": list(self.l_star),
                "template_ids": list(self.template_ids)}

    @classmethod
    def from_dict(cls, data: dict) -> "TrialResult":
        return cls(float(data["object_width"]), int(data["seed"]), tuple(data["materials"]),
                   tuple(tuple(float(v) for v in g) for g in data["geometry"]),
                   tuple(int(v) for v in data["l_star"]),
                   tuple(int(v) for v in data.get("template_ids", ())))

    def params(self) -> list[SeafloorParams]:
        out = []
        for m, g in zip(self.materials, self.geometry):
            geo = GeoParams(*g)
            out.append(SeafloorParams.metal(geo) if m == _M.METAL.value
                       else SeafloorParams(m, geo))
        return out


@dataclass(frozen=True)
class TrialReport:
    """Monte Carlo summary.

    ``false_alarm_rates`` maps a junction type such as ``"clay-rock"`` to the
    fraction of (junction, trial) pairs where a segment next to the junction
    without an object was labeled metal; ``"interior"`` covers object-free
    segments away from any junction, per segment. ``detection_rates`` maps an
    object width to the fraction of trials in which some segment overlapping
    the object was labeled metal. ``geometry_errors`` averages ``E1..E3``
    over all trials.
    """

    false_alarm_rates: dict
    detection_rates: dict
    geometry_errors: dict
    material_accuracy: dict
    n_trials: int
    seed: int
    noise: float
    model: str
    trials: tuple[TrialResult, ...] = field(default=(), repr=False)
    truth: dict = field(default_factory=dict, repr=False)
    signals: dict = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"model": self.model, "n_trials": self.n_trials, "seed": self.seed,
                "noise": self.noise,
                "false_alarm_rates": dict(sorted(self.false_alarm_rates.items())),
                "detection_rates": {_wkey(w): r for w, r in sorted(self.detection_rates.items())},
                "material_accuracy": {_wkey(w): r
                                      for w, r in sorted(self.material_accuracy.items())},
                "geometry_errors": self.geometry_errors,
                "truth": {_wkey(w): [p.to_dict() for p in t]
                          for w, t in sorted(self.truth.items())},
                "trials": [t.to_dict() for t in self.trials],
                "signals": {_wkey(w): np.asarray(getattr(v, "values", v), float).tolist()
                            for w, v in sorted(self.signals.items())}}

    @classmethod
    def from_dict(cls, data: dict) -> "TrialReport":
        return cls({k: float(v) for k, v in data["false_alarm_rates"].items()},
                   {float(k): float(v) for k, v in data["detection_rates"].items()},
                   {k: float(v) for k, v in data["geometry_errors"].items()},
                   {float(k): float(v) for k, v in data["material_accuracy"].items()},
                   int(data["n_trials"]), int(data["seed"]), float(data["noise"]),
                   data["model"], tuple(TrialResult.from_dict(t) for t in data["trials"]),
                   {float(k): [SeafloorParams.from_dict(p) for p in v]
                    for k, v in data.get("truth", {}).items()},
                   {float(k): np.asarray(v, float) for k, v in data.get("signals", {}).items()})


def _wkey(w: float) -> str:
    return repr(float(w))


def summarize(trials: Sequence[TrialResult], truths: dict, models: dict, *, seed: int,
              noise: float, model_name: str, n_trials: int) -> TrialReport:
    """Rates and errors from per-trial labels; a pure function of its inputs."""
    metal = _M.METAL.value
    fa_hits: dict[str, int] = {}
    fa_total: dict[str, int] = {}
    det_hits: dict[float, int] = {}
    det_total: dict[float, int] = {}
    acc_hits: dict[float, int] = {}
    acc_total: dict[float, int] = {}
    errs = {"E1": [], "E2": [], "E3": []}
    for tr in trials:
        w = tr.object_width
        model = models[w]
        truth = truths[w]
        labels = tr.materials
        obj_segs = set(model.object_segments())
        near = set()
        for i, a, b in model.transitions():
            key = f"{a.value}-{b.value}"
            sides = [j for j in (i - 1, i) if j not in obj_segs]
            near.update((i - 1, i))
            if not sides:
                continue
            fa_total[key] = fa_total.get(key, 0) + 1
            fa_hits[key] = fa_hits.get(key, 0) + any(labels[j] == metal for j in sides)
        for j in range(model.n_segments):
            if j in near or j in obj_segs:
                continue
            fa_total["interior"] = fa_total.get("interior", 0) + 1
            fa_hits["interior"] = fa_hits.get("interior", 0) + (labels[j] == metal)
        if obj_segs:
            det_total[w] = det_total.get(w, 0) + 1
            det_hits[w] = det_hits.get(w, 0) + any(labels[j] == metal for j in obj_segs)
        acc_total[w] = acc_total.get(w, 0) + len(labels)
        acc_hits[w] = acc_hits.get(w, 0) + sum(
            labels[j] == truth[j].material.value for j in range(len(labels)))
        for k, v in geometry_errors(truth, tr.params()).items():
            errs[k].append(v)
    return TrialReport(
        {k: fa_hits[k] / fa_total[k] for k in fa_total},
        {w: det_hits[w] / det_total[w] for w in det_total},
        {k: float(np.mean(v)) if v else 0.0 for k, v in errs.items()},
        {w: acc_hits[w] / acc_total[w] for w in acc_total},
        n_trials, seed, noise, model_name, tuple(trials), dict(truths))


def trial_seeds(master_seed: int, n: int) -> list[int]:
    """Independent per-trial seeds derived from one master seed."""
    children = np.random.SeedSequence(master_seed).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint64)[0] >> 1) for c in children]


def evaluate(trials: int, model: SeabedModel, widths: Sequence[float],
             lib: LibraryIndex | TemplateBank, cfg: MatchConfig = MatchConfig(),
             rng_seed: int = 0, *, exp: Optional[ExperimentParams] = None,
             d: Optional[DomainSpec] = None, s: Optional[SolveSpec] = None,
             noise: float = 0.05, fidelity: Fidelity | str = Fidelity.SEGMENTED,
             signals: Optional[dict] = None) -> TrialReport:
    """Classify ``trials`` noisy realizations for every object width.

    The noiseless signal of each width is simulated once (or taken from
    ``signals``) and every trial adds fresh noise. Acquisition and domain
    settings default to the library's own.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if isinstance(lib, LibraryIndex):
        exp = exp or lib.experiment
        d = d or lib.domain
        s = s or lib.solve
        bank = TemplateBank.from_library(lib, exp.incident_angle, cfg.lmax)
    else:
        if exp is None or d is None:
            raise ValueError("a bare template bank needs explicit settings")
        bank = lib
        s = s or SolveSpec()
    widths = [float(w) for w in widths] or [0.0]
    signals = dict(signals or {})
    models, truths = {}, {}
    for w in widths:
        m = model.with_object(w) if w > 0 else model.with_object(0)
        models[w] = m
        truths[w] = m.truth()
        if w not in signals:
            logger.info("simulating %s with object width %g", model.name, w)
            signals[w] = simulate_seabed(m, exp, d, s, fidelity)
    seeds = trial_seeds(rng_seed, trials * len(widths))
    results = []
    k = 0
    for w in widths:
        for _ in range(trials):
            noisy = add_noise(signals[w], noise, seeds[k])
            res = classify(noisy, bank, cfg)
            results.append(_trial_result(w, seeds[k], res))
            k += 1
    report = summarize(results, truths, models, seed=rng_seed, noise=noise,
                       model_name=model.name, n_trials=trials)
    return replace(report, signals=signals)


def _trial_result(w: float, seed: int, res: ClassificationResult) -> TrialResult:
    return TrialResult(w, seed, tuple(m.value for m in res.material_map),
                       tuple(tuple(float(v) for v in m.chosen.geometry.as_array())
                             for m in res.matches),
                       tuple(m.l_star for m in res.matches),
                       tuple(m.template_id for m in res.matches))


def recompute(report: TrialReport, model: SeabedModel) -> TrialReport:
    """Rebuild the summary of ``report`` from its stored per-trial labels."""
    widths = sorted({t.object_width for t in report.trials})
    models = {w: model.with_object(w) for w in widths}
    truths = {w: models[w].truth() for w in widths}
    return summarize(report.trials, truths, models, seed=report.seed, noise=report.noise,
                     model_name=report.model, n_trials=report.n_trials)
