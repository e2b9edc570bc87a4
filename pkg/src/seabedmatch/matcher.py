"""
Greedy left-to-right inversion by multilevel wavelet matching.

For each segment the candidate set starts as the whole library and is
filtered level by level, coarse to fine, keeping templates whose level-l
misfit is below ``epsilon_tol * 2^-l``. The last non-empty set is kept and
the final choice minimizes the misfit at that level plus a penalty on the
geometry jump from the previous segment's choice.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import GeoParams, MaterialType, SeafloorParams
from .library import LibraryIndex, TemplateRecord, query
from .wavelet import DEFAULT_LMAX, WaveletCoeffs, dwt_multilevel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MatchConfig:
    """Tolerance schedule and penalty weight."""

    epsilon_tol: float = 2.0 ** -8
    delta_penalty: float = 0.02
    lmax: int = DEFAULT_LMAX

    def __post_init__(self) -> None:
        if not self.epsilon_tol > 0:
            raise ValueError("epsilon_tol must be positive")
        if not self.delta_penalty >= 0:
            raise ValueError("delta_penalty must be non-negative")
        if self.lmax < 1:
            raise ValueError("lmax must be at least 1")

    def threshold(self, level: int) -> float:
        return self.epsilon_tol * 2.0 ** (-level)


def level_vectors(c: WaveletCoeffs, level: int) -> tuple[np.ndarray, np.ndarray]:
    """``(w^level, v^level)``; works on batched coefficients."""
    return c.approximation(level), c.detail(level)


def misfit(level: int, a: WaveletCoeffs, b: WaveletCoeffs) -> np.ndarray | float:
    """Squared distance of the level-``level`` approximation and detail vectors.

    ``b`` may be batched (leading axes); the result then has one value per
    template.
    """
    if a.lmax != b.lmax:
        raise ValueError("coefficients use different numbers of levels")
    if not 1 <= level <= a.lmax:
        raise ValueError(f"level must lie in [1, {a.lmax}]")
    wa, va = level_vectors(a, level)
    wb, vb = level_vectors(b, level)
    out = np.sum((wb - wa) ** 2, axis=-1) + np.sum((vb - va) ** 2, axis=-1)
    return out if np.ndim(out) else float(out)


class TemplateBank:
    """Library templates with their per-level wavelet vectors precomputed.

    Parameters
    ----------
    records : sequence of TemplateRecord
        Templates, all of the same length.
    lmax : int
        Number of Haar levels.
    """

    def __init__(self, records: Sequence[TemplateRecord], lmax: int = DEFAULT_LMAX):
        if not records:
            raise ValueError("empty library")
        self.records = tuple(sorted(records, key=lambda r: r.id))
        self.lmax = lmax
        self.ids = np.array([r.id for r in self.records])
        self.signals = np.vstack([r.backscatter for r in self.records])
        self.geometry = np.array([r.geometry.as_array() for r in self.records])
        coeffs = dwt_multilevel(self.signals, lmax)
        self.levels = {l: level_vectors(coeffs, l) for l in range(1, lmax + 1)}

    @classmethod
    def from_library(cls, lib: LibraryIndex, angle: Optional[float] = None,
                     lmax: int = DEFAULT_LMAX) -> "TemplateBank":
        return cls(query(lib, angle=angle) if angle is not None else lib.records, lmax)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n_samples(self) -> int:
        return self.signals.shape[1]

    def misfits(self, level: int, target: WaveletCoeffs, idx: np.ndarray) -> np.ndarray:
        w, v = level_vectors(target, level)
        W, V = self.levels[level]
        return np.sum((W[idx] - w) ** 2, axis=1) + np.sum((V[idx] - v) ** 2, axis=1)


@dataclass(frozen=True)
class SegmentMatch:
    """Outcome for one segment.

    ``candidate_counts[l]`` is the size of the candidate set surviving level
    ``l`` (``lmax + 1`` maps to the full library); ``evaluations[l]`` counts
    misfit evaluations performed at level ``l``.
    """

    segment_index: int
    chosen: SeafloorParams
    template_id: int
    l_star: int
    final_misfit: float
    candidate_counts: dict = field(default_factory=dict)
    evaluations: dict = field(default_factory=dict)
    candidate_ids: dict = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"segment": self.segment_index, "template_id": self.template_id,
                "params": self.chosen.to_dict(), "l_star": self.l_star,
                "misfit": self.final_misfit,
                "candidate_counts": {str(k): v for k, v in sorted(self.candidate_counts.items())}}


@dataclass(frozen=True)
class ClassificationResult:
    matches: tuple[SegmentMatch, ...]
    prediction: np.ndarray

    @property
    def material_map(self) -> list[MaterialType]:
        return [m.chosen.material for m in self.matches]

    @property
    def geometry(self) -> np.ndarray:
        return np.array([m.chosen.geometry.as_array() for m in self.matches])

    def to_dict(self) -> dict:
        return {"segments": [m.to_dict() for m in self.matches],
                "materials": [m.value for m in self.material_map],
                "prediction": self.prediction.tolist()}


def refine_candidates(signal, bank: TemplateBank, cfg: MatchConfig, keep_sets: bool = False):
    """Nested candidate filtering.

    Returns ``(l_star, idx, misfits, counts, evaluations, sets)`` where ``idx``
    indexes ``bank.records``, ``misfits`` holds the level-``l_star`` misfits
    of those candidates (level ``lmax`` for the fallback ``l_star = lmax+1``)
    and ``sets`` maps each level to its candidate ids when ``keep_sets``.
    """
    if cfg.lmax != bank.lmax:
        raise ValueError("bank and configuration use different lmax")
    x = np.asarray(signal, dtype=float)
    if x.shape != (bank.n_samples,):
        raise ValueError(f"segment has {x.size} samples, templates have {bank.n_samples}")
    target = dwt_multilevel(x, cfg.lmax)
    idx = np.arange(len(bank))
    counts = {cfg.lmax + 1: len(idx)}
    evaluations = {}
    sets = {cfg.lmax + 1: bank.ids.copy()} if keep_sets else {}
    current = None
    l_star = cfg.lmax + 1
    for level in range(cfg.lmax, 0, -1):
        g = bank.misfits(level, target, idx)
        evaluations[level] = len(idx)
        keep = g < cfg.threshold(level)
        if not keep.any():
            if current is None:
                # nothing passes the coarsest filter: whole library, ranked
                # by the level-lmax misfit
                current = g
            break
        idx, current = idx[keep], g[keep]
        l_star = level
        counts[level] = len(idx)
        if keep_sets:
            sets[level] = bank.ids[idx]
    return l_star, idx, current, counts, evaluations, sets


def select_with_penalty(bank: TemplateBank, idx: np.ndarray, misfits: np.ndarray,
                        prev: Optional[GeoParams], cfg: MatchConfig) -> int:
    """Index into ``bank`` of the penalized argmin; ties go to the smallest id."""
    if len(idx) == 0:
        raise ValueError("no candidates")
    cost = np.asarray(misfits, float)
    if prev is not None and cfg.delta_penalty > 0:
        jump = np.linalg.norm(bank.geometry[idx] - prev.as_array(), axis=1)
        cost = cost + cfg.delta_penalty * jump
    best = cost.min()
    ties = idx[cost == best]
    return int(ties[np.argmin(bank.ids[ties])])


def classify(signal, lib: LibraryIndex | TemplateBank, cfg: MatchConfig = MatchConfig(),
             samples_per_segment: Optional[int] = None, angle: Optional[float] = None,
             keep_sets: bool = False) -> ClassificationResult:
    """Estimate the parameters of every segment of a measured signal.

    Parameters
    ----------
    signal : array_like or BackscatterSignal
        Concatenated backscatter of ``N`` segments.
    lib : LibraryIndex or TemplateBank
        Templates; a library is restricted to the grid angle nearest
        ``angle`` (default: the signal's angle, else the library's angles).
    """
    values = np.asarray(getattr(signal, "values", signal), dtype=float)
    if angle is None:
        angle = getattr(signal, "alpha", None)
    if isinstance(lib, TemplateBank):
        bank = lib
    else:
        bank = TemplateBank.from_library(lib, angle, cfg.lmax)
    n = samples_per_segment or bank.n_samples
    if n != bank.n_samples:
        raise ValueError("segment length differs from the template length")
    if values.ndim != 1 or values.size == 0 or values.size % n:
        raise ValueError(f"signal length {values.size} is not a multiple of {n}")
    matches = []
    prev = None
    for i in range(values.size // n):
        seg = values[i * n:(i + 1) * n]
        l_star, idx, g, counts, evals, sets = refine_candidates(seg, bank, cfg, keep_sets)
        j = select_with_penalty(bank, idx, g, prev, cfg)
        rec = bank.records[j]
        pos = int(np.flatnonzero(idx == j)[0])
        matches.append(SegmentMatch(i, rec.params, rec.id, l_star, float(g[pos]),
                                    counts, evals, sets))
        prev = rec.geometry
    prediction = np.concatenate([bank.signals[np.searchsorted(bank.ids, m.template_id)]
                                 for m in matches])
    return ClassificationResult(tuple(matches), prediction)
