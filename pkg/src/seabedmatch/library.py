"""
Template library: backscatter vectors over a grid of seafloor parameters.

Every periodic solve contributes the two middle segments of its enlarged
domain as separate records. Transition solves place two materials side by
side and contribute the segment on each side of the junction, labeled with
that side's material.

Container format
----------------
``MAGIC`` (8 bytes), header length (uint64 LE), UTF-8 JSON header, then the
payload: all backscatter vectors as little-endian float64, in record order.
The header holds the grid, acquisition and discretization settings, build
metadata, a record table with payload offsets, and the SHA-256 of the
payload.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .core import (ALPHA_MAX, ALPHA_MIN, DEFAULT_OBJECT_DEPTH, RIPPLE_AMPLITUDE, DomainSpec,
                   ExperimentParams, GeoParams, MaterialType, SeafloorParams,
                   measurement_grid)
from .microlocal import DEFAULT_EPSILON, DEFAULT_R0, backscatter_profile
from .solver import BoundaryKind, SolveSpec, solve_template, solve_transition

logger = logging.getLogger(__name__)

MAGIC = b"SBMLIB01"
FORMAT_VERSION = 1
DEFAULT_CAP = 10.0


class LibraryError(ValueError):
    """Malformed, corrupt or incompatible library file."""


class Provenance(str, Enum):
    PURE = "pure"
    TRANSITION = "transition"


@dataclass(frozen=True, eq=False)
class TemplateRecord:
    """One template.

    ``left``/``right``/``side`` are set for transition records only; ``side``
    says which segment of the junction the record was cut from. ``task``
    names the solve that produced the record.
    """

    id: int
    params: SeafloorParams
    alpha: float
    backscatter: np.ndarray = field(repr=False)
    provenance: Provenance = Provenance.PURE
    left: Optional[MaterialType] = None
    right: Optional[MaterialType] = None
    side: Optional[str] = None
    task: str = field(default="", compare=False)

    @property
    def material(self) -> MaterialType:
        return self.params.material

    @property
    def geometry(self) -> GeoParams:
        return self.params.geometry

    def header(self) -> dict:
        out = {"id": self.id, "params": self.params.to_dict(), "alpha": self.alpha,
               "provenance": self.provenance.value}
        if self.provenance is Provenance.TRANSITION:
            out.update(left=self.left.value, right=self.right.value, side=self.side)
        return out


def _linspace(lo: float, hi: float, n: int) -> tuple[float, ...]:
    if n < 1:
        raise ValueError("grid counts must be positive")
    if n == 1:
        return (float(lo),)
    return tuple(float(v) for v in np.linspace(lo, hi, n))


@dataclass(frozen=True)
class ParamGrid:
    """Explicit grid values for every parameter.

    Use ``from_ranges`` for evenly spaced axes; ``table2`` gives the published
    resolution and ``desk`` a small grid for quick experiments.
    """

    alphas: tuple[float, ...]
    mg1: tuple[float, ...]
    mg2: tuple[float, ...]
    mg3: tuple[float, ...]
    materials: tuple[MaterialType, ...] = tuple(MaterialType)
    transitions: tuple[tuple[MaterialType, MaterialType], ...] = ()
    object_depth: float = DEFAULT_OBJECT_DEPTH
    amplitude: float = RIPPLE_AMPLITUDE

    def __post_init__(self) -> None:
        for name in ("alphas", "mg1", "mg2", "mg3"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} is empty")
            object.__setattr__(self, name, vals)
        for a in self.alphas:
            if not 0 < a <= math.pi / 2:
                raise ValueError("grid angles must lie in (0, pi/2]")
        object.__setattr__(self, "materials",
                           tuple(MaterialType.parse(m) for m in self.materials))
        object.__setattr__(self, "transitions",
                           tuple((MaterialType.parse(a), MaterialType.parse(b))
                                 for a, b in self.transitions))
        for a, b in self.transitions:
            if a is b:
                raise ValueError("a transition needs two different materials")

    @classmethod
    def from_ranges(cls, alpha=(ALPHA_MIN, ALPHA_MAX, 30), mg1=(10.0, 15.0, 20),
                    mg2=(0.5, 1.0, 2), mg3=(25.0, 30.0, 20), **kw) -> "ParamGrid":
        return cls(_linspace(*alpha), _linspace(*mg1), _linspace(*mg2), _linspace(*mg3), **kw)

    @classmethod
    def table2(cls, **kw) -> "ParamGrid":
        kw.setdefault("transitions", DEFAULT_TRANSITIONS)
        return cls.from_ranges(**kw)

    @classmethod
    def desk(cls, **kw) -> "ParamGrid":
        kw.setdefault("transitions", DESK_TRANSITIONS)
        return cls.from_ranges(alpha=(math.pi / 6, math.pi / 6, 1), mg1=(10.0, 15.0, 3),
                               mg2=(0.5, 1.0, 2), mg3=(25.0, 30.0, 6), **kw)

    def geometries(self) -> list[GeoParams]:
        return [GeoParams(a, b, c, amplitude=self.amplitude)
                for a, b, c in itertools.product(self.mg1, self.mg2, self.mg3)]

    def seafloor(self, material: MaterialType, g: GeoParams) -> SeafloorParams:
        if material is MaterialType.METAL:
            return SeafloorParams.metal(g, self.object_depth)
        return SeafloorParams(material, g)

    def spacing(self) -> dict[str, float]:
        """Step of each evenly spaced axis (0 for single-valued axes)."""
        out = {}
        for name in ("alphas", "mg1", "mg2", "mg3"):
            v = np.asarray(getattr(self, name))
            out[name] = float(np.min(np.diff(v))) if v.size > 1 else 0.0
        return out

    def to_dict(self) -> dict:
        return {"alphas": list(self.alphas), "mg1": list(self.mg1), "mg2": list(self.mg2),
                "mg3": list(self.mg3), "materials": [m.value for m in self.materials],
                "transitions": [[a.value, b.value] for a, b in self.transitions],
                "object_depth": self.object_depth, "amplitude": self.amplitude}

    @classmethod
    def from_dict(cls, data: dict) -> "ParamGrid":
        return cls(tuple(data["alphas"]), tuple(data["mg1"]), tuple(data["mg2"]),
                   tuple(data["mg3"]), tuple(data["materials"]),
                   tuple(tuple(t) for t in data.get("transitions", ())),
                   data.get("object_depth", DEFAULT_OBJECT_DEPTH),
                   data.get("amplitude", RIPPLE_AMPLITUDE))


_M = MaterialType
DEFAULT_TRANSITIONS = ((_M.SAND, _M.CLAY), (_M.CLAY, _M.SAND), (_M.CLAY, _M.ROCK),
                       (_M.SAND, _M.METAL))
# the models also contain sand-rock and rock-clay junctions
DESK_TRANSITIONS = DEFAULT_TRANSITIONS + ((_M.SAND, _M.ROCK), (_M.ROCK, _M.CLAY))


@dataclass(frozen=True)
class LibraryIndex:
    """Immutable collection of templates plus the settings that made them."""

    records: tuple[TemplateRecord, ...]
    grid: ParamGrid
    experiment: ExperimentParams
    domain: DomainSpec
    solve: SolveSpec
    metadata: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def samples_per_segment(self) -> int:
        return self.domain.samples_per_segment

    def matrix(self, records: Optional[Sequence[TemplateRecord]] = None) -> np.ndarray:
        recs = self.records if records is None else records
        if not recs:
            return np.zeros((0, self.samples_per_segment))
        return np.vstack([r.backscatter for r in recs])

    def by_id(self, rid: int) -> TemplateRecord:
        rec = self._ids().get(rid)
        if rec is None:
            raise KeyError(rid)
        return rec

    def _ids(self) -> dict:
        cache = self.metadata.get("_id_cache")
        if cache is None or len(cache) != len(self.records):
            cache = {r.id: r for r in self.records}
            self.metadata["_id_cache"] = cache
        return cache

    def subset(self, keep: Callable[[TemplateRecord], bool]) -> "LibraryIndex":
        return LibraryIndex(tuple(r for r in self.records if keep(r)), self.grid,
                            self.experiment, self.domain, self.solve,
                            {k: v for k, v in self.metadata.items() if not k.startswith("_")})

    def pure(self) -> "LibraryIndex":
        """The library without transition records."""
        return self.subset(lambda r: r.provenance is Provenance.PURE)


def snap_angle(angles: Iterable[float], alpha: float) -> Optional[float]:
    """Nearest grid angle; the smaller-index angle wins ties."""
    best, best_d = None, math.inf
    for a in angles:
        dist = abs(a - alpha)
        if dist < best_d - 1e-12:
            best, best_d = a, dist
    return best


def query(index: LibraryIndex, material: Optional[MaterialType | str] = None,
          angle: Optional[float] = None) -> list[TemplateRecord]:
    """Records at the grid angle nearest ``angle``, ordered by id."""
    recs = list(index.records)
    if not recs:
        return []
    if angle is not None:
        present = sorted({r.alpha for r in recs})
        grid_angles = [a for a in index.grid.alphas if a in present] or present
        target = snap_angle(grid_angles, angle)
        recs = [r for r in recs if r.alpha == target]
    if material is not None:
        m = MaterialType.parse(material)
        recs = [r for r in recs if r.material is m]
    return sorted(recs, key=lambda r: r.id)


# ---------------------------------------------------------------------------
# build

@dataclass(frozen=True)
class _Task:
    key: str
    alpha: float
    left: SeafloorParams
    right: Optional[SeafloorParams] = None


def plan_tasks(grid: ParamGrid) -> list[_Task]:
    """Solves needed for a grid, in a fixed order that defines record ids."""
    tasks = []
    for ia, alpha in enumerate(grid.alphas):
        for ig, g in enumerate(grid.geometries()):
            for m in grid.materials:
                tasks.append(_Task(f"p/{ia}/{ig}/{m.value}", alpha, grid.seafloor(m, g)))
            for a, b in grid.transitions:
                tasks.append(_Task(f"t/{ia}/{ig}/{a.value}-{b.value}", alpha,
                                   grid.seafloor(a, g), grid.seafloor(b, g)))
    return tasks


def _run_task(task: _Task, exp: ExperimentParams, d: DomainSpec, s: SolveSpec,
              r0: float, epsilon_reg: float) -> list[tuple]:
    exp_a = exp.with_angle(task.alpha)
    ds = d.segment_width
    base = measurement_grid(d, 1)
    if task.right is None:
        f = solve_template(task.left, exp_a, d, s)
        out = []
        for seg in (1, 2):
            b = backscatter_profile(f, exp_a, d, r0, epsilon_reg, x_coords=base + seg * ds)
            out.append((task.left, None, b.values))
        return out
    f = solve_transition(task.left, task.right, exp_a, d, s)
    junction = 0.5 * f.width
    left = backscatter_profile(f, exp_a, d, r0, epsilon_reg, x_coords=base + junction - ds)
    right = backscatter_profile(f, exp_a, d, r0, epsilon_reg, x_coords=base + junction)
    return [(task.left, "left", left.values), (task.right, "right", right.values)]


def _worker(args):
    task, exp, d, s, r0, eps = args
    return task.key, _run_task(task, exp, d, s, r0, eps)


def default_jobs() -> int:
    env = os.environ.get("SEABEDMATCH_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer SEABEDMATCH_JOBS=%r", env)
    return 1


def build_library(grid: ParamGrid, exp: ExperimentParams, d: DomainSpec,
                  s: SolveSpec = SolveSpec(), *, path: Optional[str | Path] = None,
                  resume: bool = False, jobs: Optional[int] = None,
                  r0: float = DEFAULT_R0, epsilon_reg: float = DEFAULT_EPSILON,
                  cap: float = DEFAULT_CAP, checkpoint_every: int = 16,
                  progress: Optional[Callable[[int, int], None]] = None) -> LibraryIndex:
    """Solve every grid point and collect the templates.

    Parameters
    ----------
    path : path-like, optional
        When given, the library is written there, with periodic atomic
        checkpoints so an interrupted build can continue with ``resume``.
    resume : bool
        Reuse the solves already present in ``path``. The stored settings
        must match the requested ones.
    jobs : int, optional
        Worker processes; defaults to ``SEABEDMATCH_JOBS`` or 1.
    cap : float
        Largest admissible backscatter value, in units of the source
        strength; larger values point to a solver or PML failure.
    """
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    tasks = plan_tasks(grid)
    meta = {"version": __version__, "r0": r0, "epsilon_reg": epsilon_reg, "cap": cap,
            "numpy": np.__version__, "completed": []}
    done: dict[str, list[tuple]] = {}
    if resume and path is not None and Path(path).exists():
        prev = load_library(path)
        if (prev.grid != grid or prev.experiment != exp or prev.domain != d
                or prev.solve != s or prev.metadata.get("r0") != r0
                or prev.metadata.get("epsilon_reg") != epsilon_reg):
            raise LibraryError("existing library was built with different settings")
        by_key: dict[str, list[tuple]] = {}
        for rec in prev.records:
            by_key.setdefault(rec.task, []).append(
                (rec.params, rec.side, rec.backscatter))
        done = {k: v for k, v in by_key.items() if k in set(prev.metadata.get("completed", ()))}
        logger.info("resuming: %d of %d solves present", len(done), len(tasks))

    todo = [t for t in tasks if t.key not in done]
    limit = cap * exp.source_strength

    def accept(key, results):
        for params, _, values in results:
            v = np.asarray(values, float)
            if not np.all(np.isfinite(v)) or v.min() < 0 or v.max() > limit:
                raise LibraryError(f"template {key} ({params.material.value}) outside "
                                   f"[0, {limit}]; check the solver settings")
        done[key] = results

    def assemble() -> LibraryIndex:
        return _assemble(tasks, done, grid, exp, d, s, meta)

    n_new = 0
    total = len(tasks)
    if jobs > 1 and len(todo) > 1:
        args = [(t, exp, d, s, r0, epsilon_reg) for t in todo]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for key, results in pool.map(_worker, args, chunksize=1):
                accept(key, results)
                n_new += 1
                if path is not None and n_new % checkpoint_every == 0:
                    save_library(assemble(), path)
                if progress:
                    progress(len(done), total)
    else:
        for t in todo:
            accept(t.key, _run_task(t, exp, d, s, r0, epsilon_reg))
            n_new += 1
            if path is not None and n_new % checkpoint_every == 0:
                save_library(assemble(), path)
            if progress:
                progress(len(done), total)

    index = assemble()
    if path is not None and (n_new or not Path(path).exists()):
        save_library(index, path)
    return index


def _assemble(tasks, done, grid, exp, d, s, meta) -> LibraryIndex:
    records = []
    completed = []
    for t in tasks:
        if t.key not in done:
            continue
        completed.append(t.key)
        for params, side, values in done[t.key]:
            values = np.asarray(values, float)
            if side is None:
                rec = TemplateRecord(len(records), params, t.alpha, values, task=t.key)
            else:
                rec = TemplateRecord(len(records), params, t.alpha, values,
                                     Provenance.TRANSITION, t.left.material,
                                     t.right.material, side, task=t.key)
            records.append(rec)
    return LibraryIndex(tuple(records), grid, exp, d, s, {**meta, "completed": completed})


# ---------------------------------------------------------------------------
# persistence

def _solve_to_dict(s: SolveSpec) -> dict:
    out = asdict(s)
    out["boundary"] = s.boundary.value
    return out


def save_library(index: LibraryIndex, path: str | Path) -> None:
    """Write the container atomically (temporary file, then rename)."""
    path = Path(path)
    n = index.samples_per_segment
    table = []
    payload = bytearray()
    for rec in index.records:
        v = np.asarray(rec.backscatter, dtype="<f8")
        if v.shape != (n,):
            raise LibraryError(f"record {rec.id} has length {v.size}, expected {n}")
        entry = rec.header()
        entry["offset"] = len(payload)
        entry["length"] = int(v.size)
        if rec.task:
            entry["task"] = rec.task
        table.append(entry)
        payload += v.tobytes()
    meta = {k: v for k, v in index.metadata.items() if not k.startswith("_")}
    header = {
        "format": FORMAT_VERSION,
        "grid": index.grid.to_dict(),
        "experiment": asdict(index.experiment),
        "domain": asdict(index.domain),
        "solve": _solve_to_dict(index.solve),
        "metadata": meta,
        "records": table,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(len(blob).to_bytes(8, "little"))
            fh.write(blob)
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_library(path: str | Path) -> LibraryIndex:
    """Read a container written by ``save_library``.

    Raises
    ------
    LibraryError
        Wrong magic bytes, unsupported version, truncated file or checksum
        mismatch.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != MAGIC:
        raise LibraryError(f"{path}: not a template library (bad magic bytes)")
    hlen = int.from_bytes(raw[8:16], "little")
    if 16 + hlen > len(raw):
        raise LibraryError(f"{path}: truncated header")
    try:
        header = json.loads(raw[16:16 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LibraryError(f"{path}: unreadable header ({exc})") from None
    if header.get("format") != FORMAT_VERSION:
        raise LibraryError(f"{path}: unsupported format version {header.get('format')}")
    payload = raw[16 + hlen:]
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise LibraryError(f"{path}: payload checksum mismatch")
    data = np.frombuffer(payload, dtype="<f8")
    solve = dict(header["solve"])
    solve["boundary"] = BoundaryKind(solve["boundary"])
    records = []
    for e in header["records"]:
        start = e["offset"] // 8
        values = data[start:start + e["length"]].astype(float)
        if values.size != e["length"]:
            raise LibraryError(f"{path}: record {e['id']} runs past the payload")
        params = SeafloorParams.from_dict(e["params"])
        if e["provenance"] == Provenance.TRANSITION.value:
            rec = TemplateRecord(e["id"], params, e["alpha"], values, Provenance.TRANSITION,
                                 MaterialType.parse(e["left"]), MaterialType.parse(e["right"]),
                                 e["side"], task=e.get("task", ""))
        else:
            rec = TemplateRecord(e["id"], params, e["alpha"], values, task=e.get("task", ""))
        records.append(rec)
    return LibraryIndex(tuple(records), ParamGrid.from_dict(header["grid"]),
                        ExperimentParams(**header["experiment"]),
                        DomainSpec(**header["domain"]), SolveSpec(**solve),
                        header.get("metadata", {}))
