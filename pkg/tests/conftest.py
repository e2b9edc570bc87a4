import hashlib
import json
import os
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from seabedmatch.core import preset
from seabedmatch.library import ParamGrid, build_library
from seabedmatch.solver import SolveSpec

CACHE = Path(os.environ.get("SEABEDMATCH_TEST_CACHE", Path(__file__).resolve().parents[1] / ".cache"))


@pytest.fixture(scope="session")
def desk():
    pr = preset("desk")
    return pr.experiment, pr.domain, SolveSpec(**pr.solve_overrides())


@pytest.fixture(scope="session")
def small_desk(desk):
    """Desk physics with 64 receivers per segment for quick solver tests."""
    exp, d, s = desk
    return exp, replace(d, samples_per_segment=64), s


@pytest.fixture(scope="session")
def desk_library(desk):
    """The desk-grid library, built once and kept under the cache directory."""
    exp, d, s = desk
    path = CACHE / "desk-library.sbml"
    CACHE.mkdir(parents=True, exist_ok=True)
    return build_library(ParamGrid.desk(), exp, d, s, path=path, resume=True)


class SignalCache:
    """Disk cache for simulated seabeds keyed by the simulation settings."""

    def __init__(self, root: Path):
        self.root = root

    def get(self, key: dict, make):
        blob = json.dumps(key, sort_keys=True, default=repr).encode()
        path = self.root / f"signal-{hashlib.sha256(blob).hexdigest()[:16]}.npy"
        if path.exists():
            return np.load(path)
        values = np.asarray(make(), float)
        self.root.mkdir(parents=True, exist_ok=True)
        np.save(path, values)
        return values


@pytest.fixture(scope="session")
def signal_cache():
    return SignalCache(CACHE)
