import math

import numpy as np
import pytest

from seabedmatch.core import MaterialType
from seabedmatch.library import (LibraryError, ParamGrid, Provenance, build_library,
                                 load_library, plan_tasks, query, save_library, snap_angle)

SMALL = ParamGrid((math.pi / 6,), (15.0,), (1.0,), (26.0,),
                  materials=("sand", "rock"), transitions=(("sand", "rock"),))


@pytest.fixture(scope="module")
def small_library(small_desk, tmp_path_factory):
    exp, d, s = small_desk
    path = tmp_path_factory.mktemp("lib") / "small.sbml"
    lib = build_library(SMALL, exp, d, s, path=path)
    return lib, path


def test_table2_grid_size():
    grid = ParamGrid.table2()
    assert (len(grid.alphas), len(grid.mg1), len(grid.mg2), len(grid.mg3)) == (30, 20, 2, 20)
    tasks = plan_tasks(grid)
    pure = sum(1 for t in tasks if t.right is None)
    # each periodic solve yields two records
    assert 2 * pure >= 2 * 30 * 20 * 2 * 20 * 4


def test_desk_grid_contents():
    grid = ParamGrid.desk()
    assert grid.mg2 == (0.5, 1.0)
    assert 26.0 in grid.mg3 and 15.0 in grid.mg1
    assert len(plan_tasks(grid)) == 36 * (4 + 6)


def test_grid_validation_and_round_trip():
    with pytest.raises(ValueError):
        ParamGrid((), (1.0,), (1.0,), (1.0,))
    with pytest.raises(ValueError):
        ParamGrid((0.5,), (1.0,), (1.0,), (1.0,), transitions=(("sand", "sand"),))
    g = ParamGrid.desk()
    assert ParamGrid.from_dict(g.to_dict()) == g
    assert g.spacing()["mg1"] == pytest.approx(2.5)


def test_snap_angle_ties_go_to_smaller_index():
    assert snap_angle([0.1, 0.3], 0.2) == 0.1
    assert snap_angle([0.1, 0.3], 0.25) == 0.3
    assert snap_angle([], 0.2) is None


@pytest.mark.slow
def test_small_build_records(small_library):
    lib, _ = small_library
    assert len(lib) == 6
    pure = [r for r in lib if r.provenance is Provenance.PURE]
    trans = [r for r in lib if r.provenance is Provenance.TRANSITION]
    assert len(pure) == 4 and len(trans) == 2
    assert [r.material for r in trans] == [MaterialType.SAND, MaterialType.ROCK]
    assert [r.side for r in trans] == ["left", "right"]
    assert [r.id for r in lib] == list(range(6))
    # the two records of one periodic solve coincide
    assert np.allclose(pure[0].backscatter, pure[1].backscatter, rtol=1e-6, atol=1e-12)
    assert all(np.all(r.backscatter >= 0) for r in lib)


@pytest.mark.slow
def test_save_load_round_trip(small_library, tmp_path):
    lib, path = small_library
    back = load_library(path)
    assert back.grid == lib.grid and back.domain == lib.domain and back.solve == lib.solve
    assert np.array_equal(back.matrix(), lib.matrix())
    other = tmp_path / "again.sbml"
    save_library(back, other)
    assert other.read_bytes() == path.read_bytes()


@pytest.mark.slow
def test_resume_complete_file_is_noop(small_library, small_desk):
    lib, path = small_library
    exp, d, s = small_desk
    before = path.read_bytes()
    calls = []
    again = build_library(SMALL, exp, d, s, path=path, resume=True,
                          progress=lambda i, n: calls.append(i))
    assert calls == [] and path.read_bytes() == before
    assert np.array_equal(again.matrix(), lib.matrix())


@pytest.mark.slow
def test_interrupted_build_resumes(small_library, small_desk, tmp_path):
    lib, _ = small_library
    exp, d, s = small_desk
    path = tmp_path / "partial.sbml"

    def stop_after_one(i, n):
        if i == 1:
            raise KeyboardInterrupt

    with pytest.raises(KeyboardInterrupt):
        build_library(SMALL, exp, d, s, path=path, checkpoint_every=1, progress=stop_after_one)
    partial = load_library(path)
    assert len(partial) == 2
    full = build_library(SMALL, exp, d, s, path=path, resume=True)
    assert np.array_equal(full.matrix(), lib.matrix())


@pytest.mark.slow
def test_resume_with_other_settings_fails(small_library, small_desk):
    _, path = small_library
    exp, d, s = small_desk
    with pytest.raises(LibraryError, match="different settings"):
        build_library(SMALL, exp.with_angle(0.5), d, s, path=path, resume=True)


@pytest.mark.slow
def test_cap_rejects_large_values(small_desk):
    exp, d, s = small_desk
    grid = ParamGrid((math.pi / 6,), (15.0,), (1.0,), (26.0,), materials=("rock",))
    with pytest.raises(LibraryError, match="outside"):
        build_library(grid, exp, d, s, cap=1e-6)


@pytest.mark.slow
def test_corruption_detected(small_library, tmp_path):
    _, path = small_library
    raw = bytearray(path.read_bytes())
    bad = tmp_path / "bad.sbml"
    flipped = raw.copy()
    flipped[-3] ^= 0xFF
    bad.write_bytes(bytes(flipped))
    with pytest.raises(LibraryError, match="checksum"):
        load_library(bad)
    bad.write_bytes(b"NOTALIB!" + bytes(raw[8:]))
    with pytest.raises(LibraryError, match="magic"):
        load_library(bad)
    bad.write_bytes(bytes(raw[:40]))
    with pytest.raises(LibraryError, match="truncated"):
        load_library(bad)


@pytest.mark.slow
def test_query_and_subsets(small_library):
    lib, _ = small_library
    rock = query(lib, "rock", angle=0.4)
    assert [r.material for r in rock] == [MaterialType.ROCK] * 3
    assert len(lib.pure()) == 4
    assert lib.by_id(3).id == 3
    with pytest.raises(KeyError):
        lib.by_id(99)
