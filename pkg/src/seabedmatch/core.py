"""
Seafloor parameterization shared by every stage of the pipeline.

A seafloor segment is described by a material label (sand, clay, rock, or
metal, the last meaning sand with a buried metal block), three geometric
parameters of a two-sinusoid ripple interface, and the experiment settings
(frequency, grazing angle, water constants). All units are SI unless noted;
attenuation is in dB per meter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np


class MaterialType(str, Enum):
    SAND = "sand"
    CLAY = "clay"
    ROCK = "rock"
    METAL = "metal"

    @classmethod
    def parse(cls, value: "str | MaterialType") -> "MaterialType":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown material {value!r}; expected one of "
                             f"{[m.value for m in cls]}") from None

    def __str__(self) -> str:
        return self.value


# density (kg/m^3), sound speed (m/s)
_GEOACOUSTIC_TABLE = {
    MaterialType.SAND: (2000.0, 1668.0),
    MaterialType.CLAY: (1170.0, 1518.9),
    MaterialType.ROCK: (2870.0, 6000.0),
    MaterialType.METAL: (8050.0, 6100.0),
}

DEFAULT_ATTENUATION_DB = 10.0
DEFAULT_OBJECT_DEPTH = 0.02
RIPPLE_AMPLITUDE = 0.01

ALPHA_MIN = math.pi / 12
ALPHA_MAX = math.pi / 3


@dataclass(frozen=True)
class GeoacousticProps:
    """Density, sound speed and attenuation of one medium.

    Parameters
    ----------
    density : float
        kg/m^3, strictly positive.
    sound_speed : float
        m/s, strictly positive.
    attenuation : float
        dB/m, non-negative.
    """

    density: float
    sound_speed: float
    attenuation: float = 0.0

    def __post_init__(self) -> None:
        if not (self.density > 0 and self.sound_speed > 0):
            raise ValueError("density and sound speed must be positive")
        if self.attenuation < 0:
            raise ValueError("attenuation must be non-negative")

    @property
    def impedance(self) -> float:
        return self.density * self.sound_speed


def material_properties(material: MaterialType | str,
                        attenuation: float = DEFAULT_ATTENUATION_DB) -> GeoacousticProps:
    """Tabulated geoacoustic properties of a sediment material.

    For ``METAL`` this returns the properties of the metal itself; the sand
    cover above a buried object is handled by the medium builder.
    """
    material = MaterialType.parse(material)
    rho, c = _GEOACOUSTIC_TABLE[material]
    return GeoacousticProps(density=rho, sound_speed=c, attenuation=attenuation)


@dataclass(frozen=True)
class GeoParams:
    """Ripple geometry: two spatial frequencies and their amplitude ratio.

    ``amplitude`` scales both sinusoids and is fixed at 1 cm for every
    physical seabed; setting it to zero gives the flat interface used by the
    analytic reflection checks.
    """

    mg1: float
    mg2: float
    mg3: float
    amplitude: float = RIPPLE_AMPLITUDE

    def __post_init__(self) -> None:
        for name in ("mg1", "mg2", "mg3", "amplitude"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")

    @classmethod
    def flat(cls) -> "GeoParams":
        return cls(0.0, 0.0, 0.0, amplitude=0.0)

    @property
    def is_flat(self) -> bool:
        return self.amplitude == 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.mg1, self.mg2, self.mg3], dtype=float)

    def min_height(self) -> float:
        """Lower bound of ``interface_height`` over all x."""
        return -self.amplitude * (1.0 + abs(self.mg2))


def interface_height(x, g: GeoParams):
    """Height of the water/sediment interface at horizontal position ``x``."""
    x = np.asarray(x, dtype=float)
    y = g.amplitude * (np.sin(2 * np.pi * g.mg1 * x)
                       + g.mg2 * np.sin(2 * np.pi * g.mg3 * x))
    return y if y.ndim else float(y)


@dataclass(frozen=True)
class ExperimentParams:
    """Known acquisition parameters.

    The wavenumber is always derived from ``frequency`` and ``water_speed``.
    """

    frequency: float = 20_000.0
    incident_angle: float = math.pi / 6
    source_strength: float = 1.0
    water_density: float = 1030.0
    water_speed: float = 1500.0
    sediment_attenuation: float = DEFAULT_ATTENUATION_DB

    def __post_init__(self) -> None:
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        # normal incidence is allowed for the reflection checks; library
        # grids stay inside [ALPHA_MIN, ALPHA_MAX]
        if not 0 < self.incident_angle <= math.pi / 2:
            raise ValueError("incident angle must lie in (0, pi/2]")
        if not (self.water_density > 0 and self.water_speed > 0):
            raise ValueError("water density and speed must be positive")
        if self.sediment_attenuation < 0:
            raise ValueError("attenuation must be non-negative")

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.frequency

    @property
    def wavenumber(self) -> float:
        return self.omega / self.water_speed

    @property
    def wavelength(self) -> float:
        return self.water_speed / self.frequency

    @property
    def water(self) -> GeoacousticProps:
        return GeoacousticProps(self.water_density, self.water_speed, 0.0)

    def with_angle(self, alpha: float) -> "ExperimentParams":
        return replace(self, incident_angle=float(alpha))


@dataclass(frozen=True)
class SeafloorParams:
    """Parameters of one seafloor segment.

    ``object_depth`` is the depth of the top of a buried metal block below
    y = 0 and is only meaningful for ``MaterialType.METAL``.
    """

    material: MaterialType
    geometry: GeoParams
    object_depth: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "material", MaterialType.parse(self.material))
        if self.material is MaterialType.METAL:
            if self.object_depth is None:
                raise ValueError("metal segments need an object depth")
            if not self.object_depth > 0:
                raise ValueError("object depth must be positive")
            # the block may touch the deepest ripple trough but not cut it
            if self.geometry.min_height() + self.object_depth < -1e-12:
                raise ValueError("buried object intersects the interface")
        elif self.object_depth is not None:
            raise ValueError("object depth is only valid for metal segments")

    @classmethod
    def metal(cls, geometry: GeoParams,
              object_depth: float = DEFAULT_OBJECT_DEPTH) -> "SeafloorParams":
        return cls(MaterialType.METAL, geometry, object_depth)

    def to_dict(self) -> dict:
        g = self.geometry
        out = {"material": self.material.value,
               "geometry": [g.mg1, g.mg2, g.mg3],
               "amplitude": g.amplitude}
        if self.object_depth is not None:
            out["object_depth"] = self.object_depth
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SeafloorParams":
        g = GeoParams(*map(float, data["geometry"]),
                      amplitude=float(data.get("amplitude", RIPPLE_AMPLITUDE)))
        return cls(MaterialType.parse(data["material"]), g, data.get("object_depth"))


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of a template domain and its receiver line.

    Parameters
    ----------
    segment_width : float
        Width of one seafloor segment (m).
    sediment_depth : float
        Thickness of the truncated sediment layer below y = 0 (m).
    water_height : float
        Height of the simulated water layer above y = 0, PML included (m).
    samples_per_segment : int
        Receivers per segment; must be a power of two.
    receiver_line_height : float
        Height of the receiver line above y = 0 (m).
    footprint_shift : bool
        When True, the receiver assigned to seafloor position x sits at
        ``x - receiver_line_height / tan(alpha)``, i.e. on the backscatter ray
        leaving x, so each measurement describes the seabed below its
        coordinate.
    segment_local_ripples : bool
        Evaluate the ripple function at ``x mod segment_width`` so every
        segment starts at ripple phase zero, as it does for integer spatial
        frequencies on 1 m segments. Needed whenever ``mg * segment_width``
        is not an integer, otherwise a template and the seabed segment it
        should match see shifted ripples.
    """

    segment_width: float = 1.0
    sediment_depth: float = 2.0
    water_height: float = 1.0
    samples_per_segment: int = 512
    receiver_line_height: float = 0.5
    footprint_shift: bool = True
    segment_local_ripples: bool = False

    def __post_init__(self) -> None:
        if not _is_power_of_two(int(self.samples_per_segment)):
            raise ValueError("samples_per_segment must be a power of two")
        if not (self.sediment_depth > 0 and self.water_height > 0
                and self.segment_width > 0):
            raise ValueError("domain dimensions must be positive")
        if not 0 < self.receiver_line_height < self.water_height:
            raise ValueError("receiver line must lie inside the water layer")

    @property
    def log2_samples(self) -> int:
        return int(self.samples_per_segment).bit_length() - 1


def measurement_grid(d: DomainSpec, n_segments: int) -> np.ndarray:
    """Equispaced seafloor coordinates covering ``[0, n_segments * dS)``."""
    if n_segments < 1:
        raise ValueError("n_segments must be at least 1")
    n = n_segments * d.samples_per_segment
    return np.arange(n) * (d.segment_width / d.samples_per_segment)


def segment_slices(n_total: int, samples_per_segment: int) -> list[slice]:
    if n_total % samples_per_segment:
        raise ValueError("signal length is not a multiple of the segment length")
    return [slice(i, i + samples_per_segment)
            for i in range(0, n_total, samples_per_segment)]


@dataclass(frozen=True)
class Preset:
    """Acquisition and domain settings plus overrides for the solver.

    ``solve`` holds keyword overrides for ``SolveSpec``; it is kept as a plain
    mapping so this module does not depend on the solver.
    """

    experiment: ExperimentParams
    domain: DomainSpec
    solve: tuple[tuple[str, float], ...] = ()
    notes: str = field(default="", compare=False)

    def solve_overrides(self) -> dict:
        return dict(self.solve)


PRESETS: dict[str, Preset] = {
    # 20 kHz over 1 m segments: the published configuration, slow
    "paper": Preset(
        ExperimentParams(),
        DomainSpec(segment_width=1.0, sediment_depth=2.0, water_height=1.0,
                   samples_per_segment=512, receiver_line_height=0.5),
        (),
        "published scale; ~2e5 unknowns per template solve",
    ),
    # same physics, quarter-width segments; ripple backscatter needs about
    # 15 points per wavelength to settle, and 1 m of attenuating sediment
    # already hides the bottom
    "desk": Preset(
        ExperimentParams(),
        DomainSpec(segment_width=0.25, sediment_depth=1.0, water_height=0.5,
                   samples_per_segment=512, receiver_line_height=0.2,
                   segment_local_ripples=True),
        (("points_per_wavelength_water", 15.0),),
        "20 kHz, 0.25 m segments; ~6e4 unknowns per template solve",
    ),
    # long-wavelength variant for quick solver checks; ripples are sub-grid
    "desk-2k": Preset(
        ExperimentParams(frequency=2_000.0),
        DomainSpec(segment_width=1.0, sediment_depth=2.0, water_height=3.0,
                   samples_per_segment=64, receiver_line_height=1.5,
                   segment_local_ripples=True),
        (),
        "2 kHz, 1 m segments; flat-interface checks only",
    ),
}


def preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
