"""Seafloor classification by multilevel matching of simulated backscatter."""

__version__ = "0.1.0"

from .core import (DomainSpec, ExperimentParams, GeoParams, GeoacousticProps,  # noqa: E402
                   MaterialType, SeafloorParams, interface_height, material_properties,
                   measurement_grid, preset)
from .solver import ComplexField, SolveSpec, SolverError, solve_template, solve_transition  # noqa: E402
from .microlocal import BackscatterSignal, backscatter_profile, decompose  # noqa: E402
from .wavelet import WaveletCoeffs, dwt_multilevel, idwt_multilevel  # noqa: E402

__all__ = [
    "BackscatterSignal", "ComplexField", "DomainSpec", "ExperimentParams", "GeoParams",
    "GeoacousticProps", "MaterialType", "SeafloorParams", "SolveSpec", "SolverError",
    "WaveletCoeffs", "backscatter_profile", "decompose", "dwt_multilevel",
    "idwt_multilevel", "interface_height", "material_properties", "measurement_grid",
    "preset", "solve_template", "solve_transition",
]
