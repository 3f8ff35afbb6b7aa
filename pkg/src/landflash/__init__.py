"""Potts-model multi-objective land-use allocation with flashpoint analysis."""

from .lattice import (LandUseGrid, PrioritySet, SuitabilityField, compactness_objective,
                      delta_energy_flip, suitability_objective, total_energy)
from .sampler import AnnealSchedule, Chain, StreamRNG, run_anneal, run_replicates
from .analysis import (build_histogram, detect_flashpoints, find_minima, gray_area_map,
                       landau_surface, optimal_counts, symmetry_breaking_scan, ternary_project)
from .nucleation import RegionMask, boundary_and_area, flip_threshold, predict_flashpoint_priority
from .fields import GeneratorSpec, generate_field
from .config import RunConfig, load_config

__version__ = "0.1.0"
