"""Anisotropic dyadic decompositions and transfer operators of hyperbolic toral maps.

The package builds cone-adapted Littlewood-Paley blocks on periodic grids,
the anisotropic Hölder/Sobolev norms weighted by those blocks, hyperbolicity
data of toral maps, transfer operators with block-matrix diagnostics, and
Galerkin spectra of those operators.
"""

from .decomposition import (FrequencyLattice, GridFunction, SpectralBlocks, TruncationError,
                            block, decompose, random_band_limited, reconstruct)
from .hyperbolicity import (ConeHyperbolicityError, HookStructure, NoSplittingError, R_pqt,
                            R_pqt_limit, check_cone_hyperbolicity, cone_expansion_norms,
                            estimate_splitting, hook_structure, hooks, iterate_derivative,
                            lambda_mt, local_exponents, sample_invariant_set)
from .maps import (GOLDEN, MapModel, PerturbationTerm, WeightField, cat_cones, cat_map,
                   identity_map)
from .norms import (GammaSequence, NormParams, aniso_holder_norm, aniso_norm,
                    aniso_sobolev_norm, classical_norms, dagger_norms,
                    embedding_singular_values, gamma_norm)
from .partition import Chart, ChartSystem, PartitionOfUnity, partition_split_compare, patched_norm
from .spectra import (GalerkinMatrix, ResonanceReport, assemble, eigensolve, resonance_report,
                      srb_and_correlations, stability_experiment)
from .symbols import ChiProfile, ConeSystem, directional_symbol, refines, shell_symbol
from .transfer import (LYReport, TransferOperator, apply_transfer, block_operator,
                       lasota_yorke_measure, s1_block_norm_scan)

__version__ = "0.1.0"

__all__ = [
    "FrequencyLattice", "GridFunction", "SpectralBlocks", "TruncationError", "block",
    "decompose", "random_band_limited", "reconstruct",
    "ConeHyperbolicityError", "HookStructure", "NoSplittingError", "R_pqt", "R_pqt_limit",
    "check_cone_hyperbolicity", "cone_expansion_norms", "estimate_splitting", "hook_structure",
    "hooks", "iterate_derivative", "lambda_mt", "local_exponents", "sample_invariant_set",
    "GOLDEN", "MapModel", "PerturbationTerm", "WeightField", "cat_cones", "cat_map",
    "identity_map",
    "GammaSequence", "NormParams", "aniso_holder_norm", "aniso_norm", "aniso_sobolev_norm",
    "classical_norms", "dagger_norms", "embedding_singular_values", "gamma_norm",
    "Chart", "ChartSystem", "PartitionOfUnity", "partition_split_compare", "patched_norm",
    "GalerkinMatrix", "ResonanceReport", "assemble", "eigensolve", "resonance_report",
    "srb_and_correlations", "stability_experiment",
    "ChiProfile", "ConeSystem", "directional_symbol", "refines", "shell_symbol",
    "LYReport", "TransferOperator", "apply_transfer", "block_operator", "lasota_yorke_measure",
    "s1_block_norm_scan",
]
