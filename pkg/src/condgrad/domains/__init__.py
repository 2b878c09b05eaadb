from .matrices import (
    BoundedDiagDomain,
    FactoredPSD,
    SparsePsdAtom,
    SparsePsdDomain,
    SpectrahedronDomain,
    boundeddiag_lmo,
    hazan_run,
    maxdiag_run,
    rank_one_atom,
    sparsepsd_lmo,
    sparsepsd_run,
    spect_gap,
    spect_lmo,
    spect_lowrank_lowerbound_suite,
)
from .vectors import (
    CubeDomain,
    L1BallDomain,
    SimplexDomain,
    cube_gap,
    cube_lmo,
    l1_gap,
    l1_lmo,
    l1_lowerbound_suite,
    simplex_gap,
    simplex_lmo,
    sparse_lowerbound_suite,
    uniform_k_vector,
)

__all__ = [
    "BoundedDiagDomain",
    "CubeDomain",
    "FactoredPSD",
    "L1BallDomain",
    "SimplexDomain",
    "SparsePsdAtom",
    "SparsePsdDomain",
    "SpectrahedronDomain",
    "boundeddiag_lmo",
    "cube_gap",
    "cube_lmo",
    "hazan_run",
    "l1_gap",
    "l1_lmo",
    "l1_lowerbound_suite",
    "maxdiag_run",
    "rank_one_atom",
    "simplex_gap",
    "simplex_lmo",
    "sparse_lowerbound_suite",
    "sparsepsd_lmo",
    "sparsepsd_run",
    "spect_gap",
    "spect_lmo",
    "spect_lowrank_lowerbound_suite",
    "uniform_k_vector",
]
