"""Adaptive basis refinement and online compression for reduced-order models.

Thin Python layer over the C++ core: dense kernels (thin_svd, cpqr,
factor_spsd, kmeans), data-driven refinement-tree construction, full
simulation runs driven by the same JSON configs as the CLI, the oracle
verification suite, and Pareto filtering.
"""

from romsieve._core import (
    build_tree_json,
    cpqr,
    factor_spsd,
    kmeans,
    pareto_front,
    run_from_config,
    thin_svd,
    verify,
)

__all__ = [
    "build_tree_json",
    "cpqr",
    "factor_spsd",
    "kmeans",
    "pareto_front",
    "run_from_config",
    "thin_svd",
    "verify",
]
