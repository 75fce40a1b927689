"""Finite-window landscape structure: grids, sublevel components, setwise
minimum certificates, critical points and coercivity probes."""
from .certify import SetwiseCertificate, certify_setwise_min
from .coercivity import CoercivityReport, coercivity_probe
from .components import ComponentLabeling, UnionFind, label_mask, sublevel_components
from .critical import (DEGENERATE, MAXIMUM, MINIMUM, STRICT_SADDLE, CriticalRecord,
                       CriticalSearch, classify_hessian, cluster_values, enumerate_critical_mc,
                       find_critical_numeric, mc_critical_point)
from .grid import FACE, FULL, GridField, grid_from_bytes, grid_from_csv, sample_grid

__all__ = [
    "GridField", "sample_grid", "grid_from_bytes", "grid_from_csv", "FACE", "FULL",
    "UnionFind", "ComponentLabeling", "label_mask", "sublevel_components",
    "SetwiseCertificate", "certify_setwise_min",
    "CriticalRecord", "CriticalSearch", "classify_hessian", "cluster_values",
    "enumerate_critical_mc", "find_critical_numeric", "mc_critical_point",
    "MINIMUM", "STRICT_SADDLE", "MAXIMUM", "DEGENERATE",
    "CoercivityReport", "coercivity_probe",
]
