"""Window-relative certificates that a sublevel component is a setwise local
minimum."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .grid import FACE


@dataclass(frozen=True)
class SetwiseCertificate:
    """Outcome of :func:`certify_setwise_min`.

    ``certified`` holds when every node of the dilation ring has value at
    least the component maximum (``strict`` when strictly above).
    ``within_window`` flags components that touch the window edge, where
    only the truncated set is certified. ``spurious`` compares the component
    infimum with the reference global infimum. ``witness`` is the ring node
    with the smallest value (the refuting node when not certified).
    """

    component_id: int
    certified: bool
    strict: bool
    within_window: bool
    component_max: float
    ring_min: float
    component_inf: float
    global_inf: Optional[float]
    spurious: Optional[bool]
    max_on_boundary: bool
    witness: Optional[tuple]
    margin: int

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _structure(ndim, connectivity):
    return ndimage.generate_binary_structure(ndim, 1 if connectivity == FACE else ndim)


def certify_setwise_min(field, labeling, component_id, margin=1, global_inf=None,
                        spurious_tol=1e-9) -> SetwiseCertificate:
    """Test whether component ``component_id`` of ``labeling`` is a setwise
    local minimum of the sampled field.

    The open neighbourhood is represented by dilating the component
    ``margin`` times with the labeling's neighbourhood; the ring is the
    dilation minus the component, truncated at the window. The check also
    reports whether the component maximum sits on its discrete boundary
    (nodes with a neighbour outside the component, or on the window edge).
    """
    if margin < 1:
        raise ValueError("margin must be >= 1 grid step")
    comp = labeling.labels == int(component_id)
    if not comp.any():
        raise ValueError(f"no component {component_id}")
    st = _structure(comp.ndim, labeling.connectivity or field.connectivity)
    dil = ndimage.binary_dilation(comp, structure=st, iterations=int(margin))
    ring = dil & ~comp
    vals = field.values
    cmax = float(vals[comp].max())
    cinf = float(vals[comp].min())
    if ring.any():
        ring_vals = np.where(ring, vals, np.inf)
        w = np.unravel_index(int(np.argmin(ring_vals)), vals.shape)
        rmin = float(vals[w])
        witness = tuple(int(i) for i in w)
    else:
        rmin, witness = float("inf"), None
    certified = rmin >= cmax
    strict = rmin > cmax
    within = bool(labeling.touches_boundary[int(component_id)])
    # discrete boundary of the component
    interior = ndimage.binary_erosion(comp, structure=st, border_value=0)
    bnd = comp & ~interior
    max_on_bnd = bool(np.isclose(vals[bnd].max(), cmax, rtol=0, atol=0)) if bnd.any() else False
    spurious = None if global_inf is None else bool(cinf > global_inf + spurious_tol)
    return SetwiseCertificate(int(component_id), bool(certified), bool(strict), within, cmax,
                              rmin, cinf, None if global_inf is None else float(global_inf),
                              spurious, max_on_bnd, witness, int(margin))
