from __future__ import annotations

"""Top-level package for *housemove*.

Monte Carlo construction, densities and verification of diffusion
house-moving.  The most used entry points are re-exported so callers can do::

    from housemove import Corridor, Curve, DriftModel, TableBuilder, sample_housemoving_bm

rather than importing submodules individually.
"""

from .corridor import Corridor, Curve, TimeGrid  # noqa: F401  (re-export)
from .drift import DriftModel, SdeModel, lamperti_transform  # noqa: F401  (re-export)
from .conditioned import (  # noqa: F401  (re-export)
    EpsilonSchedule,
    sample_boundary_case,
    sample_corridor_meander_bm,
    sample_housemoving_bm,
)
from .kernels import KernelSettings, TableBuilder  # noqa: F401  (re-export)
from .config import RunConfig  # noqa: F401  (re-export)
