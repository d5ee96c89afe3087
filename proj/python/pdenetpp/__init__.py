"""Hybrid learned-discretization PDE simulation.

Arrays are exchanged as float64 NumPy arrays (copied in both directions).
Fields use the [C, Nx, Ny] layout and datasets [N, M+1, C, n, n].
"""

from ._core import (
    ConfigError,
    FormatError,
    HybridModel,
    MomentSpec,
    NumericalError,
    PdeConfig,
    ShapeError,
    SpectralSolver,
    add_noise,
    assemble_constrained_kernel,
    flux_limited_step,
    free_indices,
    free_param_count,
    generate_dataset,
    kernel_from_moment,
    moment_from_kernel,
    read_pdnx,
    relative_l2,
    run,
    sample_grf,
    satisfies_moment_constraint,
    total_variation,
    upwind_step_1,
    upwind_step_2,
    weno3_reconstruct,
    weno3_step,
    write_pdnx,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
