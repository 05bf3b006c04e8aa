"""Pinning models whose disorder is itself a renewal sequence."""

__version__ = "0.1.0"

from .renewal_core import (  # noqa: E402
    DisorderPath,
    Estimate,
    MassFunctionTable,
    PowerLawRenewal,
    RenewalLaw,
    convolve_renewal,
    geometric_law,
    law_from_pmf,
    mass_function,
    normalize_power_law,
    sample_path,
    seed_stream,
    stationary_delay,
    tilt_law,
)
from .homogeneous import (  # noqa: E402
    critical_reward,
    entropy_rate,
    fit_homogeneous_exponent,
    free_energy_curve,
    free_energy_expansion_check,
    solve_free_energy,
)
from .annealed import (  # noqa: E402
    annealed_critical_point,
    annealed_curve,
    annealed_free_energy,
    beta_zero,
    build_intersection_law,
    compute_I,
    compute_I_at_zero,
    gamma_ann_scaling_fit,
    large_beta_relevance_check,
    nu_a_fit,
)
from .quenched import (  # noqa: E402
    monotonicity_check,
    quenched_free_energy_mc,
    quenched_partition_dp,
    tilted_disorder_enumerate,
)
from .moments_gaps import (  # noqa: E402
    boundedness_probe,
    decoupling_check,
    gap_decompose,
    moment_cluster_expansion,
    r_function,
    second_moment_dp,
)
from .spectral import mass_by_convolution, mass_by_inversion  # noqa: E402
from .config import ExperimentConfig  # noqa: E402

__all__ = [name for name in dir() if not name.startswith("_")]
