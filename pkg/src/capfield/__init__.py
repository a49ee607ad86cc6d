"""Poisson integrals of spherical cap sums, nets, and radial divergence exponents."""
from .sphere import (
    Cap, GaugeSpec, Net, NetReport, ResourceLimitError, Slice, SpherePoint, build_net,
    cap_intersection_measure, cap_measure, chordal_distance, dilate_cap, five_r_disjointify,
    north_pole, verify_net,
)
from .poisson import (
    CapFunction, QuadratureError, RadialPoint, cap_kernel_integral, cap_lower_constant,
    kernel_normalization_check, kernel_value, l1_norm, poisson_integral, poisson_values,
)
from .slicer import (
    SliceDecomposition, check_domination, doubling_constant, harnack_c0, maximal_over_caps,
    slice_radii,
)
from .constructions import (
    CoveringSequence, LimsupLevel, divergence_function, geometric_witness, limsup_cover_sets,
    residual_witness, saturating_function,
)
from .exponents import (
    BoxDimension, RadialProfile, SpectrumConfig, SpectrumEstimate, beta_hat, box_dimension,
    level_set, radial_profile, spectrum,
)

__version__ = "0.1.0"
