from ._core import (
    MomentTable,
    QuadraticModel,
    Weights,
    cma_log_weights,
    custom_weights,
    empirical_gain,
    moments,
    optimal_weights,
    optimal_weights_general,
    phi_hat,
    phi_inf,
    sigma_bar_star,
    sigma_bar_star_sphere,
    truncation_weights,
)

__version__ = "0.1.0"
