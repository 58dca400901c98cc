"""Constrained equilibrium potentials for disc holes and their energies.

The package computes the minimizer of the two-term energy functional over
probability measures avoiding a chart disc, reproduces the exact
constant-density answers and the quartic small-radius scaling law, and
estimates hole probabilities of Gaussian random polynomial ensembles by
Monte Carlo for comparison with the minimal energy.
"""

from .envelope import (EnvelopeProblem, GridField, envelope_grid,
                       field_from_radial, flat_minimizer, grid_energy,
                       radial_minimizer, symmetrize)
from .energy import (PerturbationProfile, SweepResult, SweepRow, min_energy,
                     psi2_energy, psi2_profile, scaling_sweep, solve_equa_R,
                     solve_kappa_R)
from .geometry import (ChartMetric, RadialWeight, RadiusPair, chart_to_geodesic,
                       custom_metric, ddc_gap, flat_metric,
                       fubini_study_metric, geodesic_to_chart,
                       sandwich_bounds)
from .montecarlo import (EnsembleSpec, HoleEstimate, count_zeros_in_disc,
                         hole_probability, rate_trend, sample_section,
                         wilson_interval)
from .potential import (EnergyOrdering, EnergyReport, MeasureDecomposition,
                        PiecewiseRadial, RadialPotential, compare_energies,
                        energy, measure_from_potential, potential_from_measure,
                        star_normalize)

__version__ = "0.1.0"

__all__ = [
    "ChartMetric", "RadialWeight", "RadiusPair", "chart_to_geodesic",
    "custom_metric", "ddc_gap", "flat_metric", "fubini_study_metric",
    "geodesic_to_chart", "sandwich_bounds",
    "EnergyOrdering", "EnergyReport", "MeasureDecomposition",
    "PiecewiseRadial", "RadialPotential", "compare_energies", "energy",
    "measure_from_potential", "potential_from_measure", "star_normalize",
    "EnvelopeProblem", "GridField", "envelope_grid", "field_from_radial",
    "flat_minimizer", "grid_energy", "radial_minimizer", "symmetrize",
    "PerturbationProfile", "SweepResult", "SweepRow", "min_energy",
    "psi2_energy", "psi2_profile", "scaling_sweep", "solve_equa_R",
    "solve_kappa_R",
    "EnsembleSpec", "HoleEstimate", "count_zeros_in_disc",
    "hole_probability", "rate_trend", "sample_section", "wilson_interval",
    "__version__",
]
