"""Bayesian abundance estimation for closed populations with individual heterogeneity.

Semi-complete data likelihood samplers (SCD1, SCD2) and super-population data
augmentation baselines (CD:R, CD:DE) for model M_h and spatially explicit
capture-recapture.
"""

__version__ = "0.1.0"
