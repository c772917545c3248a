"""Numerical tolerances shared by every oracle in the package.

All quadrature, special-function and root-finding accuracy targets live here
so that a single import shows the configuration in effect (``sfrcm --version``
prints this table).
"""

# relative change between successive refinements of a spatial or weight integral
INTEGRAL_RTOL = 1e-8
# relative accuracy of the Lanczos gamma function
GAMMA_RTOL = 1e-12
# absolute bracket width at which bisection for rho stops
ROOT_XTOL = 1e-12

# Gauss-Legendre nodes per panel for composite rules
PANEL_ORDER = 8
# hard cap on refinement levels (each level halves every panel)
MAX_REFINEMENTS = 6

# largest tensor grid (nodes) a spatial refinement may build
MAX_SPATIAL_NODES = 20_000_000

# piecewise Chebyshev table of z -> E[1 - exp(-z W)] in t = log z
FTABLE_DEGREE = 24
FTABLE_T_MAX = 5.0


def as_table():
    return {
        "integral_rtol": INTEGRAL_RTOL,
        "gamma_rtol": GAMMA_RTOL,
        "root_xtol": ROOT_XTOL,
        "panel_order": PANEL_ORDER,
        "max_refinements": MAX_REFINEMENTS,
        "max_spatial_nodes": MAX_SPATIAL_NODES,
        "ftable_degree": FTABLE_DEGREE,
    }
