"""Numerical tolerances shared across the toolkit.

All geometry is done in floating point on desk-scale data, so every
"exact" statement (vertex on a facet, rank of a matrix, strict LP
feasibility) is made against one of these declared cutoffs.
"""

# Geometric coincidence: vertex-on-facet tests, membership boundaries,
# polytope equality. Applied relative to the data scale where noted.
GEO_TOL = 1e-9

# Linear-algebra rank / subspace-membership threshold, relative to the
# largest singular value of the matrix involved.
LIN_TOL = 1e-8

# LP strictness gap: a margin-maximization optimum above this counts as
# a strict inequality, within +/- of it as marginal.
LP_TOL = 1e-7

# Active-set tolerance for the Dini derivative of V(x) = max n_i . x.
ACT_TOL = 1e-6

# Allowed per-step increase of V along a closed-loop trajectory.
MONO_TOL = 1e-6

# Endpoint accuracy for open-loop steering maneuvers.
END_TOL = 1e-3

# Triangulation volume bookkeeping (relative).
VOL_TOL = 1e-9

# Distance to the equilibrium subspace at which the safe-steer policy
# hands over from the piecewise-linear brake to open-loop steering.
SWITCH_DIST = 0.05
