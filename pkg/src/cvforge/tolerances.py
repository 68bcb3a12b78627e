"""Numerical tolerance budget, kept in one place.

Every comparison threshold used by the library falls into one of four
buckets.  Tests import these constants rather than re-inventing numbers,
so the table below is the single source of truth.

==================  =======  ====================================================
constant            value    used for
==================  =======  ====================================================
SYMMETRY_TOL        1e-12    covariance symmetry defect (enforced after updates)
STRUCTURAL_TOL      1e-10    symplectic identity, graph self-inverse, permutation
                             round trips, cross-rail decoupling
PHYSICS_TOL         1e-9     nullifier variances, purity, complex-graph recovery
GATE_TOL            1e-8     extracted-gate determinants and gate composition
==================  =======  ====================================================
"""

SYMMETRY_TOL = 1e-12
STRUCTURAL_TOL = 1e-10
PHYSICS_TOL = 1e-9
GATE_TOL = 1e-8

# Homodyne marginals narrower than this are treated as already-projected
# quadratures; conditioning on them is numerically meaningless.
DEGENERATE_VARIANCE = 1e-14
