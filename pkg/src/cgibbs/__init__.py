"""Desk-scale exact numerics for Gibbs samplers of commuting lattice models.

Dense, eigendecomposition-backed implementations of lattice geometry,
weighted operator algebra, conditional expectations, Lindbladian Gibbs
samplers, entropy functionals, clustering-of-correlations quantities,
high-temperature cluster expansions, and the annealer / concentration /
hypothesis-testing / state-preparation applications built on top of them.
Everything is computed exactly (up to floating point) on small systems so
that definitions, inequalities and closed-form constants can be certified
rather than estimated.
"""

__version__ = "0.1.0"
