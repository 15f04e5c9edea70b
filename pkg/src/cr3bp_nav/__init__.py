"""Algebraic orbit models and crosslink navigation problems for the CR3BP.

Subpackages:
  dynamics  - rotating-frame equations of motion, periodic orbit generation
  polysys   - sparse complex multivariate polynomials and systems
  fitting   - implicit curve / family fitting of orbit data
  problems  - square parametric systems for crosslink navigation
  homotopy  - continuation solver, degree counting, monodromy
  cli       - command-line pipeline
"""

__version__ = "0.1.0"
