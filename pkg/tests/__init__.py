"""
Test suite for momentfield.

Tests cover:
- Activation functions, network files and parameter overrides
- The five moment systems, Kronecker identities and monodromy matrices
- Equilibria, Hopf genericity and bifurcation continuation
- Gillespie ensembles, the master equation, Langevin runs and spectra
- Output files, manifests and the command line
"""
