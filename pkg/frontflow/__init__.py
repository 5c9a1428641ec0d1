"""Nonlocal level-set front propagation: solvers, fixed-point iteration and diagnostics."""
