"""Valuation functionals, their densities, and the property checkers."""
