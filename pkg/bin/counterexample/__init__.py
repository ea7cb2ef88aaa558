"""Divergence witness for degree n-1 extensions."""
