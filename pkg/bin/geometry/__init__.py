"""Spheres, fields on them, and convex bodies."""
