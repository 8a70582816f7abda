"""Geometric mechanics on generalized Lie algebroids."""
