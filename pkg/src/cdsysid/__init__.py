"""Closed-loop modal sensitivity identification for cross-directional systems."""
