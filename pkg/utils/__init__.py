"""
Shared utilities for the fractional tunneling simulator.
"""
