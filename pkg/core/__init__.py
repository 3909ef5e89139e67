"""
Config models and shared exceptions for the fractional tunneling simulator.
"""
