"""Core shared modules for the band-edge simulator.

Contains centralized configuration, the error hierarchy, scenario parsing,
artifact writers and the seeded worker pool.
"""
