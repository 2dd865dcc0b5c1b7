"""Top-level package for the band-edge superradiance simulation modules.

Shared infrastructure lives in `src.core`; the physics lives in
`src.bandedge`.
"""

__version__ = "0.1.0"
