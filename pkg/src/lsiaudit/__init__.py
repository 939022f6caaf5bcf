"""Numerical audit toolkit for a log-Sobolev inequality on submanifolds.

Modules: ``ambient`` (model spaces), ``theta`` (Gaussian volume ratio),
``submanifold`` (discrete curves and meshes), ``functional`` (deficits),
``abp`` (transport-proof audit), ``io`` and ``cli``.
"""

__version__ = "0.1.0"
