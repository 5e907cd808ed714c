"""Modelling toolkit for metal-clad dielectric nanodisk cavities and their emitters.

Submodules
----------
materials    Drude and constant permittivities.
eigensolver  Resonant modes of axisymmetric cavities (Q, mode volume, overlap).
purcell      Purcell-enhancement arithmetic and linewidth bookkeeping.
spectra      Lorentzian and exponential fits on a shared least-squares engine.
spinmodel    Rate-equation model of spin-dependent excitation spectra.
config, cli  YAML run configuration and the ``nanopan`` command.
"""

__version__ = "0.1.0"
