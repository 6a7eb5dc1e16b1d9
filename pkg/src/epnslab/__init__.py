"""Spectral laboratory for a coupled two-phase flow model.

A compressible, electrostatically forced phase exchanges momentum with an
incompressible viscous phase through a drag force.  The package provides:

* :mod:`epnslab.spectral` -- periodic grids, spectral fields and multiplier
  operators (projection, Hodge split, fractional and negative-order powers);
* :mod:`epnslab.propagator` -- the exact Fourier-space solution operator of
  the linearized system, assembled from closed-form eigenvalue symbols;
* :mod:`epnslab.decay` -- whole-space decay-rate measurement by radial
  quadrature over the propagator symbols, plus slope fitting and the
  lower-bound machinery;
* :mod:`epnslab.solver` -- a periodic-box pseudo-spectral integrator that
  uses the exact propagator as an exponential integrator;
* :mod:`epnslab.diagnostics` -- norm ledgers, energy functionals and the
  inequality checks;
* :mod:`epnslab.service` / :mod:`epnslab.cli` -- a FastAPI compute service
  and a thin command-line client.
"""

__version__ = "0.1.0"
