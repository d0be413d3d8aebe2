"""opflow: geometric speed limits for unitary operator flows.

Three layers built on one geometry — a PSD operator metric and the angle/
speed inequality on its sphere:

* :mod:`opflow.opspace` / :mod:`opflow.oqsl` — operator metrics (flat,
  thermal, Kubo), effective projections, and the plain/refined/optimally
  refined speed-limit bounds with saturation diagnostics.
* :mod:`opflow.flows` — Wegner and Toda renormalization flows, dephasing and
  monotonicity diagnostics, the bound-saturating tight Toda family and its
  XY spin-chain embedding.
* :mod:`opflow.krylov` — operator Lanczos, complexity chains, the dispersion
  bound and the closed su(2) family where the trace-subtracted speed limit
  is exactly tight.

:mod:`opflow.cli` exposes all of it as seeded, deterministic experiments.
"""

__version__ = "0.1.0"

from . import fileio, flows, krylov, opspace, oqsl  # noqa: F401
