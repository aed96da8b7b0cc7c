"""Rearrangement planning for a car-like pusher in a bounded planar workspace.

The package plans sequences of stable nonprehensile pushes that move a set of
convex polygonal objects to labeled goal poses. Transfers follow
bounded-curvature (Dubins) paths; objects whose direct transfer is blocked can
be prerelocated to an optimized intermediate pose first, and obstructing
objects can be cleared out of the way with short straight pushes. A
backtracking depth-first sequencer assembles full plans, and a benchmark
harness with perturbation suites plus an SVG renderer support evaluation.
"""

__version__ = "0.1.0"
