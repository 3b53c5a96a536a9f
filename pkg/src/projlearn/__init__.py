"""Null-space projection learning from constrained demonstrations.

The library decomposes observed actions u into a task-space part v and a
null-space part w, assuming u was produced by a controller of the form

    u(x) = A(x)^+ b(x) + N(x) pi(x),    N = I - A^+ A

where the secondary (comfort / ergonomic) policy pi is known ahead of time.
Given demonstrations (x, u) and pi, the constraint matrix A is recovered by
minimising a consistency score that is exactly zero for the true projection.
Learned constraints can then be used to replay the task on the demonstrator
or on a kinematically different arm with a substituted secondary policy.
"""

__version__ = "0.1.0"

from . import constraints, ingest, kinematics, learning, metrics, policies, retarget, simulator

__all__ = [
    "__version__",
    "constraints",
    "ingest",
    "kinematics",
    "learning",
    "metrics",
    "policies",
    "retarget",
    "simulator",
]
