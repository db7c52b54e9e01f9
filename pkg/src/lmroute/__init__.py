"""Multi-depot routing with landmark placement for bearing-only localization.

The package couples an exact branch-and-cut solver for the joint
routing/landmark-placement problem with a closed-loop simulator in which
unicycle vehicles follow their routes using only bearing measurements to
the placed landmarks. A FastAPI service exposes the pipeline over HTTP and
the command-line interface acts as a thin client of that service.
"""

__version__ = "0.1.0"

from .instance import Instance, Point, generate_instance  # noqa: F401
