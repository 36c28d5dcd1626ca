"""Control synthesis and verification for shaped single photons from driven atoms."""

from __future__ import annotations

from .model import AtomKind, Envelope, Task, TaskSpec, make_envelope
from .numerics import TimeGrid

__all__ = ["AtomKind", "Envelope", "Task", "TaskSpec", "TimeGrid", "make_envelope"]
__version__ = "0.1.0"
