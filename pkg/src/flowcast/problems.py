"""Registry mapping problem names (as stored in model files) to factories."""

from __future__ import annotations

from typing import Callable

from .burgers import make_burgers_problem
from .ode import IvpProblem

__all__ = ["register_problem", "build_problem", "available_problems"]

_REGISTRY: dict[str, Callable[..., IvpProblem]] = {}


def register_problem(name: str, factory: Callable[..., IvpProblem], replace: bool = False):
    """Register a factory keyword-callable as ``name``; collisions need replace=True."""
    if name in _REGISTRY and not replace:
        raise ValueError(f"problem {name!r} is already registered")
    _REGISTRY[name] = factory


def build_problem(name: str, **options) -> IvpProblem:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY)) or "none"
        raise ValueError(f"unknown problem {name!r} (registered: {known})") from None
    return factory(**options)


def available_problems() -> list[str]:
    return sorted(_REGISTRY)


register_problem("burgers", make_burgers_problem)
