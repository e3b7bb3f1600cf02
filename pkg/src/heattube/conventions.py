"""Sign and scale conventions that are pinned by the validation studies.

``curvature_factor``
    coincidence limit of the double layer is ``curvature_factor * kappa * phi``
    with ``kappa`` the signed curvature of :mod:`heattube.geometry`.
``jump_sign``
    interior Neumann trace of a single layer is
    ``jump_sign * q / 2 + K' q``.
``gradient_sign``
    overall sign of the parametric shape gradient.

The shipped values live in ``data/conventions.json`` and are regenerated by
``heattube validate``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from importlib import resources
from pathlib import Path

__all__ = ["Conventions", "load_conventions", "save_conventions", "default_conventions"]


@dataclass(frozen=True)
class Conventions:
    curvature_factor: float = 0.5
    jump_sign: int = 1
    gradient_sign: int = 1

    def with_(self, **kw) -> "Conventions":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


def load_conventions(path=None) -> Conventions:
    if path is None:
        text = resources.files("heattube").joinpath("data/conventions.json").read_text()
    else:
        text = Path(path).read_text()
    raw = json.loads(text)
    unknown = set(raw) - set(Conventions.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown convention keys: {sorted(unknown)}")
    return Conventions(**raw)


def save_conventions(conv: Conventions, path) -> None:
    Path(path).write_text(json.dumps(conv.to_dict(), indent=2) + "\n")


_default = None


def default_conventions() -> Conventions:
    global _default
    if _default is None:
        _default = load_conventions()
    return _default
