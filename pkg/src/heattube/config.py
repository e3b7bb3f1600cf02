"""Run configuration as a flat ``key = value`` text file.

Blank lines and ``#`` comments are ignored; unknown keys are errors.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

__all__ = ["RunConfig", "ConfigError"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    T: float = 1.0
    exterior_radius: float = 1.0
    n_time: int = 90
    n_space: int = 80
    n_fourier: int = 8
    n_legendre: int = 9
    max_iterations: int = 100
    lbfgs_memory: int = 10
    noise_level: float = 0.01
    seed: int = 0
    initial_radius: float = 0.3
    # synthesis grid; 0 selects n_time + 7 and n_space + 16
    synth_n_time: int = 0
    synth_n_space: int = 0
    grad_tol: float = 1e-8
    misfit_tol: float = 0.0
    # stop when an accepted step lowers J by less than this fraction
    stagnation_tol: float = 1e-12
    armijo_c1: float = 1e-4
    max_line_search: int = 20
    initial_step: float = 1.0
    first_step: float = 0.05
    output_dir: str = "out"
    # validation thresholds
    order_min: float = 1.4
    fd_tol: float = 1e-3
    local_tol: float = 5e-2

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            typ = {"float": float, "int": int, "str": str}[f.type]
            if typ is float and isinstance(val, int):
                val = float(val)
            if not isinstance(val, typ) or isinstance(val, bool):
                raise ConfigError(f"{f.name} must be {f.type}, got {val!r}")
            setattr(self, f.name, val)
        for name in ("n_time", "n_space", "n_fourier", "max_iterations"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.n_legendre < 0 or self.lbfgs_memory < 0 or self.synth_n_time < 0 or self.synth_n_space < 0:
            raise ConfigError("counts must be non-negative")
        if self.T <= 0 or self.exterior_radius <= 0:
            raise ConfigError("T and exterior_radius must be positive")
        if self.noise_level < 0:
            raise ConfigError("noise_level must be non-negative")
        if not 0 < self.initial_radius < self.exterior_radius:
            raise ConfigError("initial_radius must lie in (0, exterior_radius)")

    @property
    def synth_grid(self) -> tuple[int, int]:
        return (self.synth_n_time or self.n_time + 7, self.synth_n_space or self.n_space + 16)

    @property
    def n_parameters(self) -> int:
        return (self.n_legendre + 1) * 2 * self.n_fourier

    def replace(self, **kw) -> "RunConfig":
        d = asdict(self)
        d.update(kw)
        return RunConfig(**d)

    # ------------------------------------------------------------- text I/O

    def dumps(self) -> str:
        return "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in asdict(self).items())

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            try:
                kw[key] = {"float": float, "int": int, "str": str}[types[key]](val)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from exc
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.loads(Path(path).read_text())
