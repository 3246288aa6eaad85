"""Run configuration: a TOML file with one table per subcommand.

Example::

    seed = 0
    output_dir = "out"

    [instance]
    preset = "quadratic-B"        # or domain / lambda / p / V / A written out

    [limiting]
    n = 128

    [sweep]
    eps = [0.1, 0.07, 0.05]

Unknown keys are rejected at every level.  ``dumps(load(text))`` is a fixed
point of ``dumps . loads``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import toml

from .battery import DEFAULT_TOLERANCES, BatteryConfig
from .errors import DomainError
from .harness import SweepConfig
from .instance import PRESETS, ProblemInstance, preset
from .limiting import SolverConfig
from .penalized import PenalizedConfig


class ConfigError(DomainError):
    pass


def _build(cls, d, where):
    if not isinstance(d, dict):
        raise ConfigError(f"[{where}] must be a table")
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


@dataclass
class LimitingSection:
    tol: float = 1e-6
    max_iter: int = 20000
    restarts: int = 4
    n: int = 128
    b_step: float = 0.25
    max_jump: float = 0.05

    def __post_init__(self):
        if not (self.tol > 0 and self.max_iter >= 1 and self.restarts >= 1 and self.n >= 4):
            raise ConfigError("[limiting] needs tol > 0, max_iter >= 1, restarts >= 1, n >= 4")
        if not (self.b_step > 0 and self.max_jump > 0):
            raise ConfigError("[limiting] needs b_step > 0 and max_jump > 0")

    def solver(self) -> SolverConfig:
        return SolverConfig(tol=self.tol, max_iter=self.max_iter, restarts=self.restarts, n=self.n)


@dataclass
class MapSection:
    resolution: int = 41
    table: str = ""  # reduced table JSON; empty builds one

    def __post_init__(self):
        if self.resolution < 8:
            raise ConfigError("[map] resolution must be at least 8")


@dataclass
class SweepSection:
    eps: list = field(default_factory=lambda: [0.1, 0.07, 0.05])
    R: float = 10.0
    annulus: list = field(default_factory=lambda: [5.0, 15.0])
    nodes_per_eps: int = 8
    tol: float = 1e-5
    max_iter: int = 2000
    beta: float = 1.0
    mu_pen: float = 0.5
    x0: list = field(default_factory=list)  # empty: centre of the first rectangle
    rho: float = 0.0  # 0: default
    rho0: float = 0.0

    def __post_init__(self):
        self.eps = [float(e) for e in self.eps]
        if not self.eps or any(e <= 0 for e in self.eps):
            raise ConfigError("[sweep] eps must be a nonempty list of positive numbers")
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ConfigError("[sweep] eps must be strictly decreasing")
        if len(self.annulus) != 2 or not 0 <= self.annulus[0] < self.annulus[1]:
            raise ConfigError("[sweep] annulus must be [r1, r2] with 0 <= r1 < r2 (units of eps)")
        if self.x0 and len(self.x0) != 2:
            raise ConfigError("[sweep] x0 must have two coordinates")
        if not 0 < self.mu_pen < 1 or self.beta <= 0 or self.nodes_per_eps < 2:
            raise ConfigError("[sweep] needs 0 < mu_pen < 1, beta > 0, nodes_per_eps >= 2")

    def sweep_config(self, limiting: LimitingSection, resolution: int, seed: int) -> SweepConfig:
        return SweepConfig(
            R=self.R, annulus=tuple(self.annulus), nodes_per_eps=self.nodes_per_eps,
            map_resolution=resolution, table_step=limiting.b_step, beta=self.beta, mu_pen=self.mu_pen,
            x0=tuple(self.x0) if self.x0 else None, rho=self.rho or None, rho0=self.rho0 or None,
            limiting=limiting.solver(), penalized=PenalizedConfig(tol=self.tol, max_iter=self.max_iter),
            seed=seed,
        )


@dataclass
class VerifySection:
    n: int = 48
    samples: int = 1000
    fields: int = 20
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"[verify.tolerances] unknown invariants: {sorted(unknown)}")

    def battery(self, seed: int) -> BatteryConfig:
        return BatteryConfig(seed=seed, n=self.n, samples=self.samples, fields=self.fields,
                             tolerances=dict(self.tolerances))


@dataclass
class RunConfig:
    instance: dict = field(default_factory=lambda: {"preset": "quadratic-B"})
    seed: int = 0
    output_dir: str = "out"
    limiting: LimitingSection = field(default_factory=LimitingSection)
    map: MapSection = field(default_factory=MapSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    verify: VerifySection = field(default_factory=VerifySection)

    def __post_init__(self):
        self.build_instance()  # validate eagerly

    def build_instance(self) -> ProblemInstance:
        d = dict(self.instance)
        if "preset" in d:
            name = d.pop("preset")
            lam = d.pop("lambda", None)
            if d:
                raise ConfigError(f"[instance] with a preset accepts only 'lambda', got {sorted(d)}")
            if name not in PRESETS:
                raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
            try:
                return preset(name, lam)
            except (DomainError, TypeError) as exc:
                raise ConfigError(f"[instance] {exc}") from exc
        try:
            return ProblemInstance.from_dict(d)
        except KeyError as exc:
            raise ConfigError(f"[instance] missing key {exc}") from exc
        except (DomainError, TypeError, OSError) as exc:
            raise ConfigError(f"[instance] {exc}") from exc

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        top = {f.name for f in fields(cls)}
        unknown = set(d) - top
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        sections = {
            "limiting": LimitingSection, "map": MapSection, "sweep": SweepSection, "verify": VerifySection,
        }
        for name, sc in sections.items():
            if name in d:
                d[name] = _build(sc, d[name], name)
        if "instance" in d and not isinstance(d["instance"], dict):
            raise ConfigError("[instance] must be a table")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def loads(text: str) -> RunConfig:
    try:
        data = toml.loads(text)
    except toml.TomlDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from exc
    return RunConfig.from_dict(data)


def load(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    return loads(path.read_text())


def dumps(config: RunConfig) -> str:
    return toml.dumps(config.to_dict())
