"""Problem instances: domain, concentration set and analytic field presets.

Potentials are small frozen dataclasses, callable on coordinate arrays.  Vector
potentials also carry their exact curl (``field``) so that the concentration
function does not depend on differencing error.  ``to_dict``/``from_dict``
round-trip through the run configuration.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import ClassVar

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError


@dataclass(frozen=True)
class Rect:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise DomainError(f"degenerate rectangle {self}")

    @classmethod
    def from_seq(cls, seq) -> "Rect":
        return cls(*map(float, seq))

    def to_list(self) -> list[float]:
        return [self.xmin, self.xmax, self.ymin, self.ymax]

    def contains(self, x, y, strict=True):
        if strict:
            return (self.xmin < x) & (x < self.xmax) & (self.ymin < y) & (y < self.ymax)
        return (self.xmin <= x) & (x <= self.xmax) & (self.ymin <= y) & (y <= self.ymax)

    def contains_rect(self, other: "Rect") -> bool:
        return (self.xmin <= other.xmin and other.xmax <= self.xmax
                and self.ymin <= other.ymin and other.ymax <= self.ymax)

    def distance_to_boundary(self, point) -> float:
        x, y = point
        return min(x - self.xmin, self.xmax - x, y - self.ymin, self.ymax - y)

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.xmax - self.xmin, self.ymax - self.ymin))

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))


# -- scalar potentials ---------------------------------------------------------

_V_KINDS: dict[str, type] = {}
_A_KINDS: dict[str, type] = {}


def _register(registry):
    def wrap(cls):
        registry[cls.kind] = cls
        return cls

    return wrap


class _Preset:
    kind: ClassVar[str]

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = list(v) if isinstance(v, tuple) else v
        return d


@_register(_V_KINDS)
@dataclass(frozen=True)
class ConstantV(_Preset):
    kind: ClassVar[str] = "constant"
    value: float = 1.0

    def __call__(self, x, y):
        return np.full(np.broadcast(x, y).shape, float(self.value))

    def gradient(self, x, y):
        z = np.zeros(np.broadcast(x, y).shape)
        return z, z


@_register(_V_KINDS)
@dataclass(frozen=True)
class LinearV(_Preset):
    kind: ClassVar[str] = "linear"
    value: float = 1.0
    gradient_vec: tuple = (0.0, 0.0)
    center: tuple = (0.0, 0.0)

    def __call__(self, x, y):
        g1, g2 = self.gradient_vec
        return self.value + g1 * (x - self.center[0]) + g2 * (y - self.center[1])

    def gradient(self, x, y):
        shape = np.broadcast(x, y).shape
        return np.full(shape, float(self.gradient_vec[0])), np.full(shape, float(self.gradient_vec[1]))


@_register(_V_KINDS)
@dataclass(frozen=True)
class QuadraticRadialV(_Preset):
    """``value + curvature * |x - center|^2``."""

    kind: ClassVar[str] = "quadratic_radial"
    value: float = 1.0
    curvature: float = 0.0
    center: tuple = (0.0, 0.0)

    def __call__(self, x, y):
        return self.value + self.curvature * ((x - self.center[0]) ** 2 + (y - self.center[1]) ** 2)

    def gradient(self, x, y):
        return 2 * self.curvature * (x - self.center[0]), 2 * self.curvature * (y - self.center[1])


@_register(_V_KINDS)
@dataclass(frozen=True)
class HarmonicV(_Preset):
    """``value + k1 y1^2 + k2 y2^2`` about ``center``."""

    kind: ClassVar[str] = "harmonic"
    value: float = 1.0
    k: tuple = (0.0, 0.0)
    center: tuple = (0.0, 0.0)

    def __call__(self, x, y):
        return self.value + self.k[0] * (x - self.center[0]) ** 2 + self.k[1] * (y - self.center[1]) ** 2

    def gradient(self, x, y):
        return 2 * self.k[0] * (x - self.center[0]), 2 * self.k[1] * (y - self.center[1])


# -- vector potentials ---------------------------------------------------------


@_register(_A_KINDS)
@dataclass(frozen=True)
class ZeroA(_Preset):
    kind: ClassVar[str] = "zero"

    def __call__(self, x, y):
        z = np.zeros(np.broadcast(x, y).shape)
        return z, z

    def field(self, x, y):
        return np.zeros(np.broadcast(x, y).shape)


@_register(_A_KINDS)
@dataclass(frozen=True)
class ConstantFieldA(_Preset):
    kind: ClassVar[str] = "constant"
    b: float = 0.0
    center: tuple = (0.0, 0.0)
    gauge: str = "symmetric"

    def __post_init__(self):
        if self.gauge not in ("symmetric", "landau"):
            raise DomainError(f"unknown gauge {self.gauge!r}")

    def __call__(self, x, y):
        y1, y2 = x - self.center[0], y - self.center[1]
        if self.gauge == "landau":
            return -self.b * y2, np.zeros(np.broadcast(x, y).shape)
        return -0.5 * self.b * y2, 0.5 * self.b * y1

    def field(self, x, y):
        return np.full(np.broadcast(x, y).shape, float(self.b))


@_register(_A_KINDS)
@dataclass(frozen=True)
class LinearFieldA(_Preset):
    """Field ``b0 + g . (x - center)``; potential ``(0, b0 y1 + g1 y1^2/2 + g2 y1 y2)``."""

    kind: ClassVar[str] = "linear"
    b0: float = 0.0
    gradient_vec: tuple = (0.0, 0.0)
    center: tuple = (0.0, 0.0)

    def __call__(self, x, y):
        y1, y2 = x - self.center[0], y - self.center[1]
        g1, g2 = self.gradient_vec
        return np.zeros(np.broadcast(x, y).shape), self.b0 * y1 + 0.5 * g1 * y1**2 + g2 * y1 * y2

    def field(self, x, y):
        g1, g2 = self.gradient_vec
        return self.b0 + g1 * (x - self.center[0]) + g2 * (y - self.center[1])


@_register(_A_KINDS)
@dataclass(frozen=True)
class QuadraticRadialFieldA(_Preset):
    """Field ``b0 + curvature |x - center|^2`` in a rotationally symmetric gauge."""

    kind: ClassVar[str] = "quadratic_radial"
    b0: float = 0.0
    curvature: float = 1.0
    center: tuple = (0.0, 0.0)

    def __call__(self, x, y):
        y1, y2 = x - self.center[0], y - self.center[1]
        psi = 0.5 * self.b0 + 0.25 * self.curvature * (y1**2 + y2**2)
        return -psi * y2, psi * y1

    def field(self, x, y):
        return self.b0 + self.curvature * ((x - self.center[0]) ** 2 + (y - self.center[1]) ** 2)


@_register(_A_KINDS)
@dataclass(frozen=True)
class HarmonicFieldA(_Preset):
    """Field ``b0 + k1 y1^2 + k2 y2^2``; potential ``(0, b0 y1 + k1 y1^3/3 + k2 y1 y2^2)``."""

    kind: ClassVar[str] = "harmonic"
    b0: float = 0.0
    k: tuple = (0.0, 0.0)
    center: tuple = (0.0, 0.0)

    def __call__(self, x, y):
        y1, y2 = x - self.center[0], y - self.center[1]
        return np.zeros(np.broadcast(x, y).shape), self.b0 * y1 + self.k[0] * y1**3 / 3 + self.k[1] * y1 * y2**2

    def field(self, x, y):
        return self.b0 + self.k[0] * (x - self.center[0]) ** 2 + self.k[1] * (y - self.center[1]) ** 2


@dataclass(frozen=True, eq=False)
class SampledField(_Preset):
    """Field read from an ``.npz`` file with 1-D ``x``, ``y`` and 2-D samples.

    Scalar files carry ``V``; vector files carry ``a1`` and ``a2``.  Values are
    interpolated bilinearly; curls are taken by central differences.
    """

    kind: ClassVar[str] = "sampled"
    path: str = ""

    def __post_init__(self):
        data = np.load(self.path)
        x, y = data["x"], data["y"]
        interp = {}
        for key in ("V", "a1", "a2"):
            if key in data:
                interp[key] = RegularGridInterpolator((x, y), data[key], bounds_error=True)
        if not interp:
            raise DomainError(f"{self.path}: expected arrays V or a1/a2")
        object.__setattr__(self, "_interp", interp)
        object.__setattr__(self, "_h", 1e-4 * float(min(np.ptp(x), np.ptp(y))))

    @property
    def is_vector(self) -> bool:
        return "a1" in self._interp

    def _eval(self, key, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        pts = np.stack([x.ravel(), y.ravel()], axis=-1)
        return self._interp[key](pts).reshape(x.shape)

    def __call__(self, x, y):
        if self.is_vector:
            return self._eval("a1", x, y), self._eval("a2", x, y)
        return self._eval("V", x, y)

    def field(self, x, y):
        h = self._h
        return ((self._eval("a2", x + h, y) - self._eval("a2", x - h, y))
                - (self._eval("a1", x, y + h) - self._eval("a1", x, y - h))) / (2 * h)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "path": self.path}


def _from_dict(registry, d):
    d = dict(d)
    kind = d.pop("kind", None)
    if kind == "sampled":
        unknown = set(d) - {"path"}
        if unknown:
            raise DomainError(f"unknown keys for sampled field: {sorted(unknown)}")
        return SampledField(**d)
    if kind not in registry:
        raise DomainError(f"unknown preset kind {kind!r}; choose from {sorted(registry)} or 'sampled'")
    cls = registry[kind]
    allowed = {f.name for f in fields(cls)}
    unknown = set(d) - allowed
    if unknown:
        raise DomainError(f"unknown keys for {kind!r}: {sorted(unknown)}")
    return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def scalar_potential_from_dict(d) -> object:
    return _from_dict(_V_KINDS, d)


def vector_potential_from_dict(d) -> object:
    return _from_dict(_A_KINDS, d)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    domain: Rect
    lambda_region: tuple
    V: object
    A: object
    p: float = 4.0

    def __post_init__(self):
        lam = self.lambda_region
        if isinstance(lam, Rect):
            lam = (lam,)
        lam = tuple(lam)
        object.__setattr__(self, "lambda_region", lam)
        if not lam:
            raise DomainError("concentration set must be nonempty")
        for r in lam:
            if not self.domain.contains_rect(r):
                raise DomainError(f"concentration set {r} is not inside the domain {self.domain}")
        if not self.p > 2:
            raise DomainError(f"exponent must satisfy p > 2, got {self.p}")
        vmin = min(float(np.min(self.V(*self._lambda_samples(r)))) for r in lam)
        if not vmin > 0:
            raise DomainError(f"inf of V over the concentration set must be positive, got {vmin}")

    @staticmethod
    def _lambda_samples(r: Rect, n=33):
        x, y = np.meshgrid(np.linspace(r.xmin, r.xmax, n), np.linspace(r.ymin, r.ymax, n), indexing="ij")
        return x, y

    @property
    def lambda_is_domain(self) -> bool:
        return len(self.lambda_region) == 1 and self.lambda_region[0] == self.domain

    def in_lambda(self, x, y):
        inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        for r in self.lambda_region:
            inside |= r.contains(x, y, strict=True)
        return inside

    def magnetic_field(self, x, y):
        return self.A.field(x, y)

    def lambda_containing(self, point) -> Rect:
        for r in self.lambda_region:
            if r.contains(point[0], point[1], strict=True):
                return r
        raise DomainError(f"{point} is not inside the concentration set")

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.to_list(),
            "lambda": [r.to_list() for r in self.lambda_region],
            "p": self.p,
            "V": self.V.to_dict(),
            "A": self.A.to_dict(),
        }

    @classmethod
    def from_dict(cls, d) -> "ProblemInstance":
        unknown = set(d) - {"domain", "lambda", "p", "V", "A"}
        if unknown:
            raise DomainError(f"unknown instance keys: {sorted(unknown)}")
        domain = Rect.from_seq(d["domain"])
        lam = tuple(Rect.from_seq(r) for r in d.get("lambda", [d["domain"]]))
        return cls(domain, lam, scalar_potential_from_dict(d["V"]), vector_potential_from_dict(d["A"]),
                   float(d.get("p", 4.0)))


PRESETS = {
    # V = 1, B = 0.5 everywhere
    "constant": {
        "domain": [-2.0, 2.0, -2.0, 2.0],
        "p": 4.0,
        "V": {"kind": "constant", "value": 1.0},
        "A": {"kind": "constant", "b": 0.5, "center": [0.0, 0.0], "gauge": "symmetric"},
    },
    # V = 1, B = 0.1 + |x|^2: concentration at the field minimum
    "quadratic-B": {
        "domain": [-2.0, 2.0, -2.0, 2.0],
        "p": 4.0,
        "V": {"kind": "constant", "value": 1.0},
        "A": {"kind": "quadratic_radial", "b0": 0.1, "curvature": 1.0, "center": [0.0, 0.0]},
    },
    # V and B both critical at the origin
    "lorentz-critical": {
        "domain": [-2.0, 2.0, -2.0, 2.0],
        "p": 4.0,
        "V": {"kind": "quadratic_radial", "value": 1.0, "curvature": 0.25, "center": [0.0, 0.0]},
        "A": {"kind": "quadratic_radial", "b0": 0.2, "curvature": 0.5, "center": [0.0, 0.0]},
    },
}


def preset(name: str, lambda_region=None) -> ProblemInstance:
    if name not in PRESETS:
        raise DomainError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    d = dict(PRESETS[name])
    if lambda_region is not None:
        d["lambda"] = [list(r) for r in lambda_region]
    return ProblemInstance.from_dict(d)
