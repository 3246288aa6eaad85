"""Concentration function ``C(x) = E(V(x), B(x))`` through a one-parameter table.

In the plane the scaling law of the limiting energy gives

    E(V, B) = V^(2/(p-2)) * e(B / V),        e(b) := E(1, b),

so the whole map is read off a table of ``e`` on ``b >= 0`` (``e(-b) = e(b)``
by complex conjugation).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, TableRangeError
from .instance import ProblemInstance
from .limiting import LimitingSpec, SolverConfig, charge_and_moment, default_grid, minimize_quotient

log = logging.getLogger(__name__)


def curl_at(A, x, h_curl=None, domain=None) -> float:
    """Scalar field ``d1 A2 - d2 A1`` at ``x``.

    Uses the preset's exact curl when it has one; otherwise central
    differences with step ``h_curl`` (default ``1e-4 * diam(domain)``).
    """
    x1, x2 = map(float, x)
    if hasattr(A, "field") and not getattr(A, "is_vector", False) and h_curl is None:
        return float(A.field(x1, x2))
    if h_curl is None:
        h_curl = 1e-4 * (domain.diameter if domain is not None else 1.0)
    if domain is not None and not (
        domain.xmin <= x1 - h_curl and x1 + h_curl <= domain.xmax
        and domain.ymin <= x2 - h_curl and x2 + h_curl <= domain.ymax
    ):
        raise DomainError(f"curl stencil at {x} leaves the domain")
    a2p = A(x1 + h_curl, x2)[1]
    a2m = A(x1 - h_curl, x2)[1]
    a1p = A(x1, x2 + h_curl)[0]
    a1m = A(x1, x2 - h_curl)[0]
    return float((a2p - a2m - a1p + a1m) / (2 * h_curl))


@dataclass(frozen=True, eq=False)
class ReducedTable:
    """Piecewise-linear table of ``e(b) = E(1, b)`` on sorted ``b >= 0``."""

    p: float
    b: np.ndarray
    e: np.ndarray
    records: tuple = field(default=(), repr=False)

    def __post_init__(self):
        b = np.asarray(self.b, float)
        e = np.asarray(self.e, float)
        if b.ndim != 1 or b.shape != e.shape or b.size < 1:
            raise DomainError("table needs matching 1-D node and value arrays")
        if np.any(np.diff(b) <= 0) or b[0] < 0:
            raise DomainError("table nodes must be sorted, distinct and nonnegative")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "e", e)

    @property
    def b_range(self) -> tuple[float, float]:
        return float(self.b[0]), float(self.b[-1])

    def covers(self, b_abs: float) -> bool:
        return self.b[0] <= b_abs <= self.b[-1]

    def __call__(self, b) -> float:
        b_abs = abs(float(b))
        if not self.covers(b_abs):
            raise TableRangeError(
                f"|b| = {b_abs:.6g} is outside the table range [{self.b[0]:.6g}, {self.b[-1]:.6g}]",
                required=(min(b_abs, self.b[0]), max(b_abs, self.b[-1])),
            )
        return float(np.interp(b_abs, self.b, self.e))

    def relative_jumps(self) -> np.ndarray:
        return np.abs(np.diff(self.e)) / np.minimum(self.e[:-1], self.e[1:])

    def to_dict(self) -> dict:
        return {"p": self.p, "b": self.b.tolist(), "e": self.e.tolist(), "records": list(self.records)}

    @classmethod
    def from_dict(cls, d) -> "ReducedTable":
        return cls(float(d["p"]), np.array(d["b"]), np.array(d["e"]), tuple(d.get("records", ())))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "ReducedTable":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _solve_node(p, b, config, seed):
    spec = LimitingSpec(1.0, float(b), p)
    res = minimize_quotient(spec, default_grid(spec, config.n), config, seed)
    if not res.converged:
        raise ConvergenceError(f"limiting solve did not converge at table node b = {b:g} "
                               f"(residual {res.residual:.3e})")
    rec = res.record()
    cm = charge_and_moment(res)
    rec.update(q=cm.q, mu=cm.mu)
    return res.energy, rec


def build_reduced_table(
    p: float,
    b_grid,
    config: SolverConfig | None = None,
    seed: int = 0,
    max_jump: float | None = 0.05,
    max_nodes: int = 200,
) -> ReducedTable:
    """Solve ``E(1, b)`` on ``b_grid`` and bisect intervals whose relative
    jump reaches ``max_jump`` (pass ``None`` to keep the grid as given)."""
    config = config or SolverConfig()
    b_grid = [float(b) for b in b_grid]
    if any(b < 0 for b in b_grid) or any(b1 <= b0 for b0, b1 in zip(b_grid, b_grid[1:])):
        raise DomainError("b_grid must be sorted, distinct and nonnegative")
    nodes = {b: _solve_node(p, b, config, seed) for b in b_grid}
    while max_jump is not None and len(nodes) < max_nodes:
        bs = sorted(nodes)
        es = [nodes[b][0] for b in bs]
        split = [
            0.5 * (b0 + b1)
            for b0, b1, e0, e1 in zip(bs, bs[1:], es, es[1:])
            if abs(e1 - e0) / min(e0, e1) >= max_jump
        ]
        if not split:
            break
        for b in split[: max_nodes - len(nodes)]:
            nodes[b] = _solve_node(p, b, config, seed)
    bs = sorted(nodes)
    return ReducedTable(p, np.array(bs), np.array([nodes[b][0] for b in bs]),
                        tuple(nodes[b][1] for b in bs))


def reduced_field(x, instance: ProblemInstance) -> tuple[float, float]:
    v = float(instance.V(x[0], x[1]))
    if not v > 0:
        raise DomainError(f"V({x}) = {v} is not positive")
    return v, curl_at(instance.A, x, domain=instance.domain)


def concentration_at(x, instance: ProblemInstance, table: ReducedTable) -> float:
    v, b = reduced_field(x, instance)
    return v ** (2 / (instance.p - 2)) * table(b / v)


@dataclass(frozen=True, eq=False)
class ConcentrationMap:
    sample_points: np.ndarray  # (m, 2)
    values: np.ndarray  # (m,)
    V: np.ndarray
    B: np.ndarray
    on_boundary: np.ndarray  # (m,) bool, sample lies on the boundary of the set
    argmin_point: tuple
    argmin_value: float
    boundary_min: float
    shape: tuple | None = None  # (nx, ny) when the set is one rectangle

    @property
    def boundary_hypothesis(self) -> bool:
        """Sampled check of ``inf over the boundary > inf over the set``."""
        return bool(self.boundary_min > self.argmin_value)

    def record(self) -> dict:
        return {
            "argmin_point": list(self.argmin_point),
            "argmin_value": self.argmin_value,
            "boundary_min": self.boundary_min,
            "boundary_hypothesis": self.boundary_hypothesis,
            "samples": int(self.values.size),
        }


def _samples(instance: ProblemInstance, resolution: int):
    pts, bnd = [], []
    for r in instance.lambda_region:
        xs = np.linspace(r.xmin, r.xmax, resolution)
        ys = np.linspace(r.ymin, r.ymax, resolution)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        on_edge = np.zeros(X.shape, bool)
        on_edge[0, :] = on_edge[-1, :] = on_edge[:, 0] = on_edge[:, -1] = True
        pts.append(np.stack([X.ravel(), Y.ravel()], axis=1))
        bnd.append(on_edge.ravel())
    pts = np.concatenate(pts)
    bnd = np.concatenate(bnd)
    # an edge point of one rectangle may be interior to the union: probe a
    # small ring around it against the closed rectangles
    if len(instance.lambda_region) > 1:
        scale = min(min(r.xmax - r.xmin, r.ymax - r.ymin) for r in instance.lambda_region)
        d = 1e-3 * scale / resolution
        interior = np.ones(len(pts), bool)
        for ang in np.linspace(0, 2 * np.pi, 8, endpoint=False):
            qx, qy = pts[:, 0] + d * np.cos(ang), pts[:, 1] + d * np.sin(ang)
            inside = np.zeros(len(pts), bool)
            for r in instance.lambda_region:
                inside |= r.contains(qx, qy, strict=False)
            interior &= inside
        bnd &= ~interior
    return pts, bnd


def scan_concentration(instance: ProblemInstance, resolution: int, table: ReducedTable) -> ConcentrationMap:
    if resolution < 8:
        raise DomainError("scan resolution must be at least 8 per axis")
    pts, bnd = _samples(instance, resolution)
    V = np.empty(len(pts))
    B = np.empty(len(pts))
    C = np.empty(len(pts))
    for k, (x1, x2) in enumerate(pts):
        V[k], B[k] = reduced_field((x1, x2), instance)
        C[k] = V[k] ** (2 / (instance.p - 2)) * table(B[k] / V[k])
    k = int(np.argmin(C))
    shape = (resolution, resolution) if len(instance.lambda_region) == 1 else None
    return ConcentrationMap(
        sample_points=pts, values=C, V=V, B=B, on_boundary=bnd,
        argmin_point=(float(pts[k, 0]), float(pts[k, 1])), argmin_value=float(C[k]),
        boundary_min=float(C[bnd].min()) if bnd.any() else math.inf, shape=shape,
    )


def required_b_range(instance: ProblemInstance, resolution: int) -> tuple[float, float]:
    """Range of ``|B/V|`` met by a scan at this resolution."""
    pts, _ = _samples(instance, resolution)
    ratios = [abs(b) / v for v, b in (reduced_field(x, instance) for x in pts)]
    return float(min(ratios)), float(max(ratios))


def table_grid(b_max: float, step: float = 0.25) -> list[float]:
    """Default node set ``0, step, ...`` reaching at least ``b_max``."""
    n = max(1, int(math.ceil(b_max / step - 1e-12)))
    return [round(k * step, 12) for k in range(n + 1)]
