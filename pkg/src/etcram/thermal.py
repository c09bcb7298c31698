"""Joule heating of the electrothermal gate.

Two models are provided: the lumped areal law P = dT * G * A used for
micron-scale devices, and a 2D steady heat-conduction solve of a
nanoscale heater wire for the length sweep.

The 2D cross-section contains the wire length (x) and depth (y). From top
to bottom it holds a vacuum/air half-space, the wire layer (the wire of
length L centred at x = 0 with vacuum beside it), the device stack and the
substrate. The wire width W = L only enters through the source density
P / (W L t). Left and right edges are held at ambient, top and bottom are
adiabatic, and material interfaces carry a finite conductance.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, replace
from importlib import resources

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import stats

from .device import AMBIENT_K
from .errors import ConvergenceError, DomainError

VACUUM, WIRE, STACK, SUBSTRATE = 1, 2, 3, 4


def lumped_critical_power(delta_t: float, areal_conductance: float, area: float) -> float:
    """Heater power for a rise ``delta_t`` when heat leaves through ``area``."""
    if delta_t < 0 or areal_conductance < 0 or area < 0:
        raise DomainError("lumped model inputs must be >= 0")
    return delta_t * areal_conductance * area


@dataclass(frozen=True)
class ThermalStack:
    wire_length: float = 100e-9
    vacuum_thickness: float = 500e-6
    vacuum_conductivity: float = 0.1
    wire_thickness: float = 5e-9
    wire_conductivity: float = 10.0
    stack_thickness: float = 250e-9
    stack_conductivity: float = 10.0
    substrate_thickness: float = 600e-6
    substrate_conductivity: float = 148.0
    g_vacuum_wire: float = 30.0
    g_wire_stack: float = 1e9
    g_stack_substrate: float = 1e9
    # vacuum resting directly on the stack beside the wire
    g_vacuum_stack: float = 30.0
    ambient: float = AMBIENT_K
    half_width: float = 50e-6

    def __post_init__(self):
        for name, value in asdict(self).items():
            if name == "ambient":
                if not value > 0:
                    raise DomainError("ambient must be > 0 K")
            elif not value > 0:
                raise DomainError(f"{name} must be > 0")
        if self.half_width <= self.wire_length / 2:
            raise DomainError("half_width must exceed half the wire length")

    @classmethod
    def from_dict(cls, d: dict) -> "ThermalStack":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise DomainError(f"unknown stack fields: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})

    @classmethod
    def from_json(cls, path) -> "ThermalStack":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def default(cls) -> "ThermalStack":
        ref = resources.files("etcram.data") / "thermal_stack.json"
        return cls.from_dict(json.loads(ref.read_text()))

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)

    def with_length(self, length: float) -> "ThermalStack":
        return replace(self, wire_length=length)

    def scaled_conductivities(self, k: float) -> "ThermalStack":
        """All conductivities and interface conductances multiplied by ``k``."""
        names = [n for n in asdict(self) if n.endswith("conductivity") or n.startswith("g_")]
        return replace(self, **{n: getattr(self, n) * k for n in names})


@dataclass
class TemperatureField:
    x_faces: np.ndarray
    y_faces: np.ndarray
    rise: np.ndarray  # (ny, nx) kelvin above ambient at cell centres
    domain: np.ndarray  # (ny, nx) labels VACUUM..SUBSTRATE
    power: float
    ambient: float
    grid_levels: int
    depth: float  # out-of-plane width W
    _edge_conductance: np.ndarray  # (ny, 2) left/right cell-to-boundary, per unit depth
    _probe: tuple[int, int]

    @property
    def x(self) -> np.ndarray:
        return 0.5 * (self.x_faces[1:] + self.x_faces[:-1])

    @property
    def y(self) -> np.ndarray:
        return 0.5 * (self.y_faces[1:] + self.y_faces[:-1])

    @property
    def temperature(self) -> np.ndarray:
        # the rise is stored so small values keep full precision
        return self.ambient + self.rise

    def mid_channel(self) -> float:
        """Temperature at the centre of the wire."""
        return float(self.ambient + self.rise[self._probe])

    def mid_channel_rise(self) -> float:
        return float(self.rise[self._probe])

    def boundary_heat_flow(self) -> float:
        """Heat leaving through the fixed-temperature edges, in watts."""
        r = self.rise
        per_depth = np.sum(self._edge_conductance[:, 0] * r[:, 0]) + np.sum(self._edge_conductance[:, 1] * r[:, -1])
        return float(per_depth * self.depth)


def _graded(start: float, stop: float, h0: float, ratio: float) -> np.ndarray:
    """Faces from ``start`` to ``stop`` with spacing h0 growing by ``ratio``.

    Works in either direction; the finest spacing sits at ``start``.
    """
    span = abs(stop - start)
    faces = [0.0]
    h = h0
    while faces[-1] + h < span:
        faces.append(faces[-1] + h)
        h *= ratio
    if len(faces) > 1 and span - faces[-1] < 0.3 * (faces[-1] - faces[-2]):
        faces[-1] = span
    else:
        faces.append(span)
    f = np.array(faces)
    return start + np.sign(stop - start) * f


def _grid(stack: ThermalStack, level: int):
    """Face coordinates at refinement ``level`` (1, 2, 4, ...)."""
    L = stack.wire_length
    ratio = 1.0 + 0.3 / level
    n_wire_x = 10 * level + 1  # odd: one cell sits on the centreline
    h = L / n_wire_x
    right = _graded(L / 2, stack.half_width, h, ratio)
    inner = np.linspace(-L / 2, L / 2, n_wire_x + 1)
    xf = np.concatenate([-right[::-1], inner[1:-1], right])

    y_sub_top = stack.substrate_thickness
    y_stack_top = y_sub_top + stack.stack_thickness
    y_wire_top = y_stack_top + stack.wire_thickness
    h_stack = stack.stack_thickness / (10 * level)
    sub = _graded(y_sub_top, 0.0, h_stack, ratio)[::-1]
    stk = np.linspace(y_sub_top, y_stack_top, 10 * level + 1)
    wire = np.linspace(y_stack_top, y_wire_top, 2 * level + 2)
    vac = _graded(y_wire_top, y_wire_top + stack.vacuum_thickness, stack.wire_thickness, ratio)
    yf = np.concatenate([sub, stk[1:], wire[1:], vac[1:]])
    return xf, yf


def _assemble(stack: ThermalStack, level: int):
    xf, yf = _grid(stack, level)
    xc, yc = 0.5 * (xf[1:] + xf[:-1]), 0.5 * (yf[1:] + yf[:-1])
    dx, dy = np.diff(xf), np.diff(yf)
    nx, ny = xc.size, yc.size
    y_sub_top = stack.substrate_thickness
    y_stack_top = y_sub_top + stack.stack_thickness
    y_wire_top = y_stack_top + stack.wire_thickness
    L = stack.wire_length

    dom = np.full((ny, nx), VACUUM, dtype=np.int8)
    dom[yc < y_sub_top] = SUBSTRATE
    dom[(yc > y_sub_top) & (yc < y_stack_top)] = STACK
    in_wire_layer = (yc > y_stack_top) & (yc < y_wire_top)
    dom[np.ix_(in_wire_layer, np.abs(xc) < L / 2)] = WIRE

    kappa_of = np.zeros(5)
    kappa_of[[VACUUM, WIRE, STACK, SUBSTRATE]] = [
        stack.vacuum_conductivity, stack.wire_conductivity, stack.stack_conductivity, stack.substrate_conductivity,
    ]
    kap = kappa_of[dom]
    inv_g = np.zeros((5, 5))  # interface resistances 1/G, zero inside one material
    for a, b, g in ((VACUUM, WIRE, stack.g_vacuum_wire), (WIRE, STACK, stack.g_wire_stack),
                    (STACK, SUBSTRATE, stack.g_stack_substrate), (VACUUM, STACK, stack.g_vacuum_stack)):
        inv_g[a, b] = inv_g[b, a] = 1.0 / g

    idx = np.arange(nx * ny).reshape(ny, nx)
    # horizontal faces between (a, b) and (a, b+1)
    rh = dx[None, :-1] / 2 / kap[:, :-1] + dx[None, 1:] / 2 / kap[:, 1:] + inv_g[dom[:, :-1], dom[:, 1:]]
    ch = dy[:, None] / rh
    # vertical faces between (a, b) and (a+1, b)
    rv = dy[:-1, None] / 2 / kap[:-1, :] + dy[1:, None] / 2 / kap[1:, :] + inv_g[dom[:-1, :], dom[1:, :]]
    cv = dx[None, :] / rv
    edge = np.stack([dy / (dx[0] / 2 / kap[:, 0]), dy / (dx[-1] / 2 / kap[:, -1])], axis=1)

    diag = np.zeros((ny, nx))
    diag[:, :-1] += ch
    diag[:, 1:] += ch
    diag[:-1, :] += cv
    diag[1:, :] += cv
    diag[:, 0] += edge[:, 0]
    diag[:, -1] += edge[:, 1]
    i = np.concatenate([idx[:, :-1].ravel(), idx[:, 1:].ravel(), idx[:-1, :].ravel(), idx[1:, :].ravel(), idx.ravel()])
    j = np.concatenate([idx[:, 1:].ravel(), idx[:, :-1].ravel(), idx[1:, :].ravel(), idx[:-1, :].ravel(), idx.ravel()])
    v = np.concatenate([-ch.ravel(), -ch.ravel(), -cv.ravel(), -cv.ravel(), diag.ravel()])
    a_mat = sp.csc_matrix((v, (i, j)), shape=(nx * ny, nx * ny))

    # unit total power: per unit depth the wire carries 1 / W
    q_unit = 1.0 / (L * L * stack.wire_thickness)
    src = np.where(dom == WIRE, q_unit * dx[None, :] * dy[:, None], 0.0)

    wire_rows = np.flatnonzero(in_wire_layer)
    probe = (int(wire_rows[len(wire_rows) // 2]), int(np.argmin(np.abs(xc))))
    return xf, yf, dom, a_mat, src, edge, probe


def _unit_field(stack: ThermalStack, level: int) -> TemperatureField:
    xf, yf, dom, a_mat, src, edge, probe = _assemble(stack, level)
    rise = spla.spsolve(a_mat, src.ravel()).reshape(src.shape)
    return TemperatureField(xf, yf, rise, dom, 1.0, stack.ambient, level,
                            stack.wire_length, edge, probe)


def _scaled(field: TemperatureField, power: float) -> TemperatureField:
    return replace(field, rise=power * field.rise, power=power)


def _converged_unit_field(stack: ThermalStack, rel_change: float, max_level: int) -> TemperatureField:
    prev = _unit_field(stack, 1)
    level = 2
    while level <= max_level:
        cur = _unit_field(stack, level)
        a, b = prev.mid_channel_rise(), cur.mid_channel_rise()
        if abs(b - a) <= rel_change * abs(b):
            return cur
        prev = cur
        level *= 2
    raise ConvergenceError(
        f"mid-channel rise still changing by more than {rel_change:.1%} at grid level {max_level}",
        residual=abs(b - a) / abs(b),
        estimates=(a, b),
    )


def solve_temperature(stack: ThermalStack, power: float, rel_change: float = 0.005,
                      max_level: int = 16) -> TemperatureField:
    """Steady temperature field for heater ``power`` (watts).

    The grid is refined by factors of two until the mid-channel rise moves
    by less than ``rel_change``. The problem is linear in the power, so the
    field is solved once at 1 W and scaled.
    """
    if power < 0:
        raise DomainError("power must be >= 0")
    return _scaled(_converged_unit_field(stack, rel_change, max_level), power)


@dataclass(frozen=True)
class CriticalPoint:
    length_m: float
    p_crit_w: float
    grid_levels: int
    rise_per_watt: float


def _critical(stack: ThermalStack, target_rise: float, rel_change: float) -> CriticalPoint:
    if target_rise < 0:
        raise DomainError("target_rise must be >= 0")
    unit = _converged_unit_field(stack, rel_change, 16)
    per_watt = unit.mid_channel_rise()
    if not per_watt > 0:
        raise DomainError("stack produces no temperature rise per watt")
    p = target_rise / per_watt
    if p > 0:
        # independent solve at the predicted power
        _, _, _, a_mat, src, _, probe = _assemble(stack, unit.grid_levels)
        check = spla.spsolve(a_mat, p * src.ravel()).reshape(src.shape)[probe]
        if abs(check - target_rise) > 1e-3 * target_rise:
            raise ConvergenceError("confirmation solve misses the target rise", residual=check - target_rise)
    return CriticalPoint(stack.wire_length, p, unit.grid_levels, per_watt)


def critical_power(stack: ThermalStack, target_rise: float = 300.0, rel_change: float = 0.005) -> float:
    """Heater power that lifts the wire centre by ``target_rise`` kelvin."""
    return _critical(stack, target_rise, rel_change).p_crit_w


def sweep_length(stack: ThermalStack, lengths, target_rise: float = 300.0,
                 rel_change: float = 0.005) -> list[CriticalPoint]:
    """Critical power at each wire length (W = L at every point)."""
    lengths = [float(v) for v in lengths]
    if not lengths:
        raise DomainError("need at least one length")
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise DomainError("lengths must be strictly ascending")
    return [_critical(stack.with_length(L), target_rise, rel_change) for L in lengths]


def curve_minimum(points: list[CriticalPoint]) -> CriticalPoint:
    return min(points, key=lambda p: p.p_crit_w)


def has_interior_minimum(points: list[CriticalPoint]) -> bool:
    """True when the curve falls and then rises again (minimum strictly inside)."""
    i = min(range(len(points)), key=lambda k: points[k].p_crit_w)
    return 0 < i < len(points) - 1


SWEEP_FIELDS = ("length_m", "p_crit_w", "grid_levels", "rise_per_watt")


def write_sweep_csv(points: list[CriticalPoint], dest) -> None:
    """Write to a path or an open text stream."""
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="") as fh:
            return write_sweep_csv(points, fh)
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(SWEEP_FIELDS)
    for p in points:
        w.writerow([repr(p.length_m), repr(p.p_crit_w), p.grid_levels, repr(p.rise_per_watt)])


def fit_power_law(points) -> tuple[float, float, float]:
    """Least-squares P = prefactor * F**exponent in log-log space.

    Returns (exponent, prefactor, standard error of the exponent).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise DomainError("need at least 3 (feature_size, power) points")
    if np.any(pts <= 0):
        raise DomainError("feature sizes and powers must be positive")
    if np.ptp(pts[:, 0]) == 0:
        raise DomainError("feature sizes must not all be equal")
    fit = stats.linregress(np.log(pts[:, 0]), np.log(pts[:, 1]))
    return float(fit.slope), float(math.exp(fit.intercept)), float(fit.stderr)


def lumped_sweep(feature_sizes, delta_t: float, areal_conductance: float, aspect: float = 3.0):
    """(F, P) pairs for heated areas F x aspect*F."""
    return [(float(f), lumped_critical_power(delta_t, areal_conductance, aspect * f * f)) for f in feature_sizes]


def load_power_points(path=None) -> list[tuple[float, float]]:
    """Measured (feature_size_m, power_w) points; the shipped set by default."""
    if path is None:
        text = (resources.files("etcram.data") / "heater_power_scaling.csv").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    rows = list(csv.DictReader(text.splitlines()))
    return [(float(r["feature_size_m"]), float(r["power_w"])) for r in rows]
