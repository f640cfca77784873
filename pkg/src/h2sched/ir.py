"""Solver-agnostic optimization problem representation.

A :class:`ProblemIR` collects continuous and binary variables, linear
constraints, concave-quadratic constraints and rotated second-order cones
under a linear objective that is always *maximized*.

Constraint classes:

``LinearConstraint``
    ``sum_j c_j x_j  (<=|>=|==)  rhs``
``QuadraticConstraint``
    ``sum_k a_k x_k^2 + sum_j c_j x_j >= rhs`` with every ``a_k < 0``; the
    feasible set is convex.
``RotatedCone``
    ``(x_r, 1/2, scale * x_q)`` in the 3-d rotated cone, i.e.
    ``scale^2 x_q^2 <= x_r`` and ``x_r >= 0``.

Every variable and constraint carries a ``group`` tag used for counting,
e.g. the constraints a curve formulation adds are tagged ``"curve"``.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp


class IRError(ValueError):
    pass


SENSES = ("<=", ">=", "==")


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float = 0.0
    ub: float = math.inf
    binary: bool = False
    group: str = "base"


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    coeffs: tuple[tuple[int, float], ...]
    sense: str
    rhs: float
    group: str = "base"

    def activity(self, x) -> float:
        return math.fsum(c * float(x[j]) for j, c in self.coeffs)

    def violation(self, x) -> float:
        act = self.activity(x)
        if self.sense == "<=":
            return max(act - self.rhs, 0.0)
        if self.sense == ">=":
            return max(self.rhs - act, 0.0)
        return abs(act - self.rhs)


@dataclass(frozen=True)
class QuadraticConstraint:
    name: str
    squares: tuple[tuple[int, float], ...]
    coeffs: tuple[tuple[int, float], ...]
    rhs: float
    group: str = "base"

    def value(self, x) -> float:
        """Left-hand side minus right-hand side; feasible iff >= 0."""
        q = math.fsum(a * float(x[j]) ** 2 for j, a in self.squares)
        lin = math.fsum(c * float(x[j]) for j, c in self.coeffs)
        return q + lin - self.rhs

    def violation(self, x) -> float:
        return max(-self.value(x), 0.0)


@dataclass(frozen=True)
class RotatedCone:
    name: str
    r: int
    x: int
    scale: float
    group: str = "base"

    def violation(self, x) -> float:
        r = float(x[self.r])
        q = self.scale * float(x[self.x])
        return max(q * q - r, -r, 0.0)


@dataclass
class ProblemIR:
    """Maximize ``objective . x + objective_constant`` subject to the stored constraints.

    ``handles`` maps a symbol name (``"p"``, ``"z_on"``, ``"p_seg"``...) to an
    integer array of variable indices shaped like the symbol's index set.
    ``meta`` holds JSON-serializable model data (plant parameters, curve
    coefficients, horizon layout).
    """

    variables: list[Variable] = field(default_factory=list)
    linear: list[LinearConstraint] = field(default_factory=list)
    quadratic: list[QuadraticConstraint] = field(default_factory=list)
    cones: list[RotatedCone] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    handles: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {v.name: i for i, v in enumerate(self.variables)}
        self._compiled = None

    # -- construction -------------------------------------------------
    def copy(self) -> "ProblemIR":
        new = ProblemIR(
            list(self.variables),
            list(self.linear),
            list(self.quadratic),
            list(self.cones),
            dict(self.objective),
            self.objective_constant,
            {k: v.copy() for k, v in self.handles.items()},
            copy.deepcopy(self.meta),
        )
        return new

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf, binary: bool = False, group: str = "base") -> int:
        if name in self._index:
            raise IRError(f"duplicate variable {name!r}")
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise IRError(f"variable {name!r} has empty bounds [{lb}, {ub}]")
        self.variables.append(Variable(name, float(lb), float(ub), bool(binary), group))
        self._index[name] = len(self.variables) - 1
        self._compiled = None
        return len(self.variables) - 1

    def add_vars(self, symbol: str, shape, lb=0.0, ub=math.inf, binary=False, group="base") -> np.ndarray:
        """Add an array of variables named ``symbol[i,j,...]`` and register the handle."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        idx = np.empty(shape, dtype=np.int64)
        for pos in np.ndindex(*shape):
            label = ",".join(str(i + 1) for i in pos)
            idx[pos] = self.add_var(f"{symbol}[{label}]", lb, ub, binary, group)
        self.handles[symbol] = idx
        return idx

    def _check_refs(self, idxs: Iterable[int]):
        n = len(self.variables)
        for j in idxs:
            if not 0 <= j < n:
                raise IRError(f"constraint references undeclared variable index {j}")

    def add_linear(self, name: str, coeffs: Mapping[int, float], sense: str, rhs: float, group: str = "base") -> None:
        if sense not in SENSES:
            raise IRError(f"unknown sense {sense!r}")
        merged: dict[int, float] = {}
        for j, c in coeffs.items():
            merged[int(j)] = merged.get(int(j), 0.0) + float(c)
        self._check_refs(merged)
        terms = tuple((j, c) for j, c in merged.items() if c != 0.0)
        self.linear.append(LinearConstraint(name, terms, sense, float(rhs), group))
        self._compiled = None

    def add_quadratic(self, name: str, squares: Mapping[int, float], coeffs: Mapping[int, float], rhs: float, group: str = "base") -> None:
        sq = tuple((int(j), float(a)) for j, a in squares.items())
        if any(not a < 0 for _, a in sq):
            raise IRError(f"{name}: square coefficients must be negative for a convex constraint")
        lin = tuple((int(j), float(c)) for j, c in coeffs.items() if c != 0.0)
        self._check_refs([j for j, _ in sq] + [j for j, _ in lin])
        self.quadratic.append(QuadraticConstraint(name, sq, lin, float(rhs), group))
        self._compiled = None

    def add_cone(self, name: str, r: int, x: int, scale: float, group: str = "base") -> None:
        self._check_refs([r, x])
        if not scale > 0:
            raise IRError("cone scale must be positive")
        self.cones.append(RotatedCone(name, int(r), int(x), float(scale), group))
        self._compiled = None

    def add_objective(self, coeffs: Mapping[int, float]) -> None:
        for j, c in coeffs.items():
            self.objective[int(j)] = self.objective.get(int(j), 0.0) + float(c)
        self._compiled = None

    def set_bounds(self, j: int, lb: float | None = None, ub: float | None = None) -> None:
        v = self.variables[j]
        self.variables[j] = Variable(v.name, v.lb if lb is None else float(lb), v.ub if ub is None else float(ub), v.binary, v.group)
        self._compiled = None

    # -- queries ------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def index(self, name: str) -> int:
        return self._index[name]

    def binary_indices(self) -> np.ndarray:
        return np.array([i for i, v in enumerate(self.variables) if v.binary], dtype=np.int64)

    @property
    def has_conic(self) -> bool:
        return bool(self.quadratic or self.cones)

    def objective_value(self, x) -> float:
        return math.fsum(c * float(x[j]) for j, c in self.objective.items()) + self.objective_constant

    def counts(self, group: str | None = None) -> dict[str, int]:
        """Variable and constraint counts, optionally restricted to one group.

        ``conic`` counts squared terms: each becomes one rotated cone.
        """
        sel = (lambda g: True) if group is None else (lambda g: g == group)
        vs = [v for v in self.variables if sel(v.group)]
        return {
            "binary": sum(v.binary for v in vs),
            "continuous": sum(not v.binary for v in vs),
            "linear": sum(1 for c in self.linear if sel(c.group)),
            "conic": sum(len(q.squares) for q in self.quadratic if sel(q.group))
            + sum(1 for c in self.cones if sel(c.group)),
        }

    def compiled(self) -> "CompiledProblem":
        if self._compiled is None:
            self._compiled = CompiledProblem.from_ir(self)
        return self._compiled

    # -- equality / serialization --------------------------------------
    def __eq__(self, other):
        if not isinstance(other, ProblemIR):
            return NotImplemented
        return (
            self.variables == other.variables
            and self.linear == other.linear
            and self.quadratic == other.quadratic
            and self.cones == other.cones
            and self.objective == other.objective
            and self.objective_constant == other.objective_constant
            and self.handles.keys() == other.handles.keys()
            and all(np.array_equal(self.handles[k], other.handles[k]) for k in self.handles)
            and self.meta == other.meta
        )

    def dumps(self) -> str:
        return dumps(self)

    @classmethod
    def loads(cls, text: str) -> "ProblemIR":
        return loads(text)


@dataclass
class CompiledProblem:
    """Array form of an IR for backends.

    Linear rows are stored as ``row_lo <= A x <= row_hi`` (equalities have
    ``row_lo == row_hi``). Quadratic constraints and cones are both turned
    into "concave quadratic >= 0" records ``(sq_idx, sq_coef, lin_idx,
    lin_coef, rhs)``.
    """

    n: int
    c: np.ndarray
    c0: float
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    quad: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float]]
    row_names: list[str]
    quad_names: list[str]

    @classmethod
    def from_ir(cls, ir: ProblemIR) -> "CompiledProblem":
        n = ir.n_vars
        c = np.zeros(n)
        for j, v in ir.objective.items():
            c[j] = v
        lb = np.array([v.lb for v in ir.variables])
        ub = np.array([v.ub for v in ir.variables])
        binary = np.array([v.binary for v in ir.variables], dtype=bool)
        rows, cols, vals = [], [], []
        lo, hi = [], []
        for i, con in enumerate(ir.linear):
            for j, a in con.coeffs:
                rows.append(i)
                cols.append(j)
                vals.append(a)
            lo.append(-math.inf if con.sense == "<=" else con.rhs)
            hi.append(math.inf if con.sense == ">=" else con.rhs)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(len(ir.linear), n))
        quad = []
        for q in ir.quadratic:
            quad.append((
                np.array([j for j, _ in q.squares], dtype=np.int64),
                np.array([a for _, a in q.squares]),
                np.array([j for j, _ in q.coeffs], dtype=np.int64),
                np.array([a for _, a in q.coeffs]),
                q.rhs,
            ))
        for k in ir.cones:
            quad.append((np.array([k.x]), np.array([-k.scale ** 2]), np.array([k.r]), np.array([1.0]), 0.0))
        return cls(
            n, c, ir.objective_constant, lb, ub, binary, A, np.array(lo, dtype=float), np.array(hi, dtype=float),
            quad, [con.name for con in ir.linear], [q.name for q in ir.quadratic] + [k.name for k in ir.cones],
        )

    @property
    def has_conic(self) -> bool:
        return bool(self.quad)


# ---------------------------------------------------------------------------
# Text format
#
#   # h2sched-ir v1
#   [meta]
#   <json>
#   [variables]
#   <name> <lb> <ub> <C|B> <group>
#   [linear]
#   <name> <sense> <rhs> <group> | <j>:<coef> <j>:<coef> ...
#   [quadratic]
#   <name> <rhs> <group> | sq <j>:<a> ... | lin <j>:<c> ...
#   [cones]
#   <name> <r> <x> <scale> <group>
#   [objective]
#   const <c0>
#   <j>:<coef> ...
#   [handles]
#   <symbol> <shape> | <idx> <idx> ...
#
# Floats are written with repr() so reading them back is exact.
# ---------------------------------------------------------------------------

_HEADER = "# h2sched-ir v1"


def _f(x: float) -> str:
    return repr(float(x))


def _terms(terms) -> str:
    return " ".join(f"{j}:{_f(c)}" for j, c in terms)


def _parse_terms(text: str) -> tuple[tuple[int, float], ...]:
    out = []
    for tok in text.split():
        j, c = tok.split(":")
        out.append((int(j), float(c)))
    return tuple(out)


def _check_name(name: str):
    if not name or any(ch.isspace() for ch in name) or "|" in name:
        raise IRError(f"name {name!r} cannot be serialized")


def dumps(ir: ProblemIR) -> str:
    lines = [_HEADER, "[meta]", json.dumps(ir.meta, sort_keys=True), "[variables]"]
    for v in ir.variables:
        _check_name(v.name)
        lines.append(f"{v.name} {_f(v.lb)} {_f(v.ub)} {'B' if v.binary else 'C'} {v.group}")
    lines.append("[linear]")
    for c in ir.linear:
        _check_name(c.name)
        lines.append(f"{c.name} {c.sense} {_f(c.rhs)} {c.group} | {_terms(c.coeffs)}")
    lines.append("[quadratic]")
    for q in ir.quadratic:
        _check_name(q.name)
        lines.append(f"{q.name} {_f(q.rhs)} {q.group} | sq {_terms(q.squares)} | lin {_terms(q.coeffs)}")
    lines.append("[cones]")
    for k in ir.cones:
        _check_name(k.name)
        lines.append(f"{k.name} {k.r} {k.x} {_f(k.scale)} {k.group}")
    lines.append("[objective]")
    lines.append(f"const {_f(ir.objective_constant)}")
    lines.append(_terms(sorted(ir.objective.items())))
    lines.append("[handles]")
    for key in sorted(ir.handles):
        arr = ir.handles[key]
        shape = "x".join(str(s) for s in arr.shape)
        lines.append(f"{key} {shape} | {' '.join(str(int(i)) for i in arr.ravel())}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> ProblemIR:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _HEADER:
        raise IRError("not an h2sched IR document")
    sections: dict[str, list[str]] = {}
    current = None
    for line in lines[1:]:
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
    ir = ProblemIR()
    ir.meta = json.loads(sections["meta"][0]) if sections.get("meta") else {}
    for line in sections.get("variables", []):
        name, lb, ub, kind, group = line.split()
        ir.variables.append(Variable(name, float(lb), float(ub), kind == "B", group))
    for line in sections.get("linear", []):
        head, terms = line.split(" | ", 1) if " | " in line else (line.rstrip(" |"), "")
        name, sense, rhs, group = head.split()
        ir.linear.append(LinearConstraint(name, _parse_terms(terms), sense, float(rhs), group))
    for line in sections.get("quadratic", []):
        head, sq, lin = line.split(" | ")
        name, rhs, group = head.split()
        ir.quadratic.append(QuadraticConstraint(name, _parse_terms(sq[2:]), _parse_terms(lin[3:]), float(rhs), group))
    for line in sections.get("cones", []):
        name, r, x, scale, group = line.split()
        ir.cones.append(RotatedCone(name, int(r), int(x), float(scale), group))
    obj = sections.get("objective", ["const 0.0", ""])
    ir.objective_constant = float(obj[0].split()[1])
    ir.objective = dict(_parse_terms(obj[1] if len(obj) > 1 else ""))
    for line in sections.get("handles", []):
        head, idx = line.split(" | ") if " | " in line else (line.rstrip(" |"), "")
        key, shape = head.split()
        dims = tuple(int(s) for s in shape.split("x")) if shape else ()
        ir.handles[key] = np.array([int(i) for i in idx.split()], dtype=np.int64).reshape(dims)
    ir.__post_init__()
    return ir
