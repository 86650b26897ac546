"""Tensegrity geometry: nodes, connectivity, member properties and the
three benchmark generators (D-bar, prism, six-bar lander).

Node coordinates are kept as a ``3 x n_n`` matrix ``N``; the flattened
vector form ``n`` stacks the columns, so node ``i`` occupies entries
``3*i .. 3*i + 2`` (0-based everywhere in code and on disk).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

# Steel, as used for every benchmark member.
STEEL_DENSITY = 7850.0  # kg/m^3
STEEL_YOUNGS = 200e9  # Pa
STEEL_YIELD = 300e6  # Pa, metadata only
BAR_OUTER_RADIUS = 0.010  # m
BAR_INNER_RADIUS = 0.008  # m
STRING_RADIUS = 0.002  # m

BAR_AREA = math.pi * (BAR_OUTER_RADIUS**2 - BAR_INNER_RADIUS**2)
STRING_AREA = math.pi * STRING_RADIUS**2


class InvalidParameterError(ValueError):
    """Raised for non-physical generator or structure parameters."""


class DegenerateGeometryError(ValueError):
    """Raised when a member has (numerically) zero length."""

    def __init__(self, member: int, message: str | None = None):
        self.member = member
        super().__init__(message or f"member {member} has zero length")


@dataclass(frozen=True)
class MemberSpec:
    kind: str  # "bar" or "string"
    youngs_modulus: float
    area: float
    density: float
    rest_length: float

    def __post_init__(self):
        if self.kind not in ("bar", "string"):
            raise InvalidParameterError(f"unknown member kind {self.kind!r}")
        for name in ("youngs_modulus", "area", "rest_length"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidParameterError(f"{name} must be positive, got {value}")
        # a massless member is allowed for statics; mass assembly rejects it
        if not (np.isfinite(self.density) and self.density >= 0):
            raise InvalidParameterError(f"density must be non-negative, got {self.density}")

    @property
    def mass(self) -> float:
        return self.density * self.area * self.rest_length


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def connectivity_matrix(pairs: Sequence[tuple[int, int]], n_nodes: int) -> np.ndarray:
    """Signed incidence matrix: -1 at the lower node index, +1 at the higher."""
    C = np.zeros((len(pairs), n_nodes))
    for k, (i, j) in enumerate(pairs):
        i, j = min(i, j), max(i, j)
        C[k, i] = -1.0
        C[k, j] = 1.0
    return C


@dataclass(frozen=True, eq=False)
class Structure:
    """Geometric and material description of a tensegrity.

    ``bars`` and ``strings`` hold node pairs ``(i, j)`` with ``i < j``.
    ``members`` follows the stacked order (bars first, then strings).
    ``actuated`` holds indices into ``strings``.
    """

    nodes: np.ndarray
    bars: tuple[tuple[int, int], ...]
    strings: tuple[tuple[int, int], ...]
    members: tuple[MemberSpec, ...]
    free_nodes: tuple[int, ...]
    actuated: tuple[int, ...] = ()
    name: str = "custom"
    yield_strength: float = STEEL_YIELD
    C: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        N = np.array(self.nodes, dtype=float)
        if N.ndim != 2 or N.shape[0] != 3:
            raise InvalidParameterError(f"nodes must be 3 x n_n, got shape {N.shape}")
        if N.shape[1] < 2 or not np.all(np.isfinite(N)):
            raise InvalidParameterError("need at least two nodes with finite coordinates")
        N.setflags(write=False)
        object.__setattr__(self, "nodes", N)
        n_n = N.shape[1]

        bars = tuple((min(i, j), max(i, j)) for i, j in self.bars)
        strings = tuple((min(i, j), max(i, j)) for i, j in self.strings)
        object.__setattr__(self, "bars", bars)
        object.__setattr__(self, "strings", strings)
        pairs = bars + strings
        for k, (i, j) in enumerate(pairs):
            if i == j:
                raise InvalidParameterError(f"member {k} connects node {i} to itself")
            if not (0 <= i < n_n and 0 <= j < n_n):
                raise InvalidParameterError(f"member {k} references a missing node")
        if len(set(pairs)) != len(pairs):
            raise InvalidParameterError("duplicate members in connectivity")
        used = {i for pair in pairs for i in pair}
        if len(used) != n_n:
            raise InvalidParameterError(f"isolated nodes: {sorted(set(range(n_n)) - used)}")

        members = tuple(self.members)
        if len(members) != len(pairs):
            raise InvalidParameterError("members must match bars + strings in count")
        for k, m in enumerate(members):
            expected = "bar" if k < len(bars) else "string"
            if m.kind != expected:
                raise InvalidParameterError(f"member {k} should be a {expected}")
        object.__setattr__(self, "members", members)

        free = tuple(int(i) for i in self.free_nodes)
        if any(b <= a for a, b in zip(free, free[1:])) or any(not 0 <= i < n_n for i in free):
            raise InvalidParameterError("free_nodes must be strictly increasing node indices")
        object.__setattr__(self, "free_nodes", free)

        act = tuple(int(a) for a in self.actuated)
        if any(not 0 <= a < len(strings) for a in act):
            raise InvalidParameterError("actuated entries must index strings")
        object.__setattr__(self, "actuated", act)

        C = connectivity_matrix(pairs, n_n)
        C.setflags(write=False)
        object.__setattr__(self, "C", C)

    # -- sizes -------------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_bars(self) -> int:
        return len(self.bars)

    @property
    def n_strings(self) -> int:
        return len(self.strings)

    @property
    def n_members(self) -> int:
        return len(self.members)

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        return self.bars + self.strings

    @property
    def Cb(self) -> np.ndarray:
        return self.C[: self.n_bars]

    @property
    def Cs(self) -> np.ndarray:
        return self.C[self.n_bars :]

    # -- per-member vectors (read-only, cached) -----------------------------
    @cached_property
    def youngs(self) -> np.ndarray:
        return _readonly(np.array([m.youngs_modulus for m in self.members]))

    @cached_property
    def areas(self) -> np.ndarray:
        return _readonly(np.array([m.area for m in self.members]))

    @cached_property
    def densities(self) -> np.ndarray:
        return _readonly(np.array([m.density for m in self.members]))

    @cached_property
    def rest_lengths(self) -> np.ndarray:
        return _readonly(np.array([m.rest_length for m in self.members]))

    @cached_property
    def masses(self) -> np.ndarray:
        return _readonly(np.array([m.mass for m in self.members]))

    @cached_property
    def is_string(self) -> np.ndarray:
        return _readonly(np.arange(self.n_members) >= self.n_bars)

    @property
    def actuated_members(self) -> np.ndarray:
        """Stacked member indices of the actuated strings."""
        return self.n_bars + np.array(self.actuated, dtype=int)

    # -- free-node selection ----------------------------------------------
    @cached_property
    def free_dofs(self) -> np.ndarray:
        return _readonly(np.array([3 * i + a for i in self.free_nodes for a in range(3)], dtype=int))

    def selection_matrix(self) -> np.ndarray:
        """The orthogonal index matrix ``E_a`` with ``n_a = E_a.T @ n``."""
        Ea = np.zeros((3 * self.n_nodes, 3 * len(self.free_nodes)))
        Ea[self.free_dofs, np.arange(Ea.shape[1])] = 1.0
        return Ea

    @property
    def n(self) -> np.ndarray:
        """Flattened nodal vector (node-major)."""
        return self.nodes.T.reshape(-1).copy()

    def with_nodes(self, nodes: np.ndarray) -> "Structure":
        return Structure(
            nodes=nodes,
            bars=self.bars,
            strings=self.strings,
            members=self.members,
            free_nodes=self.free_nodes,
            actuated=self.actuated,
            name=self.name,
            yield_strength=self.yield_strength,
        )

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "nodes": self.nodes.T.tolist(),
            "bars": [list(p) for p in self.bars],
            "strings": [list(p) for p in self.strings],
            "free_nodes": list(self.free_nodes),
            "actuated": list(self.actuated),
            "members": [
                {"E": m.youngs_modulus, "A": m.area, "rho": m.density, "l0": m.rest_length}
                for m in self.members
            ],
            "yield_strength": self.yield_strength,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Structure":
        bars = [tuple(p) for p in d["bars"]]
        strings = [tuple(p) for p in d["strings"]]
        members = [
            MemberSpec("bar" if k < len(bars) else "string", m["E"], m["A"], m["rho"], m["l0"])
            for k, m in enumerate(d["members"])
        ]
        nodes = np.asarray(d["nodes"], dtype=float).T
        return cls(
            nodes=nodes,
            bars=tuple(bars),
            strings=tuple(strings),
            members=tuple(members),
            free_nodes=tuple(d.get("free_nodes", range(nodes.shape[1]))),
            actuated=tuple(d.get("actuated", ())),
            name=d.get("name", "custom"),
            yield_strength=d.get("yield_strength", STEEL_YIELD),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "Structure":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def member_geometry(s: Structure, nodes: np.ndarray | None = None):
    """Member lengths and the block-diagonal direction matrix ``b.d.(N C^T)``.

    Returns ``(lengths, U, BD)`` where ``U = N C^T`` holds one member vector
    per column and ``BD`` is ``3 n_e x n_e`` with column ``k`` of ``U`` placed
    in rows ``3k .. 3k+2`` of column ``k``.
    """
    N = s.nodes if nodes is None else np.asarray(nodes, dtype=float)
    U = N @ s.C.T
    lengths = np.linalg.norm(U, axis=0)
    bad = np.flatnonzero(lengths <= 1e-12 * max(1.0, float(np.abs(N).max())))
    if bad.size:
        raise DegenerateGeometryError(int(bad[0]))
    n_e = U.shape[1]
    BD = np.zeros((3 * n_e, n_e))
    for k in range(n_e):
        BD[3 * k : 3 * k + 3, k] = U[:, k]
    return lengths, U, BD


def _steel_members(nodes: np.ndarray, bars, strings) -> tuple[MemberSpec, ...]:
    out = []
    for kind, area, pairs in (("bar", BAR_AREA, bars), ("string", STRING_AREA, strings)):
        for i, j in pairs:
            length = float(np.linalg.norm(nodes[:, j] - nodes[:, i]))
            out.append(MemberSpec(kind, STEEL_YOUNGS, area, STEEL_DENSITY, length))
    return tuple(out)


def _build(name, nodes, bars, strings, actuated) -> Structure:
    nodes = np.asarray(nodes, dtype=float)
    bars = [(min(i, j), max(i, j)) for i, j in bars]
    strings = [(min(i, j), max(i, j)) for i, j in strings]
    return Structure(
        nodes=nodes,
        bars=tuple(bars),
        strings=tuple(strings),
        members=_steel_members(nodes, bars, strings),
        free_nodes=tuple(range(nodes.shape[1])),
        actuated=tuple(actuated),
        name=name,
    )


def generate_dbar(bar_length: float = math.sqrt(2.0)) -> Structure:
    """Planar rhombus of four bars with strings along both diagonals."""
    if not bar_length > 0:
        raise InvalidParameterError("bar_length must be positive")
    a = b = bar_length / math.sqrt(2.0)
    nodes = np.array([[a, 0, 0], [0, b, 0], [-a, 0, 0], [0, -b, 0]], dtype=float).T
    bars = [(0, 1), (1, 2), (2, 3), (0, 3)]
    strings = [(0, 2), (1, 3)]
    return _build("dbar", nodes, bars, strings, actuated=[0, 1])


# initial twist at which the bar/vertical-string wiring below is self-stressable
PRISM_TWIST = -5.0 * math.pi / 6.0


def generate_prism(radius: float = 0.25, height: float = 0.5, twist: float = PRISM_TWIST) -> Structure:
    """Three-bar prism: bars b_i-t_i, vertical strings b_i-t_{i+1}.

    Nodes 0-2 are the bottom triangle, 3-5 the top one. The top triangle is
    rotated by ``twist`` about the z axis relative to the bottom one.
    """
    if not (radius > 0 and height > 0):
        raise InvalidParameterError("radius and height must be positive")
    theta = 2.0 * math.pi * np.arange(3) / 3.0
    bottom = np.c_[radius * np.cos(theta), radius * np.sin(theta), np.zeros(3)]
    top = np.c_[radius * np.cos(theta + twist), radius * np.sin(theta + twist), np.full(3, height)]
    nodes = np.vstack([bottom, top]).T
    bars = [(i, 3 + i) for i in range(3)]
    strings = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]
    strings += [(i, 3 + (i + 1) % 3) for i in range(3)]
    return _build("prism", nodes, bars, strings, actuated=[6, 7, 8])


def _lander_node(axis: int, end: int, offset: int, L: float, d: float) -> np.ndarray:
    p = np.zeros(3)
    p[axis] = end * L / 2.0
    p[(axis + 1) % 3] = offset * d / 2.0
    return p


def generate_lander(bar_length: float = 1.0, separation_ratio: float = 0.5) -> Structure:
    """Six-bar expanded octahedron: three orthogonal pairs of parallel bars.

    Node ``4*axis + 2*o + e`` sits at the end ``e`` (0 -> minus, 1 -> plus)
    along ``axis`` of the bar offset by ``o`` along the next axis.
    """
    if not bar_length > 0:
        raise InvalidParameterError("bar_length must be positive")
    if not 0.0 < separation_ratio < 1.0:
        raise InvalidParameterError("separation_ratio must lie in (0, 1)")
    L, d = bar_length, separation_ratio * bar_length
    sign = (-1, 1)

    def idx(axis, end, offset):
        return 4 * axis + 2 * sign.index(offset) + sign.index(end)

    nodes = np.zeros((3, 12))
    bars = []
    for axis in range(3):
        for offset in sign:
            for end in sign:
                nodes[:, idx(axis, end, offset)] = _lander_node(axis, end, offset, L, d)
            bars.append((idx(axis, -1, offset), idx(axis, 1, offset)))

    strings = set()
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        for end in sign:
            for offset in sign:
                here = idx(a, end, offset)
                for other in sign:
                    # offset-signed ends of both bars parallel to b
                    strings.add(tuple(sorted((here, idx(b, offset, other)))))
                    # both ends of the bar parallel to c lying on our end's side
                    strings.add(tuple(sorted((here, idx(c, other, end)))))
    strings = sorted(strings)
    hub = idx(0, 1, 1)
    act = [
        strings.index(tuple(sorted((hub, idx(1, 1, 1))))),
        strings.index(tuple(sorted((hub, idx(2, 1, 1))))),
    ]
    return _build("lander", nodes, bars, strings, actuated=act)


GENERATORS = {
    "dbar": generate_dbar,
    "prism": generate_prism,
    "lander": generate_lander,
}
