"""Static operators and the regularized Newton form-finding solver."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .numerics import minimize_scalar, solve_spd, sym_eig
from .topology import DegenerateGeometryError, InvalidParameterError, Structure, member_geometry

log = logging.getLogger(__name__)

STANDARD_GRAVITY = 9.80665


class NonConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"no equilibrium after {iterations} iterations (residual {residual:.3e} N)")


class InvalidActuationError(ValueError):
    pass


@dataclass(frozen=True)
class LoadCase:
    """External nodal force (length ``3 n_n``, ``None`` for zero) and optional self-weight."""

    external_force: np.ndarray | None = None
    gravity: bool = False
    gravity_accel: float = STANDARD_GRAVITY

    def check(self, s: Structure) -> None:
        if self.external_force is not None:
            f = np.asarray(self.external_force, dtype=float)
            if f.shape != (3 * s.n_nodes,) or not np.all(np.isfinite(f)):
                raise InvalidParameterError("external_force must be a finite vector of length 3*n_n")
        if self.gravity and len(s.free_nodes) == s.n_nodes:
            raise InvalidParameterError("gravity on a structure without fixed nodes has no static equilibrium")

    def f_ex(self, s: Structure) -> np.ndarray:
        if self.external_force is None:
            return np.zeros(3 * s.n_nodes)
        return np.asarray(self.external_force, dtype=float)

    def g(self, s: Structure) -> np.ndarray:
        """Nodal gravity vector; each member's weight is split evenly between its end nodes."""
        g = np.zeros(3 * s.n_nodes)
        if self.gravity:
            weight = s.masses * self.gravity_accel
            nodal = 0.5 * np.abs(s.C).T @ weight
            g[2::3] = nodal
        return g


NO_LOAD = LoadCase()


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-6
    shift: float = 0.1
    max_iterations: int = 10_000
    line_search_tol: float = 1e-8
    line_search_max_iter: int = 100

    def __post_init__(self):
        if not (self.tolerance > 0 and self.shift > 0 and self.max_iterations >= 1):
            raise InvalidParameterError("tolerance and shift must be positive, max_iterations >= 1")


@dataclass
class EquilibriumState:
    coords: np.ndarray  # 3 x n_n
    force_density: np.ndarray
    member_forces: np.ndarray
    rest_lengths: np.ndarray
    lengths: np.ndarray
    residual_norm: float
    iterations: int
    history: list = field(default_factory=list, repr=False)

    @property
    def n(self) -> np.ndarray:
        return self.coords.T.reshape(-1).copy()

    def to_dict(self) -> dict:
        return {
            "coords": self.coords.T.tolist(),
            "force_density": self.force_density.tolist(),
            "member_forces": self.member_forces.tolist(),
            "rest_lengths": self.rest_lengths.tolist(),
            "lengths": self.lengths.tolist(),
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
        }


def force_density(s: Structure, rest_lengths: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """``x = E A (1/l0 - 1/l)``; strings are clipped at zero when slack."""
    rest = np.asarray(rest_lengths, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    bad = np.flatnonzero(rest <= 0)
    if bad.size:
        raise ZeroDivisionError(f"member {bad[0]} has non-positive rest length {rest[bad[0]]}")
    if np.any(lengths <= 0):
        raise DegenerateGeometryError(int(np.flatnonzero(lengths <= 0)[0]))
    x = s.youngs * s.areas * (1.0 / rest - 1.0 / lengths)
    strings = s.is_string
    x[strings] = np.maximum(x[strings], 0.0)
    return x


def stiffness_matrix(s: Structure, x: np.ndarray) -> np.ndarray:
    """``K = (C^T diag(x) C) kron I_3``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (s.n_members,):
        raise ValueError(f"expected {s.n_members} force densities, got {x.shape}")
    laplacian = s.C.T @ (x[:, None] * s.C)
    return np.kron(laplacian, np.eye(3))


def equilibrium_matrix(s: Structure, nodes: np.ndarray | None = None) -> np.ndarray:
    """``A_t``: column k is the load pattern of a unit tension in member k."""
    lengths, U, _ = member_geometry(s, nodes)
    A = np.zeros((3 * s.n_nodes, s.n_members))
    for k in range(s.n_members):
        A[:, k] = np.kron(s.C[k], U[:, k] / lengths[k])
    return A


def internal_force(s: Structure, nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``K n`` assembled member by member (3 x n_n)."""
    U = np.asarray(nodes) @ s.C.T
    return (U * x) @ s.C


def unbalanced_force(
    s: Structure,
    nodes: np.ndarray,
    x: np.ndarray,
    load: LoadCase = NO_LOAD,
) -> np.ndarray:
    """Free-DOF residual ``E_a^T (f_ex - g - K n)``."""
    Kn = internal_force(s, nodes, x).T.reshape(-1)
    f = load.f_ex(s) - load.g(s) - Kn
    return f[s.free_dofs]


def _strain_energy_terms(s: Structure, lengths, rest) -> np.ndarray:
    stretch = lengths - rest
    strings = s.is_string
    stretch[strings] = np.maximum(stretch[strings], 0.0)
    return s.youngs * s.areas * stretch**2 / (2.0 * rest)


def potential_energy(
    s: Structure,
    nodes: np.ndarray,
    rest_lengths: np.ndarray,
    load: LoadCase = NO_LOAD,
) -> float:
    """Strain energy plus gravity potential minus work of the external force."""
    lengths, _, _ = member_geometry(s, nodes)
    rest = np.asarray(rest_lengths, dtype=float)
    n = np.asarray(nodes).T.reshape(-1)
    V = float(_strain_energy_terms(s, lengths, rest).sum())
    return V - float(load.f_ex(s) @ n) + float(load.g(s) @ n)


def _energy_change(s: Structure, U0, l0, rest, dU, dn, load: LoadCase):
    """``V(n + delta dn) - V(n)`` evaluated without cancellation.

    Near equilibrium the change is many orders of magnitude smaller than the
    stored strain energy, so the length increment is formed from
    ``|u + t v|^2 - |u|^2 = t (2 u.v + t |v|^2)``.
    """
    coef = s.youngs * s.areas / (2.0 * rest)
    bars = ~s.is_string
    uv2 = 2.0 * np.einsum("ik,ik->k", U0, dU)
    vv = np.einsum("ik,ik->k", dU, dU)
    ll = l0 * l0
    b0 = l0 - rest
    e0sq = np.maximum(b0, 0.0) ** 2
    work = float((load.f_ex(s) - load.g(s)) @ dn)

    def dV(t: float) -> float:
        inc = t * (uv2 + t * vv)
        l1 = np.sqrt(ll + inc)
        dl = inc / (l1 + l0)
        b1 = b0 + dl
        # bars and taut strings: (l1 - r)^2 - (l0 - r)^2 = dl (dl + 2 (l0 - r))
        smooth = bars | ((b0 > 0) & (b1 > 0))
        diff = np.where(smooth, dl * (dl + 2.0 * b0), np.maximum(b1, 0.0) ** 2 - e0sq)
        return float(coef @ diff) - t * work

    return dV


def rest_lengths_from_prestress(s: Structure, x0: np.ndarray, nodes: np.ndarray | None = None) -> np.ndarray:
    """Rest lengths that produce force densities ``x0`` at the given geometry.

    Inverts the linear law: ``l0 = E A l / (x0 l + E A)``.
    """
    lengths, _, _ = member_geometry(s, nodes)
    EA = s.youngs * s.areas
    x0 = np.asarray(x0, dtype=float)
    return EA * lengths / (x0 * lengths + EA)


def actuated_rest_lengths(s: Structure, dl0, rest_lengths: np.ndarray | None = None) -> np.ndarray:
    dl0 = np.atleast_1d(np.asarray(dl0, dtype=float))
    if dl0.shape != (len(s.actuated),):
        raise InvalidActuationError(f"expected {len(s.actuated)} rest-length changes, got {dl0.size}")
    rest = (s.rest_lengths if rest_lengths is None else np.asarray(rest_lengths, dtype=float)).copy()
    rest[s.actuated_members] += dl0
    if np.any(rest <= 0):
        raise InvalidActuationError(f"actuation {dl0.tolist()} gives a non-positive rest length")
    return rest


def form_find(
    s: Structure,
    dl0=None,
    load: LoadCase = NO_LOAD,
    cfg: SolverConfig | None = None,
    rest_lengths: np.ndarray | None = None,
    nodes: np.ndarray | None = None,
) -> EquilibriumState:
    """Equilibrium configuration after changing the actuated cables' rest lengths by ``dl0``.

    Newton iteration on the free coordinates. Each step solves with the
    tangent stiffness shifted to be positive definite (by ``mu`` plus the
    magnitude of its most negative eigenvalue), then scales the step by a
    golden-section minimization of the total potential energy on (0, 1].
    ``rest_lengths`` overrides the as-built rest lengths (non-zero prestress)
    and ``nodes`` the starting geometry.
    """
    from .modal import tangent_stiffness

    cfg = cfg or SolverConfig()
    load.check(s)
    if dl0 is None:
        dl0 = np.zeros(len(s.actuated))
    rest = actuated_rest_lengths(s, dl0, rest_lengths)
    N = (s.nodes if nodes is None else np.asarray(nodes, dtype=float)).copy()
    free = s.free_dofs
    n_a = len(free)
    eye = np.eye(n_a)

    lengths, U, _ = member_geometry(s, N)
    x = force_density(s, rest, lengths)
    f_a = unbalanced_force(s, N, x, load)
    res = float(np.linalg.norm(f_a))
    history = []
    it = 0
    while res > cfg.tolerance:
        if it >= cfg.max_iterations:
            raise NonConvergenceError(res, it)
        KT = tangent_stiffness(s, N, x, rest)[np.ix_(free, free)]
        lam = sym_eig(KT)[0][0]
        shift = cfg.shift + abs(lam) if lam < 0 else cfg.shift
        dn_a = solve_spd(KT + shift * eye, f_a)

        dn = np.zeros(3 * s.n_nodes)
        dn[free] = dn_a
        dN = dn.reshape(-1, 3).T
        dV = _energy_change(s, U, lengths, rest, dN @ s.C.T, dn, load)
        delta, dv = minimize_scalar(dV, 0.0, 1.0, cfg.line_search_tol, cfg.line_search_max_iter)

        N = N + delta * dN
        lengths, U, _ = member_geometry(s, N)
        x = force_density(s, rest, lengths)
        f_a = unbalanced_force(s, N, x, load)
        res = float(np.linalg.norm(f_a))
        it += 1
        history.append((res, lam, delta, dv))
        log.debug("iter %d residual %.3e lambda_min %.3e delta %.6f dV %.3e", it, res, lam, delta, dv)

    return EquilibriumState(
        coords=N,
        force_density=x,
        member_forces=x * lengths,
        rest_lengths=rest,
        lengths=lengths,
        residual_norm=res,
        iterations=it,
        history=history,
    )
