"""Mass matrix, tangent stiffness and natural frequencies."""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .numerics import MassMatrixError, gen_sym_eig
from .topology import Structure, member_geometry

if TYPE_CHECKING:
    from .statics import EquilibriumState

ZERO_MODE_RTOL = 1e-6
# Strings within this relative distance of their rest length count as taut.
# Unactuated strings start exactly at their rest length, where round-off
# would otherwise switch their axial stiffness on and off at random.
SLACK_RTOL = 1e-10


@dataclass
class ModalResult:
    frequencies: np.ndarray  # non-zero natural frequencies, rad/s, ascending
    eigenvalues: np.ndarray  # all eigenvalues of K_Taa phi = lam M_aa phi, ascending
    zero_mode_count: int
    unstable_mode_count: int
    mode_shapes: np.ndarray  # columns match ``eigenvalues``

    @property
    def hz_frequencies(self) -> np.ndarray:
        return self.frequencies / (2.0 * np.pi)

    def to_dict(self, mode_shapes: bool = False) -> dict:
        d = {
            "frequencies": self.frequencies.tolist(),
            "hz_frequencies": self.hz_frequencies.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "zero_mode_count": self.zero_mode_count,
            "unstable_mode_count": self.unstable_mode_count,
        }
        if mode_shapes:
            d["mode_shapes"] = self.mode_shapes.tolist()
        return d


def mass_matrix(s: Structure) -> np.ndarray:
    """Consistent mass ``(|C|^T m |C| + diag(|C|^T m |C|)) / 6 kron I_3``."""
    m = s.masses
    if np.any(m <= 0):
        raise MassMatrixError(f"member {int(np.flatnonzero(m <= 0)[0])} has no mass")
    Cabs = np.abs(s.C)
    P = Cabs.T @ (m[:, None] * Cabs)
    return np.kron((P + np.diag(np.diag(P))) / 6.0, np.eye(3))


def tangent_stiffness(
    s: Structure,
    nodes: np.ndarray,
    x: np.ndarray,
    rest_lengths: np.ndarray | None = None,
) -> np.ndarray:
    """``K_T = (C^T x C) kron I_3 + A_1 diag(EA / l^3) A_1^T``.

    The material term is dropped for strings shorter than their rest length
    (slack) when ``rest_lengths`` is given; strings at their rest length up
    to round-off keep it.
    """
    lengths, U, _ = member_geometry(s, nodes)
    x = np.asarray(x, dtype=float)
    laplacian = s.C.T @ (x[:, None] * s.C)
    KT = np.kron(laplacian, np.eye(3))

    k_mat = s.youngs * s.areas / lengths**3
    if rest_lengths is not None:
        slack = s.is_string & (lengths < np.asarray(rest_lengths) * (1.0 - SLACK_RTOL))
        k_mat = np.where(slack, 0.0, k_mat)
    # A_1 column k = kron(C[k], u_k)
    A1 = np.einsum("kn,ik->nik", s.C, U).reshape(3 * s.n_nodes, s.n_members)
    KT += (A1 * k_mat) @ A1.T
    return 0.5 * (KT + KT.T)


def modal_analysis(s: Structure, state: "EquilibriumState", zero_rtol: float = ZERO_MODE_RTOL) -> ModalResult:
    """Solve ``K_Taa phi = omega^2 M_aa phi`` at an equilibrium state.

    Eigenvalues with ``|lam| < zero_rtol * max|lam|`` are rigid-body (zero)
    modes. The remaining ones give ``omega = sqrt(|lam|)``; negative ones are
    counted in ``unstable_mode_count``.
    """
    free = s.free_dofs
    KT = tangent_stiffness(s, state.coords, state.force_density, state.rest_lengths)
    Kaa = KT[np.ix_(free, free)]
    Maa = mass_matrix(s)[np.ix_(free, free)]
    lam, phi = gen_sym_eig(Kaa, Maa)
    scale = np.abs(lam).max()
    zero = np.abs(lam) < zero_rtol * scale
    nonzero = ~zero
    omega = np.sort(np.sqrt(np.abs(lam[nonzero])))
    return ModalResult(
        frequencies=omega,
        eigenvalues=lam,
        zero_mode_count=int(zero.sum()),
        unstable_mode_count=int(np.sum(nonzero & (lam < 0))),
        mode_shapes=phi,
    )
