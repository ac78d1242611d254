"""Inter-cluster nulling precoder and polarization-domain user multiplexing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .channel import ClusterSpatialModel, eigendecompose, fix_phase
from .errors import ConfigurationError

__all__ = [
    "PrecoderSet",
    "PrecoderWorkspace",
    "SubsetAssignment",
    "build_cluster_precoder",
    "assign_polarizations",
    "build_assignment_vector",
]


@dataclass
class PrecoderSet:
    """Per-polarization precoder ``P~_k``; the full one is ``I_2 kron P~_k``."""

    P_tilde: np.ndarray
    Mbar: int

    @property
    def full(self) -> np.ndarray:
        return np.kron(np.eye(2), self.P_tilde)


@dataclass
class PrecoderWorkspace:
    omega_k: np.ndarray
    U0_tilde: np.ndarray
    Xi_tilde: np.ndarray
    U1_bar: np.ndarray


@dataclass
class SubsetAssignment:
    """Split of one group's users into vertical and horizontal subsets.

    User indices are 0-based positions in the configured user list. Both
    subsets are ordered weakest-first (ascending BS-U gain), which is also
    the SIC decoding order. ``alphas`` are amplitudes indexed by user.
    """

    vertical: List[int]
    horizontal: List[int]
    alphas: np.ndarray

    def polarization_of(self, user: int) -> str:
        if user in self.vertical:
            return "v"
        if user in self.horizontal:
            return "h"
        raise KeyError(user)

    def subset_of(self, user: int) -> List[int]:
        return self.vertical if self.polarization_of(user) == "v" else self.horizontal

    def subset(self, pol: str) -> List[int]:
        return self.vertical if pol == "v" else self.horizontal

    @property
    def order(self) -> List[int]:
        """All users weakest-first."""
        merged = [None] * (len(self.vertical) + len(self.horizontal))
        merged[0::2] = self.vertical
        merged[1::2] = self.horizontal
        return merged


def check_precoder_dims(ranks: Sequence[int], k: int, Mbar: int, half_antennas: int):
    """Raise if ``Mbar`` breaks the dimension chain for cluster ``k``."""
    K = len(ranks)
    others = sum(r for i, r in enumerate(ranks) if i != k)
    M = 2 * half_antennas
    if Mbar % 2:
        raise ConfigurationError(f"Mbar must be even, got {Mbar}")
    if Mbar < K:
        raise ConfigurationError(f"K <= Mbar violated (K={K}, Mbar={Mbar})")
    if Mbar > M - 2 * others:
        raise ConfigurationError(
            f"Mbar <= M - 2*sum(other ranks) violated for cluster {k} "
            f"(Mbar={Mbar}, M={M}, sum of other ranks={others})")
    if Mbar > 2 * ranks[k]:
        raise ConfigurationError(
            f"Mbar <= 2*r*_k violated for cluster {k} (Mbar={Mbar}, r*={ranks[k]})")


def build_cluster_precoder(all_models: Sequence[ClusterSpatialModel], k: int,
                           Mbar: int) -> Tuple[PrecoderSet, PrecoderWorkspace]:
    """Null the other clusters' eigenspaces, then focus on cluster ``k``.

    The null space of ``Omega_k = [U_1 .. U_K]`` (cluster ``k`` excluded) is
    spanned by the trailing left singular vectors of ``Omega_k``. Inside it,
    the precoder keeps the ``Mbar/2`` dominant eigenvectors of the projected
    covariance ``U0^H (U_k Lambda_k U_k^H) U0``.
    """
    half = all_models[k].size
    ranks = [m.effective_rank for m in all_models]
    check_precoder_dims(ranks, k, Mbar, half)
    others = [m.eigvecs_Uk for i, m in enumerate(all_models) if i != k]
    if others:
        omega = np.hstack(others)
        n_null = half - omega.shape[1]
        left, _, _ = np.linalg.svd(omega, full_matrices=True)
        U0 = left[:, half - n_null:]
    else:
        omega = np.zeros((half, 0), dtype=complex)
        U0 = np.eye(half, dtype=complex)
    Pi = U0.conj().T @ all_models[k].U_sqrt_lambda
    Xi = Pi @ Pi.conj().T
    Xi = 0.5 * (Xi + Xi.conj().T)
    _, V, _ = eigendecompose(Xi)
    U1 = V[:, : Mbar // 2]
    P_tilde = fix_phase(U0 @ U1)
    return PrecoderSet(P_tilde=P_tilde, Mbar=Mbar), PrecoderWorkspace(
        omega_k=omega, U0_tilde=U0, Xi_tilde=Xi, U1_bar=U1)


def assign_polarizations(zetas: Sequence[float], U: int,
                         alphas: Sequence[float]) -> SubsetAssignment:
    """Sort users by BS-U gain and alternate them between polarizations.

    Odd sorted positions (1st, 3rd, ...) go to the vertical subset, even ones
    to the horizontal subset. ``alphas[r]`` is the amplitude given to the
    user at sorted position ``r`` (weakest first).
    """
    zetas = np.asarray(zetas, dtype=float)
    if U % 2:
        raise ConfigurationError(f"U must be even, got {U}")
    if zetas.shape != (U,) or len(alphas) != U:
        raise ConfigurationError("need one gain and one power coefficient per user")
    if np.unique(zetas).size != U:
        raise ConfigurationError("users must have distinct large-scale gains")
    order = [int(i) for i in np.argsort(zetas, kind="stable")]
    amp = np.empty(U)
    amp[order] = np.asarray(alphas, dtype=float)
    return SubsetAssignment(vertical=order[0::2], horizontal=order[1::2], alphas=amp)


def build_assignment_vector(g: int, u: int, subsets: SubsetAssignment,
                            Mbar: int) -> np.ndarray:
    """Unit selection vector routing user ``u`` of group ``g`` (both 0-based)."""
    half = Mbar // 2
    if not 0 <= g < half:
        raise ConfigurationError(f"group index {g} does not fit in Mbar/2={half} streams")
    v = np.zeros(Mbar)
    offset = 0 if subsets.polarization_of(u) == "v" else half
    v[offset + g] = 1.0
    return v
