"""One-ring spatial covariance, Karhunen-Loeve reduction and channel draws.

All fast-fading blocks are stored in the reduced (eigen) coordinates of the
cluster covariance. Large-scale gains, cross-polar attenuation and the
``1/sqrt(2)`` energy split are applied once, at draw time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "ClusterGeometry",
    "ClusterSpatialModel",
    "LinkBudget",
    "ChannelRealization",
    "StreamKey",
    "POLS",
    "PAIRS",
    "build_one_ring_covariance",
    "eigendecompose",
    "draw_channel",
    "draw_single_polarized",
    "assemble_effective_channel",
    "complex_normal",
]

POLS = ("v", "h")
PAIRS = ("vv", "vh", "hv", "hh")

# Gauss-Legendre order for the angular integral.
DEFAULT_NODES = 400
# Eigenvalues below this fraction of the largest one are dropped.
RANK_THRESHOLD = 1e-8

# Independent stream ids per channel block, so every block gets its own
# generator and the IRS blocks stay prefix-nested in the element count.
_LINK_IDS = {
    "D_vv": 0, "D_vh": 1, "D_hv": 2, "D_hh": 3,
    "G_vv": 4, "G_vh": 5, "G_hv": 6, "G_hh": 7,
    "S_vv": 8, "S_hh": 9,
    "D_sp": 10,
}


@dataclass(frozen=True)
class ClusterGeometry:
    """Position and extent of one scattering cluster.

    Distances are in meters, the azimuth in degrees measured from the array
    broadside. ``user_distances_m`` holds one BS-to-user distance per user of
    the simulated group, and ``irs_user_distance_m`` the common IRS-to-user
    distance.
    """

    azimuth_deg: float
    distance_bs_m: float = 120.0
    radius_m: float = 30.0
    user_distances_m: Tuple[float, ...] = (135.0, 125.0, 115.0, 105.0)
    irs_user_distance_m: float = 20.0

    def __post_init__(self):
        if not self.radius_m > 0:
            raise ConfigurationError("cluster radius_m must be > 0")
        if not self.distance_bs_m > self.radius_m:
            raise ConfigurationError("cluster distance_bs_m must exceed radius_m")
        if any(not d > 0 for d in self.user_distances_m):
            raise ConfigurationError("user_distances_m must all be > 0")
        if not self.irs_user_distance_m > 0:
            raise ConfigurationError("irs_user_distance_m must be > 0")

    @property
    def angular_spread(self) -> float:
        """Half-width of the angular support in radians."""
        return float(np.arctan(self.radius_m / self.distance_bs_m))


@dataclass
class ClusterSpatialModel:
    covariance: np.ndarray
    eigvecs_Uk: np.ndarray
    eigvals_Lambda_k: np.ndarray
    effective_rank: int
    eigvecs_full: Optional[np.ndarray] = field(default=None, repr=False)
    eigvals_full: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.covariance.shape[0]

    @property
    def sqrt_lambda_UH(self) -> np.ndarray:
        """``Lambda^(1/2) U^H``, the reduced-to-antenna map (r* x M/2)."""
        return np.sqrt(self.eigvals_Lambda_k)[:, None] * self.eigvecs_Uk.conj().T

    @property
    def U_sqrt_lambda(self) -> np.ndarray:
        return self.eigvecs_Uk * np.sqrt(self.eigvals_Lambda_k)[None, :]


@dataclass(frozen=True)
class LinkBudget:
    zeta_bs_u: float
    zeta_bs_irs: float
    zeta_irs_u: float
    chi_bs_u: float
    chi_bs_irs: float
    varrho: float = 2e4
    eta: float = 2.0

    def __post_init__(self):
        for name in ("zeta_bs_u", "zeta_bs_irs", "zeta_irs_u"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        for name in ("chi_bs_u", "chi_bs_irs"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1]")

    @classmethod
    def from_distances(cls, distance_m, irs_user_distance_m, chi_bs_u, chi_bs_irs,
                       varrho=2e4, eta=2.0) -> "LinkBudget":
        # The IRS sits at the same BS distance as the user it serves.
        zeta = varrho * distance_m ** (-eta)
        return cls(
            zeta_bs_u=zeta,
            zeta_bs_irs=zeta,
            zeta_irs_u=irs_user_distance_m ** (-eta),
            chi_bs_u=chi_bs_u,
            chi_bs_irs=chi_bs_irs,
            varrho=varrho,
            eta=eta,
        )


@dataclass
class ChannelRealization:
    """One draw of the fast-fading blocks of a single user.

    ``D[pq]`` is ``r* x N/2`` (BS-U), ``G[pq]`` is ``L x r*`` (BS-IRS) and
    ``S[pp]`` is ``L x N/2`` (IRS-U, co-polar only). Keys are the
    polarization pair ``pq``: from ``p`` at the transmitter to ``q`` at the
    receiver.
    """

    D: Dict[str, np.ndarray]
    G: Dict[str, np.ndarray]
    S: Dict[str, np.ndarray]

    @property
    def rank(self) -> int:
        return self.D["vv"].shape[0]

    @property
    def half_rx(self) -> int:
        return self.D["vv"].shape[1]

    @property
    def n_elements(self) -> int:
        return self.G["vv"].shape[0]

    def truncated(self, L: int) -> "ChannelRealization":
        """The same draw seen by an IRS with only its first ``L`` elements."""
        if L > self.n_elements:
            raise ValueError("cannot grow a realization")
        return ChannelRealization(
            D=dict(self.D),
            G={k: v[:L] for k, v in self.G.items()},
            S={k: v[:L] for k, v in self.S.items()},
        )


@dataclass(frozen=True)
class StreamKey:
    """Counter-style RNG key for one user's draws in one trial.

    Each channel block gets a generator derived from
    ``(seed; trial, cluster, group, user, link)``, so results do not depend
    on the order in which trials are scheduled.
    """

    seed: int
    trial: int = 0
    cluster: int = 0
    group: int = 0
    user: int = 0

    def generator(self, link: str) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=self.seed,
            spawn_key=(self.trial, self.cluster, self.group, self.user, _LINK_IDS[link]),
        )
        return np.random.Generator(np.random.PCG64(ss))


def complex_normal(rng: np.random.Generator, shape: Sequence[int]) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian samples, CN(0, 1).

    Samples are laid out row-major, so drawing more rows from the same
    generator extends (rather than reshuffles) a smaller draw.
    """
    shape = tuple(shape)
    raw = rng.standard_normal(shape + (2,))
    return (raw[..., 0] + 1j * raw[..., 1]) / np.sqrt(2.0)


def eigendecompose(R: np.ndarray, threshold: float = RANK_THRESHOLD):
    """Hermitian eigendecomposition sorted in descending order.

    Eigenvectors follow a fixed phase convention: the first entry with
    non-negligible magnitude is made real and positive.

    Returns
    -------
    (eigvals, eigvecs, rank)
        Full spectrum and eigenvectors, plus the number of eigenvalues above
        ``threshold`` times the largest.
    """
    w, V = np.linalg.eigh(R)
    order = np.argsort(w)[::-1]
    w = w[order]
    V = fix_phase(V[:, order])
    top = w[0] if w.size else 0.0
    rank = int(np.count_nonzero(w > threshold * top)) if top > 0 else 0
    return w, V, rank


def fix_phase(V: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    V = np.array(V, dtype=complex, copy=True)
    for j in range(V.shape[1]):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > tol * max(np.abs(col).max(), 1e-300))
        if nz.size:
            ph = col[nz[0]] / abs(col[nz[0]])
            V[:, j] = col / ph
    return V


def build_one_ring_covariance(geom: ClusterGeometry, half_antennas: int,
                              spacing_wavelengths: float = 0.5,
                              nodes: int = DEFAULT_NODES,
                              threshold: float = RANK_THRESHOLD) -> ClusterSpatialModel:
    """Per-polarization spatial covariance of a ULA seen through a one-ring cluster.

    ``[R]_{m,p}`` averages ``exp(-j 2 pi s (m - p) sin(a))`` uniformly over
    ``a`` in ``[theta - Delta, theta + Delta]`` with ``Delta`` the angular
    half-spread. The average is evaluated with Gauss-Legendre quadrature,
    whose weights sum exactly to the interval length, so the diagonal is one
    to rounding.

    Parameters
    ----------
    geom : ClusterGeometry
    half_antennas : int
        Number of elements per polarization (``M/2``).
    spacing_wavelengths : float
        Element spacing in wavelengths.
    nodes : int
        Quadrature order.
    threshold : float
        Relative eigenvalue cutoff for the effective rank.
    """
    if half_antennas < 1:
        raise ConfigurationError("need at least one antenna per polarization")
    if not spacing_wavelengths > 0:
        raise ConfigurationError("antenna spacing must be > 0")
    x, w = np.polynomial.legendre.leggauss(nodes)
    theta = np.deg2rad(geom.azimuth_deg)
    delta = geom.angular_spread
    angles = theta + delta * x
    # (1/2Delta) * integral = (1/2) * sum_i w_i f(theta + Delta x_i)
    lags = np.arange(half_antennas)
    phase = np.exp(-2j * np.pi * spacing_wavelengths * np.outer(lags, np.sin(angles)))
    first_col = phase @ w / 2.0
    diff = lags[:, None] - lags[None, :]
    R = np.where(diff >= 0, first_col[np.abs(diff)], first_col[np.abs(diff)].conj())
    R = 0.5 * (R + R.conj().T)
    w_full, V_full, rank = eigendecompose(R, threshold)
    return ClusterSpatialModel(
        covariance=R,
        eigvecs_Uk=V_full[:, :rank],
        eigvals_Lambda_k=w_full[:rank].copy(),
        effective_rank=rank,
        eigvecs_full=V_full,
        eigvals_full=w_full,
    )


def draw_channel(model: ClusterSpatialModel, budget: LinkBudget, N: int, L: int,
                 key: StreamKey) -> ChannelRealization:
    """Draw the dual-polarized BS-U, BS-IRS and IRS-U blocks for one user.

    Before scaling every entry is CN(0, 1). Co-polar D and G blocks are
    scaled by ``sqrt(zeta / 2)``, cross-polar ones additionally by
    ``sqrt(chi)`` of their link; S is scaled by ``sqrt(zeta_irs_u)`` and has
    no cross-polar part.
    """
    if N < 2 or N % 2:
        raise ConfigurationError("N must be a positive even number")
    if L < 0:
        raise ConfigurationError("L must be >= 0")
    r = model.effective_rank
    n2 = N // 2
    D, G, S = {}, {}, {}
    for pq in PAIRS:
        cross = pq[0] != pq[1]
        d_scale = np.sqrt(budget.zeta_bs_u / 2.0 * (budget.chi_bs_u if cross else 1.0))
        g_scale = np.sqrt(budget.zeta_bs_irs / 2.0 * (budget.chi_bs_irs if cross else 1.0))
        D[pq] = d_scale * complex_normal(key.generator("D_" + pq), (r, n2))
        G[pq] = g_scale * complex_normal(key.generator("G_" + pq), (L, r))
    for pp in ("vv", "hh"):
        S[pp] = np.sqrt(budget.zeta_irs_u) * complex_normal(key.generator("S_" + pp), (L, n2))
    return ChannelRealization(D=D, G=G, S=S)


def draw_single_polarized(model: ClusterSpatialModel, zeta: float, n_rx: int,
                          key: StreamKey) -> np.ndarray:
    """Reduced BS-U block ``r* x n_rx`` of a single-polarized link, variance ``zeta``."""
    return np.sqrt(zeta) * complex_normal(key.generator("D_sp"), (model.effective_rank, n_rx))


def reflected_block(real: ChannelRealization, irs, p: str, q: str) -> np.ndarray:
    """IRS path from BS polarization ``p`` to receive polarization ``q``.

    ``S^{qq H} (Phi^{vq} G^{pv} + Phi^{hq} G^{ph})``, shape ``N/2 x r*``.
    """
    theta = irs.blocks
    inner = theta["v" + q][:, None] * real.G[p + "v"] + theta["h" + q][:, None] * real.G[p + "h"]
    return real.S[q + q].conj().T @ inner


def assemble_effective_channel(real: ChannelRealization, irs,
                               model: ClusterSpatialModel) -> Dict[str, np.ndarray]:
    """Effective channels ``H~^{pq}`` (``M/2 x N/2``), direct plus reflected.

    ``H~^{pq} = U Lambda^(1/2) [R_{qp}^H + D^{pq}]`` where ``R_{qp}`` is the
    reflected block reaching receive polarization ``q`` from transmit
    polarization ``p``.
    """
    if irs.n_elements != real.n_elements:
        raise ValueError(
            f"IRS has {irs.n_elements} elements, channel has {real.n_elements}")
    if model.effective_rank != real.rank:
        raise ValueError("spatial model rank does not match the channel draw")
    ul = model.U_sqrt_lambda
    out = {}
    for pq in PAIRS:
        p, q = pq
        out[pq] = ul @ (reflected_block(real, irs, p, q).conj().T + real.D[pq])
    return out
