"""Dual-polarized IRS reflection design by interference nulling.

For a user served on polarization ``p`` the IRS must suppress everything the
BS radiates from the other polarization ``t``. With the reflection blocks
written as vectors (their diagonals), the residual reaching each receive
polarization ``q`` is affine in ``[theta^{vq}; theta^{hq}]``:

    vec{ S^{qq H} (Phi^{vq} G^{tv} + Phi^{hq} G^{th}) + D^{tq H} }
        = [G^{tv T} kr S^{qq H},  G^{th T} kr S^{qq H}] theta + vec{D^{tq H}}

(``kr`` is the column-wise Khatri-Rao product), giving two independent
disk-constrained least-squares problems, one per receive polarization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import kernels
from .channel import ChannelRealization, PAIRS

__all__ = [
    "IrsSetting",
    "QclsProblem",
    "SolveReport",
    "khatri_rao",
    "build_subproblems",
    "solve_qcls",
    "solve_qcls_reference",
    "kkt_residual",
    "optimize_user_irs",
    "interference_residual",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 5000
FEAS_TOL = 1e-9


@dataclass
class IrsSetting:
    """Diagonals of the four reflection blocks ``Phi^{pq}`` (``p`` -> ``q``)."""

    theta_vv: np.ndarray
    theta_hv: np.ndarray
    theta_vh: np.ndarray
    theta_hh: np.ndarray

    @classmethod
    def zeros(cls, L: int) -> "IrsSetting":
        z = np.zeros(L, dtype=complex)
        return cls(z, z.copy(), z.copy(), z.copy())

    @property
    def blocks(self) -> Dict[str, np.ndarray]:
        return {"vv": self.theta_vv, "vh": self.theta_vh,
                "hv": self.theta_hv, "hh": self.theta_hh}

    @property
    def n_elements(self) -> int:
        return self.theta_vv.shape[0]

    def matrix(self) -> np.ndarray:
        """The full ``2L x 2L`` reflection matrix."""
        return np.block([[np.diag(self.theta_vv), np.diag(self.theta_hv)],
                         [np.diag(self.theta_vh), np.diag(self.theta_hh)]])

    def max_modulus(self) -> float:
        if self.n_elements == 0:
            return 0.0
        return float(max(np.abs(t).max() for t in self.blocks.values()))


@dataclass
class QclsProblem:
    """``min ||K theta + d||^2  s.t. |theta_l| <= 1``.

    ``rx_pol`` is the receive polarization whose residual this problem
    nulls; its variables are ``[theta^{v rx}; theta^{h rx}]``.
    """

    K_mat: np.ndarray
    d_vec: np.ndarray
    rx_pol: str = "v"
    _gram: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def C_mat(self) -> np.ndarray:
        if self._gram is None:
            self._gram = self.K_mat.conj().T @ self.K_mat
        return self._gram

    @property
    def n_vars(self) -> int:
        return self.K_mat.shape[1]

    def objective(self, theta) -> float:
        r = self.K_mat @ theta + self.d_vec
        return float(np.vdot(r, r).real)

    def gradient(self, theta) -> np.ndarray:
        """``K^H (K theta + d)``, half the real gradient of the objective."""
        return self.K_mat.conj().T @ (self.K_mat @ theta + self.d_vec)


@dataclass
class SolveReport:
    objective_value: float
    kkt_residual: float
    iterations: int
    active_constraints: List[int]
    converged: bool = True
    method: str = "apg"


def khatri_rao(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product: column ``l`` is ``kron(A[:, l], B[:, l])``."""
    if A.shape[1] != B.shape[1]:
        raise ValueError("Khatri-Rao factors need the same number of columns")
    return (A[:, None, :] * B[None, :, :]).reshape(A.shape[0] * B.shape[0], A.shape[1])


def _interfering(user_polarization: str) -> str:
    if user_polarization not in ("v", "h"):
        raise ValueError(f"polarization must be 'v' or 'h', got {user_polarization!r}")
    return "h" if user_polarization == "v" else "v"


def build_subproblems(real: ChannelRealization,
                      user_polarization: str) -> Tuple[QclsProblem, QclsProblem]:
    """The two nulling problems of one user.

    The first problem acts on ``(theta^{vv}, theta^{hv})`` and nulls what
    arrives at the vertical receive antennas; the second acts on
    ``(theta^{vh}, theta^{hh})`` for the horizontal ones.
    """
    t = _interfering(user_polarization)
    problems = []
    for q in ("v", "h"):
        SH = real.S[q + q].conj().T
        K = np.hstack([khatri_rao(real.G[t + "v"].T, SH),
                       khatri_rao(real.G[t + "h"].T, SH)])
        # vec{D^H} (column-major) equals conj(D) flattened row-major
        d = real.D[t + q].conj().ravel()
        problems.append(QclsProblem(K_mat=K, d_vec=d, rx_pol=q))
    return problems[0], problems[1]


def kkt_residual(p: QclsProblem, theta: np.ndarray) -> float:
    """Natural residual ``max_l |theta_l - P(theta_l - g_l)|``.

    Zero exactly at KKT points: free coordinates have zero gradient and
    coordinates on the circle have a gradient pointing inward along
    ``-theta_l`` (outward descent blocked by the constraint).
    """
    if theta.size == 0:
        return 0.0
    g = p.gradient(theta)
    return float(np.abs(theta - kernels.project_disk(theta - g)).max())


def _report(p: QclsProblem, theta, iterations, converged, method) -> SolveReport:
    active = [int(i) for i in np.flatnonzero(np.abs(theta) >= 1.0 - FEAS_TOL)]
    return SolveReport(
        objective_value=p.objective(theta),
        kkt_residual=kkt_residual(p, theta),
        iterations=iterations,
        active_constraints=active,
        converged=converged,
        method=method,
    )


def _lipschitz(K: np.ndarray) -> float:
    if K.size == 0:
        return 0.0
    return float(np.linalg.norm(K, 2) ** 2)


def solve_qcls(p: QclsProblem, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER) -> Tuple[np.ndarray, SolveReport]:
    """Globally solve one disk-constrained least-squares problem.

    The minimum-norm unconstrained minimizer is tried first; when it is
    feasible it is optimal. Otherwise accelerated projected gradient runs
    from its projection onto the feasible set.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    n = p.n_vars
    if n == 0:
        theta = np.zeros(0, dtype=complex)
        return theta, _report(p, theta, 0, True, "empty")
    lip = _lipschitz(p.K_mat)
    if lip == 0.0:
        theta = np.zeros(n, dtype=complex)
        return theta, _report(p, theta, 0, True, "empty")

    theta_ls = -np.linalg.lstsq(p.K_mat, p.d_vec, rcond=None)[0]
    if np.abs(theta_ls).max() <= 1.0:
        rep = _report(p, theta_ls, 0, True, "least_squares")
        if rep.kkt_residual <= tol:
            return theta_ls, rep

    x0 = kernels.project_disk(theta_ls)
    theta, iters, _ = kernels.apg(np.ascontiguousarray(p.K_mat), p.d_vec, x0,
                                  1.0 / lip, tol, max_iter)
    theta = kernels.project_disk(theta)
    rep = _report(p, theta, iters, False, "apg")
    rep.converged = rep.kkt_residual <= tol
    return theta, rep


def solve_qcls_reference(p: QclsProblem, tol: float = 1e-12,
                         max_iter: int = 2_000_000) -> Tuple[np.ndarray, SolveReport]:
    """Slow reference: plain projected gradient with a half step.

    No acceleration, no least-squares warm start; kept deliberately simple so
    it can act as an oracle for :func:`solve_qcls`.
    """
    n = p.n_vars
    theta = np.zeros(n, dtype=complex)
    if n == 0:
        return theta, _report(p, theta, 0, True, "reference")
    step = 0.5 / max(_lipschitz(p.K_mat), 1e-300)
    KH = p.K_mat.conj().T
    for it in range(1, max_iter + 1):
        g = KH @ (p.K_mat @ theta + p.d_vec)
        theta = kernels.project_disk(theta - step * g)
        if it % 16 == 0 and kkt_residual(p, theta) <= tol:
            return theta, _report(p, theta, it, True, "reference")
    return theta, _report(p, theta, max_iter, False, "reference")


def optimize_user_irs(real: ChannelRealization, user_polarization: str,
                      tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
                      ) -> Tuple[IrsSetting, Tuple[SolveReport, SolveReport]]:
    """Reflection blocks that null the interfering polarization for one user."""
    L = real.n_elements
    p_v, p_h = build_subproblems(real, user_polarization)
    th_v, rep_v = solve_qcls(p_v, tol, max_iter)
    th_h, rep_h = solve_qcls(p_h, tol, max_iter)
    irs = IrsSetting(theta_vv=th_v[:L], theta_hv=th_v[L:],
                     theta_vh=th_h[:L], theta_hh=th_h[L:])
    return irs, (rep_v, rep_h)


def interference_residual(real: ChannelRealization, irs: IrsSetting,
                          user_polarization: str) -> float:
    """Squared Frobenius norm of the interfering-polarization blocks after reflection.

    Evaluated directly from the block matrices (no vectorization), in the
    reduced eigen-coordinates of the cluster.
    """
    t = _interfering(user_polarization)
    total = 0.0
    th = irs.blocks
    for q in ("v", "h"):
        blk = real.S[q + q].conj().T @ (th["v" + q][:, None] * real.G[t + "v"]
                                        + th["h" + q][:, None] * real.G[t + "h"])
        blk = blk + real.D[t + q].conj().T
        total += float(np.vdot(blk, blk).real)
    return total
