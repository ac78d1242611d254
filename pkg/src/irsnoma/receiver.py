"""Zero-forcing detection, receive-polarization selection and SIC SINRs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from .errors import RejectedRealization

__all__ = [
    "DetectionSet",
    "SinrBreakdown",
    "virtual_channels",
    "build_detection",
    "polarization_interference",
    "polarization_interference_sampled",
    "sic_interference",
    "sinr",
    "MAX_CONDITION",
]

MAX_CONDITION = 1e12


@dataclass
class DetectionSet:
    """ZF detectors of one user and the selected receive polarization.

    ``H_under[pq]`` is the virtual channel ``(H~^{pq})^H P~`` from transmit
    polarization ``p`` to receive polarization ``q``. ``H_dagger[q]`` is the
    left pseudo-inverse of the desired-polarization virtual channel seen on
    receive polarization ``q``, or ``None`` when that channel is too badly
    conditioned to invert.
    """

    H_under: Dict[str, np.ndarray]
    H_dagger: Dict[str, Optional[np.ndarray]]
    gains: Dict[str, float]
    best_polarization: str
    user_polarization: str
    group: int

    @property
    def effective_gain(self) -> float:
        return self.gains[self.best_polarization]

    @property
    def H_dagger_v(self):
        return self.H_dagger["v"]

    @property
    def H_dagger_h(self):
        return self.H_dagger["h"]

    @property
    def interfering_polarization(self) -> str:
        return "h" if self.user_polarization == "v" else "v"

    def cross_product(self) -> np.ndarray:
        """``H^{dagger p''} H_under^{t p''}``: how the other subset leaks through."""
        q = self.best_polarization
        return self.H_dagger[q] @ self.H_under[self.interfering_polarization + q]


@dataclass
class SinrBreakdown:
    sinr: np.ndarray
    desired_power: float
    sic_interference: float
    polarization_interference: float
    snr_rho: np.ndarray
    xi: float
    effective_gain: float


def virtual_channels(H_tilde: Dict[str, np.ndarray], P_tilde: np.ndarray) -> Dict[str, np.ndarray]:
    return {pq: H.conj().T @ P_tilde for pq, H in H_tilde.items()}


def _pinv_left(H: np.ndarray) -> Optional[np.ndarray]:
    gram = H.conj().T @ H
    if not np.all(np.isfinite(gram)) or np.linalg.cond(gram) > MAX_CONDITION:
        return None
    return np.linalg.solve(gram, H.conj().T)


def build_detection(H_tilde: Dict[str, np.ndarray], P_tilde: np.ndarray,
                    user_polarization: str, group: int = 0) -> DetectionSet:
    """Detectors on both receive polarizations; keep the one with the larger gain.

    The effective gain on receive polarization ``q`` is
    ``1 / [H^{dagger q} (H^{dagger q})^H]_{gg}``. Ties go to vertical. A
    receive polarization whose Gram matrix has condition number above
    ``MAX_CONDITION`` is skipped; if both are, the draw is rejected.
    """
    if user_polarization not in ("v", "h"):
        raise ValueError(f"polarization must be 'v' or 'h', got {user_polarization!r}")
    Hu = virtual_channels(H_tilde, P_tilde)
    n_rx, n_streams = Hu["vv"].shape
    if n_rx < n_streams:
        raise ValueError(f"need N/2 >= Mbar/2, got {n_rx} < {n_streams}")
    if not 0 <= group < n_streams:
        raise ValueError(f"group {group} out of range for {n_streams} streams")
    daggers: Dict[str, Optional[np.ndarray]] = {}
    gains: Dict[str, float] = {}
    for q in ("v", "h"):
        Hd = _pinv_left(Hu[user_polarization + q])
        daggers[q] = Hd
        if Hd is None:
            gains[q] = 0.0
        else:
            gains[q] = float(1.0 / np.vdot(Hd[group], Hd[group]).real)
    if daggers["v"] is None and daggers["h"] is None:
        raise RejectedRealization("both receive polarizations are ill-conditioned")
    if daggers["v"] is None:
        best = "h"
    elif daggers["h"] is None:
        best = "v"
    else:
        best = "v" if gains["v"] >= gains["h"] else "h"
    return DetectionSet(H_under=Hu, H_dagger=daggers, gains=gains,
                        best_polarization=best, user_polarization=user_polarization,
                        group=group)


def polarization_interference(det: DetectionSet, x_power) -> float:
    """Mean power leaking from the other polarization subset.

    ``sum_n |[H^{dagger p''} H_under^{t p''}]_{g n}|^2 * x_power[n]`` with
    ``x_power[n]`` the superposed power of group ``n`` on the interfering
    polarization (unit-power, independent symbols).
    """
    row = det.cross_product()[det.group]
    return float(np.sum(np.abs(row) ** 2 * np.asarray(x_power, dtype=float)))


def polarization_interference_sampled(det: DetectionSet, amplitudes, n_samples: int,
                                      rng: np.random.Generator) -> float:
    """Monte-Carlo counterpart of :func:`polarization_interference`.

    ``amplitudes[n]`` lists the amplitudes of the interfering subset in
    group ``n``; each user sends an independent unit-power QPSK symbol.
    """
    amplitudes = np.atleast_2d(np.asarray(amplitudes, dtype=float))
    G, n_users = amplitudes.shape
    qpsk = np.exp(1j * (np.pi / 4 + np.pi / 2 * rng.integers(0, 4, size=(n_samples, G, n_users))))
    x_t = np.sum(qpsk * amplitudes[None], axis=2)
    leak = x_t @ det.cross_product()[det.group]
    return float(np.mean(np.abs(leak) ** 2))


def sic_interference(i: int, u: int, subset: Sequence[int], alphas, xi: float) -> float:
    """Interference left when user ``u`` decodes the symbol of user ``i``.

    ``subset`` is ordered weakest-first. Stronger users of the subset are
    still present; weaker ones were removed by SIC up to a residual fraction
    ``xi`` of their power.
    """
    subset = list(subset)
    pi, pu = subset.index(i), subset.index(u)
    if pi > pu:
        raise ValueError(f"user {u} cannot decode the stronger user {i}")
    a2 = np.asarray(alphas, dtype=float) ** 2
    stronger = [m for m in subset[pi + 1:]]
    weaker = [n for n in subset[:pi]]
    if pi == 0:
        return float(np.sum(a2[stronger]))
    if pi == pu == len(subset) - 1:
        return float(xi * np.sum(a2[weaker]))
    return float(np.sum(a2[stronger]) + xi * np.sum(a2[weaker]))


def sinr(det, i: int, u: int, subset: Sequence[int], alphas, xi: float,
         rho, X: float) -> SinrBreakdown:
    """SINR of user ``u`` while decoding the symbol of user ``i``.

    ``gamma = rho h a_i^2 / (rho h I + rho h X + 1)`` with ``h`` the selected
    effective gain, ``I`` the SIC interference and ``X`` the polarization
    interference. ``rho`` may be an array of linear SNRs.
    """
    h = float(det.effective_gain if isinstance(det, DetectionSet) else det)
    rho = np.asarray(rho, dtype=float)
    I = sic_interference(i, u, subset, alphas, xi)
    a2 = float(np.asarray(alphas, dtype=float)[i] ** 2)
    gamma = rho * h * a2 / (rho * h * I + rho * h * X + 1.0)
    return SinrBreakdown(sinr=gamma, desired_power=a2, sic_interference=I,
                         polarization_interference=float(X), snr_rho=rho, xi=xi,
                         effective_gain=h)
