"""Monte-Carlo orchestration: schemes, trials and ergodic-rate reduction."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .channel import (ChannelRealization, ClusterSpatialModel, LinkBudget, StreamKey,
                      assemble_effective_channel, build_one_ring_covariance,
                      draw_channel, draw_single_polarized)
from .config import ScenarioConfig
from .errors import ConfigurationError, RejectedRealization
from .irs import IrsSetting, optimize_user_irs
from .precoder import (PrecoderSet, SubsetAssignment, assign_polarizations,
                       build_cluster_precoder, check_precoder_dims)
from .receiver import (DetectionSet, build_detection, polarization_interference,
                       sic_interference)

log = logging.getLogger(__name__)

__all__ = [
    "RateResult",
    "Scenario",
    "ScenarioResult",
    "UserLink",
    "prepare",
    "run_scenario",
    "simulate_trial",
    "baseline_dp_noma",
    "baseline_sp_noma",
    "baseline_oma",
    "irs_noma",
    "MAX_REJECT_FRACTION",
    "BASELINE_ASSUMPTIONS",
]

MAX_REJECT_FRACTION = 0.01

BASELINE_ASSUMPTIONS = {
    "irs_noma": "dual-polarized BS and users, one IRS per user optimized to null the "
                "other polarization subset, ZF detection with best receive polarization",
    "dp_noma": "same system with the reflected path removed (Theta = 0); cross-polar "
               "leakage from the direct link is left uncancelled",
    "sp_noma": "single-polarized BS with M antennas and users with N/2 antennas (one per "
               "dual-polarized pair position), per-entry variance zeta, one stream per group "
               "carrying all U users, ZF detection, no polarization terms",
    "oma": "TDMA: each user gets 1/U of the time with full power on its assigned "
           "polarization, direct link only, best receive polarization; the other "
           "polarization is idle so there is no polarization interference",
}


@dataclass
class RateResult:
    """Ergodic rate of one user (1-based label, weakest first) at one SNR."""

    scheme: str
    snr_db: float
    user: int
    ergodic_rate_bpcu: float
    stderr: float
    trials: int
    rejected_trials: int


@dataclass
class Scenario:
    """Trial-invariant state built once per run and shared read-only."""

    cfg: ScenarioConfig
    models: List[ClusterSpatialModel]
    precoder: PrecoderSet
    sp_models: List[ClusterSpatialModel]
    sp_precoder: Optional[PrecoderSet]
    subsets: SubsetAssignment
    budgets: List[LinkBudget]
    rho: np.ndarray

    @property
    def focus_model(self) -> ClusterSpatialModel:
        return self.models[self.cfg.focus_cluster]

    def x_power(self, pol: str) -> np.ndarray:
        """Superposed power per group on polarization ``pol``."""
        a2 = self.subsets.alphas ** 2
        return np.full(self.cfg.G, float(np.sum(a2[self.subsets.subset(pol)])))


def prepare(cfg: ScenarioConfig) -> Scenario:
    """Covariances, precoders and user subsets; raises on infeasible dimensions."""
    half = cfg.M // 2
    models = [build_one_ring_covariance(c, half, cfg.spacing) for c in cfg.clusters]
    ranks = [m.effective_rank for m in models]
    for k in range(cfg.K):
        check_precoder_dims(ranks, k, cfg.Mbar, half)
    precoder, _ = build_cluster_precoder(models, cfg.focus_cluster, cfg.Mbar)

    sp_models: List[ClusterSpatialModel] = []
    sp_precoder = None
    if "sp_noma" in cfg.schemes:
        sp_models = [build_one_ring_covariance(c, cfg.M, cfg.spacing) for c in cfg.clusters]
        sp_ranks = [m.effective_rank for m in sp_models]
        # G streams over M single-polarized antennas, checked as a 2G-wide
        # dual-polarized precoder over M "pairs"
        check_precoder_dims(sp_ranks, cfg.focus_cluster, 2 * cfg.G, cfg.M)
        if cfg.N // 2 < cfg.G:
            raise ConfigurationError("sp_noma needs N/2 >= G receive antennas")
        sp_full, _ = build_cluster_precoder(sp_models, cfg.focus_cluster, 2 * cfg.G)
        sp_precoder = PrecoderSet(P_tilde=sp_full.P_tilde, Mbar=cfg.G)

    geom = cfg.focus_geometry
    budgets = [
        LinkBudget.from_distances(d, geom.irs_user_distance_m, cfg.chi_bs_u, cfg.chi_bs_irs,
                                  cfg.varrho, cfg.eta)
        for d in geom.user_distances_m
    ]
    subsets = assign_polarizations([b.zeta_bs_u for b in budgets], cfg.U,
                                   np.sqrt(np.asarray(cfg.alpha_sq)))
    rho = 10.0 ** (np.asarray(cfg.snr_grid_db, dtype=float) / 10.0)
    return Scenario(cfg=cfg, models=models, precoder=precoder, sp_models=sp_models,
                    sp_precoder=sp_precoder, subsets=subsets, budgets=budgets, rho=rho)


@dataclass
class UserLink:
    """Per-user, per-trial quantities that the SINR needs (SNR-independent)."""

    gain: float
    sic: float
    pol_interference: float
    alpha_sq: float
    residual: float = 0.0
    nonconverged: int = 0

    def rates(self, rho: np.ndarray, time_share: float = 1.0) -> np.ndarray:
        h = self.gain
        gamma = rho * h * self.alpha_sq / (rho * h * self.sic + rho * h * self.pol_interference + 1.0)
        return time_share * np.log2(1.0 + gamma)


def _key(scn: Scenario, trial: int, user: int) -> StreamKey:
    return StreamKey(seed=scn.cfg.seed, trial=trial, cluster=scn.cfg.focus_cluster,
                     group=scn.cfg.focus_group, user=user)


def draw_user(scn: Scenario, trial: int, user: int) -> ChannelRealization:
    cfg = scn.cfg
    return draw_channel(scn.focus_model, scn.budgets[user], cfg.N, cfg.L, _key(scn, trial, user))


def _dual_pol_link(scn: Scenario, real: ChannelRealization, irs: IrsSetting, user: int,
                   xi: float) -> Tuple[UserLink, DetectionSet]:
    pol = scn.subsets.polarization_of(user)
    Ht = assemble_effective_channel(real, irs, scn.focus_model)
    det = build_detection(Ht, scn.precoder.P_tilde, pol, scn.cfg.focus_group)
    other = "h" if pol == "v" else "v"
    X = polarization_interference(det, scn.x_power(other))
    subset = scn.subsets.subset(pol)
    I = sic_interference(user, user, subset, scn.subsets.alphas, xi)
    link = UserLink(gain=det.effective_gain, sic=I, pol_interference=X,
                    alpha_sq=float(scn.subsets.alphas[user] ** 2))
    return link, det


def irs_noma(scn: Scenario, real: ChannelRealization, user: int) -> UserLink:
    """Proposed scheme: optimized IRS, then ZF detection and SIC."""
    pol = scn.subsets.polarization_of(user)
    irs, reports = optimize_user_irs(real, pol, scn.cfg.solver_tol, scn.cfg.solver_max_iter)
    link, _ = _dual_pol_link(scn, real, irs, user, scn.cfg.xi)
    link.residual = sum(r.objective_value for r in reports)
    link.nonconverged = sum(not r.converged for r in reports)
    return link


def baseline_dp_noma(scn: Scenario, real: ChannelRealization, user: int) -> UserLink:
    """Dual-polarized MIMO-NOMA without IRS: reflected path removed."""
    link, _ = _dual_pol_link(scn, real, IrsSetting.zeros(real.n_elements), user, scn.cfg.xi)
    return link


def baseline_oma(scn: Scenario, real: ChannelRealization, user: int) -> UserLink:
    """TDMA with full power; rate carries a ``1/U`` time share at evaluation."""
    link, _ = _dual_pol_link(scn, real, IrsSetting.zeros(real.n_elements), user, 0.0)
    return UserLink(gain=link.gain, sic=0.0, pol_interference=0.0, alpha_sq=1.0)


def baseline_sp_noma(scn: Scenario, trial: int, user: int) -> UserLink:
    """Single-polarized MIMO-NOMA: all U users of the group on one stream."""
    cfg = scn.cfg
    model = scn.sp_models[cfg.focus_cluster]
    D = draw_single_polarized(model, scn.budgets[user].zeta_bs_u, cfg.N // 2, _key(scn, trial, user))
    H_virtual = D.conj().T @ model.sqrt_lambda_UH @ scn.sp_precoder.P_tilde
    gram = H_virtual.conj().T @ H_virtual
    if np.linalg.cond(gram) > 1e12:
        raise RejectedRealization("single-polarized Gram matrix is ill-conditioned")
    Hd = np.linalg.solve(gram, H_virtual.conj().T)
    g = cfg.focus_group
    gain = float(1.0 / np.vdot(Hd[g], Hd[g]).real)
    order = scn.subsets.order
    I = sic_interference(user, user, order, scn.subsets.alphas, cfg.xi)
    return UserLink(gain=gain, sic=I, pol_interference=0.0,
                    alpha_sq=float(scn.subsets.alphas[user] ** 2))


@dataclass
class TrialOutcome:
    trial: int
    rates: Dict[str, Optional[np.ndarray]]   # scheme -> (U, n_snr) or None if rejected
    residual: Optional[np.ndarray] = None    # per-user IRS residual (irs_noma)
    nonconverged: int = 0


def simulate_trial(scn: Scenario, trial: int) -> TrialOutcome:
    cfg = scn.cfg
    schemes = cfg.schemes
    out: Dict[str, Optional[np.ndarray]] = {}
    links: Dict[str, List[UserLink]] = {s: [] for s in schemes}
    failed = set()
    need_dual = any(s in schemes for s in ("irs_noma", "dp_noma", "oma"))
    for u in range(cfg.U):
        real = draw_user(scn, trial, u) if need_dual else None
        for s in schemes:
            if s in failed:
                continue
            try:
                if s == "irs_noma":
                    links[s].append(irs_noma(scn, real, u))
                elif s == "dp_noma":
                    links[s].append(baseline_dp_noma(scn, real, u))
                elif s == "oma":
                    links[s].append(baseline_oma(scn, real, u))
                elif s == "sp_noma":
                    links[s].append(baseline_sp_noma(scn, trial, u))
            except RejectedRealization as exc:
                log.debug("trial %d, scheme %s rejected: %s", trial, s, exc)
                failed.add(s)
    for s in schemes:
        if s in failed:
            out[s] = None
            continue
        share = 1.0 / cfg.U if s == "oma" else 1.0
        out[s] = np.stack([lk.rates(scn.rho, share) for lk in links[s]])
    residual = None
    nonconv = 0
    if "irs_noma" in schemes and "irs_noma" not in failed:
        residual = np.array([lk.residual for lk in links["irs_noma"]])
        nonconv = sum(lk.nonconverged for lk in links["irs_noma"])
    return TrialOutcome(trial=trial, rates=out, residual=residual, nonconverged=nonconv)


@dataclass
class ScenarioResult:
    cfg: ScenarioConfig
    per_trial: Dict[str, np.ndarray]   # scheme -> (trials, U, n_snr); NaN where rejected
    rejected: Dict[str, int]
    residual: Optional[np.ndarray] = None
    nonconverged: int = 0
    wall_time_s: float = 0.0

    @property
    def snr_db(self) -> np.ndarray:
        return np.asarray(self.cfg.snr_grid_db, dtype=float)

    def _accepted(self, scheme: str) -> np.ndarray:
        arr = self.per_trial[scheme]
        ok = ~np.isnan(arr[:, 0, 0])
        return arr[ok]

    def user_rate(self, scheme: str, user: int) -> Tuple[np.ndarray, np.ndarray]:
        """Mean and standard error over trials for a 1-based user label."""
        return _mean_se(self._accepted(scheme)[:, user - 1, :])

    def sum_rate(self, scheme: str) -> Tuple[np.ndarray, np.ndarray]:
        """Group sum-rate (sum over the U users) with its standard error."""
        return _mean_se(self._accepted(scheme).sum(axis=1))

    def rates(self) -> List[RateResult]:
        rows = []
        for s in self.cfg.schemes:
            acc = self._accepted(s)
            for u in range(self.cfg.U):
                mean, se = _mean_se(acc[:, u, :])
                for j, snr in enumerate(self.snr_db):
                    rows.append(RateResult(scheme=s, snr_db=float(snr), user=u + 1,
                                           ergodic_rate_bpcu=float(mean[j]),
                                           stderr=float(se[j]), trials=int(acc.shape[0]),
                                           rejected_trials=self.rejected[s]))
        return rows


def _mean_se(samples: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Column-wise mean and std/sqrt(n); exactly rounded sums keep it order-free."""
    n = samples.shape[0]
    if n == 0:
        nan = np.full(samples.shape[1:], np.nan)
        return nan, nan
    flat = samples.reshape(n, -1)
    means = np.array([math.fsum(flat[:, j]) / n for j in range(flat.shape[1])])
    if n > 1:
        var = np.array([math.fsum((flat[:, j] - means[j]) ** 2) / (n - 1)
                        for j in range(flat.shape[1])])
    else:
        var = np.zeros_like(means)
    se = np.sqrt(var) / math.sqrt(n)
    return means.reshape(samples.shape[1:]), se.reshape(samples.shape[1:])


_WORKER_SCENARIO: Optional[Scenario] = None


def _worker_init(cfg: ScenarioConfig):
    global _WORKER_SCENARIO
    _WORKER_SCENARIO = prepare(cfg)


def _worker_run(trials: Sequence[int]) -> List[TrialOutcome]:
    return [simulate_trial(_WORKER_SCENARIO, t) for t in trials]


def resolve_workers(workers: Optional[int]) -> int:
    if workers is None:
        env = os.environ.get("IRSNOMA_WORKERS")
        workers = int(env) if env else 1
    return max(1, int(workers))


def run_scenario(cfg: ScenarioConfig, workers: Optional[int] = None) -> ScenarioResult:
    """Run every configured scheme over ``cfg.trials`` channel draws.

    Each trial is a pure function of ``(cfg, trial index)``, and reductions
    happen in trial order, so the result does not depend on ``workers``
    (default: ``$IRSNOMA_WORKERS`` or 1).
    """
    t0 = time.perf_counter()
    scn = prepare(cfg)  # fail fast on infeasible dimensions
    workers = resolve_workers(workers)
    trials = list(range(cfg.trials))
    if workers == 1:
        outcomes = [simulate_trial(scn, t) for t in trials]
    else:
        chunks = [trials[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init,
                                 initargs=(cfg,)) as pool:
            outcomes = [o for chunk in pool.map(_worker_run, chunks) for o in chunk]
        outcomes.sort(key=lambda o: o.trial)

    n_snr = len(cfg.snr_grid_db)
    per_trial = {s: np.full((cfg.trials, cfg.U, n_snr), np.nan) for s in cfg.schemes}
    rejected = {s: 0 for s in cfg.schemes}
    residual = np.full((cfg.trials, cfg.U), np.nan) if "irs_noma" in cfg.schemes else None
    nonconv = 0
    for o in outcomes:
        for s, arr in o.rates.items():
            if arr is None:
                rejected[s] += 1
            else:
                per_trial[s][o.trial] = arr
        if o.residual is not None:
            residual[o.trial] = o.residual
        nonconv += o.nonconverged
    for s, n in rejected.items():
        if n > MAX_REJECT_FRACTION * cfg.trials:
            raise RuntimeError(
                f"{s}: {n} of {cfg.trials} trials rejected for ill-conditioned detection "
                f"(limit {MAX_REJECT_FRACTION:.0%}); check N, Mbar and the cluster ranks")
    if nonconv:
        log.warning("%d IRS subproblems hit the iteration limit", nonconv)
    return ScenarioResult(cfg=cfg, per_trial=per_trial, rejected=rejected, residual=residual,
                          nonconverged=nonconv, wall_time_s=time.perf_counter() - t0)
