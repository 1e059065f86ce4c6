"""Monte-Carlo check of how estimation error propagates through removal.

Setup per trial: a true bias direction mu_hat, a clean signal e_tilde
(orthogonal to mu_hat in exact mode), and an estimation error eps
split into a component along mu_hat (fraction f of its norm) and a
perpendicular remainder.  The observed vector is e = e_tilde + mu and
the estimated bias is m = mu + eps.

Full subtraction (R1) then leaves exactly e_tilde - eps: the error
passes through untouched, so gap_r1 is zero to machine precision.
Directional removal (R2) is evaluated in its exact un-expanded form
e - (e . m_hat) m_hat and compared against the first-order prediction
e_tilde - eps_perp: the parallel error cancels and the leftover gap
shrinks quadratically in ||eps|| and inversely in ||mu||.

Each trial draws from its own counter-based stream keyed by
(seed, trial index), so results do not depend on execution order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput
from .rng import stream, unit_vector


@dataclass(frozen=True)
class SimConfig:
    dim: int = 512
    mu_norm: float = 0.8
    eps_norm: float = 0.01
    eps_parallel_fraction: float = 0.7
    signal_norm: float = 0.6
    trials: int = 1000
    seed: int = 0
    # Exact mode draws e_tilde orthogonal to mu_hat and eps_perp
    # orthogonal to both.  Relaxed mode skips the orthogonalization
    # against e_tilde, exercising the assumptions instead of building
    # them in.
    orthogonal_draws: bool = True

    def __post_init__(self):
        if self.dim < 8:
            raise ValueError(f"dim must be >= 8, got {self.dim}")
        if not 0.0 < self.mu_norm <= 1.0:
            raise ValueError(f"mu_norm must be in (0, 1], got {self.mu_norm}")
        if self.eps_norm <= 0.0:
            raise ValueError(f"eps_norm must be > 0, got {self.eps_norm}")
        if self.eps_norm >= self.mu_norm:
            raise ValueError(
                f"eps_norm {self.eps_norm} must stay below mu_norm {self.mu_norm}"
            )
        if not 0.0 <= self.eps_parallel_fraction <= 1.0:
            raise ValueError("eps_parallel_fraction must be in [0, 1]")
        if self.signal_norm <= 0.0:
            raise ValueError(f"signal_norm must be > 0, got {self.signal_norm}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")


@dataclass(frozen=True)
class TrialResult:
    gap_r1: float
    gap_r2: float
    angle_r1: float
    angle_r2: float


@dataclass(frozen=True)
class SimResult:
    mean_residual_gap_r1: float
    mean_residual_gap_r2: float
    mean_angle_r1: float
    mean_angle_r2: float
    max_residual_gap_r1: float
    trials: int


def _angle_to(v: np.ndarray, ref_unit: np.ndarray) -> float:
    """Angle between v and a unit reference, stable for tiny angles."""
    norm = math.sqrt(float((v * v).sum()))
    if norm < 1e-12:
        raise DegenerateInput("cannot measure the angle of a near-zero residual")
    d = v / norm - ref_unit
    half_chord = math.sqrt(float((d * d).sum())) / 2.0
    return 2.0 * math.asin(min(1.0, half_chord))


def run_trial(cfg: SimConfig, trial_index: int) -> TrialResult:
    rng = stream(cfg.seed, trial_index)
    dim = cfg.dim
    mu_hat = unit_vector(rng, dim)

    g = rng.normal(size=dim)
    if cfg.orthogonal_draws:
        g = g - (g @ mu_hat) * mu_hat
    gn = math.sqrt(float((g * g).sum()))
    while gn < 1e-12:
        g = rng.normal(size=dim)
        if cfg.orthogonal_draws:
            g = g - (g @ mu_hat) * mu_hat
        gn = math.sqrt(float((g * g).sum()))
    e_tilde = cfg.signal_norm * (g / gn)
    signal_hat = e_tilde / cfg.signal_norm

    f = cfg.eps_parallel_fraction
    eps_par = (f * cfg.eps_norm) * mu_hat
    perp_norm = math.sqrt(max(1.0 - f * f, 0.0)) * cfg.eps_norm
    if perp_norm > 0.0:
        h = rng.normal(size=dim)
        h = h - (h @ mu_hat) * mu_hat
        if cfg.orthogonal_draws:
            h = h - (h @ signal_hat) * signal_hat
        hn = math.sqrt(float((h * h).sum()))
        while hn < 1e-12:
            h = rng.normal(size=dim)
            h = h - (h @ mu_hat) * mu_hat
            if cfg.orthogonal_draws:
                h = h - (h @ signal_hat) * signal_hat
            hn = math.sqrt(float((h * h).sum()))
        eps_perp = perp_norm * (h / hn)
    else:
        eps_perp = np.zeros(dim)

    eps = eps_par + eps_perp
    mu = cfg.mu_norm * mu_hat
    e = e_tilde + mu
    m = mu + eps

    r1 = e - m
    pred_r1 = e_tilde - eps
    gap_r1 = math.sqrt(float(((r1 - pred_r1) ** 2).sum()))

    m_norm = math.sqrt(float((m * m).sum()))
    m_hat = m / m_norm
    r2 = e - (e @ m_hat) * m_hat
    pred_r2 = e_tilde - eps_perp
    gap_r2 = math.sqrt(float(((r2 - pred_r2) ** 2).sum()))

    return TrialResult(
        gap_r1=gap_r1,
        gap_r2=gap_r2,
        angle_r1=_angle_to(r1, signal_hat),
        angle_r2=_angle_to(r2, signal_hat),
    )


def run_sim(cfg: SimConfig, threads: int = 1) -> SimResult:
    """Mean gaps and angles over cfg.trials independent trials.

    Trials may run on a thread pool; the reduction always walks them
    in trial order, so the result is identical for any thread count.
    """
    indices = range(cfg.trials)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda i: run_trial(cfg, i), indices))
    else:
        results = [run_trial(cfg, i) for i in indices]

    t = cfg.trials
    return SimResult(
        mean_residual_gap_r1=sum(r.gap_r1 for r in results) / t,
        mean_residual_gap_r2=sum(r.gap_r2 for r in results) / t,
        mean_angle_r1=sum(r.angle_r1 for r in results) / t,
        mean_angle_r2=sum(r.angle_r2 for r in results) / t,
        max_residual_gap_r1=max(r.gap_r1 for r in results),
        trials=t,
    )


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx = np.log(np.asarray(xs, dtype=np.float64))
    ly = np.log(np.asarray(ys, dtype=np.float64))
    if len(lx) < 2:
        raise DegenerateInput("need at least two points for a slope")
    dx = lx - lx.mean()
    dy = ly - ly.mean()
    denom = float((dx * dx).sum())
    if denom == 0.0:
        raise DegenerateInput("all x values identical")
    return float((dx * dy).sum()) / denom
