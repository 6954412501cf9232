"""Transfer efficiency, population time series and site-population fluctuations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import PropagatorContext, phase, population_closed_form, propagate_grid
from .errors import DistributionInvalid, ParameterError
from .model import EffectiveSystem, boltzmann_weights

HIGH_T = 0.1
LOW_T = 10.0


@dataclass(frozen=True)
class InitialDistribution:
    p: np.ndarray
    kind: str = "incoherent"

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DistributionInvalid("distribution must be a non-empty vector")
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-10:
            raise DistributionInvalid("distribution must be nonnegative and sum to 1")
        if self.kind not in ("incoherent", "coherent"):
            raise DistributionInvalid(f"unknown kind {self.kind!r}")
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, n: int, kind: str = "coherent") -> "InitialDistribution":
        return cls(np.full(n, 1.0 / n), kind)


@dataclass(frozen=True)
class EfficiencyReport:
    p_D_inf: float
    p_A_inf: float
    regime: str
    entropy: float | None = None


def make_initial_state(dist: InitialDistribution, dims) -> np.ndarray:
    nd, na = dims
    if dist.p.size != nd:
        raise DistributionInvalid(f"distribution has {dist.p.size} entries, expected N_D = {nd}")
    rho = np.zeros((nd + na, nd + na), dtype=complex)
    if dist.kind == "incoherent":
        rho[:nd, :nd] = np.diag(dist.p)
    else:
        amp = np.sqrt(dist.p)
        rho[:nd, :nd] = np.outer(amp, amp)
    return rho


def alpha_of_eta(eta: float) -> float:
    """-eta + sqrt(eta^2 + 1), written without cancellation."""
    if eta < 0:
        raise ParameterError("eta must be >= 0")
    return 1.0 / (eta + math.hypot(eta, 1.0))


def regime_tag(eff: EffectiveSystem, beta: float) -> str:
    x = beta * (eff.e1 - eff.e2)
    if x < HIGH_T:
        return "high-T"
    if x > LOW_T:
        return "low-T"
    return "intermediate"


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def acceptor_factor(eff: EffectiveSystem, beta: float) -> float:
    """(1/(1+a^2)) (x1 a^2 + x2)/(x1 + x2) with Gibbs weights x_s."""
    w1, w2 = boltzmann_weights([eff.e1, eff.e2], beta)
    a2 = eff.alpha**2
    return (w1 * a2 + w2) / (1 + a2)


def efficiency_incoherent(eff: EffectiveSystem, beta: float, N_D: int, p=None) -> EfficiencyReport:
    pd = 1 - acceptor_factor(eff, beta) / N_D
    ent = shannon_entropy(p) if p is not None else None
    return EfficiencyReport(pd, 1 - pd, regime_tag(eff, beta), ent)


def efficiency_coherent(eff: EffectiveSystem, beta: float, N_D: int, p) -> EfficiencyReport:
    dist = p if isinstance(p, InitialDistribution) else InitialDistribution(p, "coherent")
    if dist.p.size != N_D:
        raise DistributionInvalid(f"distribution has {dist.p.size} entries, expected N_D = {N_D}")
    overlap = np.sqrt(dist.p).sum() ** 2
    pd = 1 - overlap / N_D * acceptor_factor(eff, beta)
    return EfficiencyReport(pd, 1 - pd, regime_tag(eff, beta), shannon_entropy(dist.p))


def max_acceptor_probability(eff: EffectiveSystem, beta: float) -> float:
    return acceptor_factor(eff, beta)


@dataclass(frozen=True)
class PopulationSeries:
    t: np.ndarray
    p_D: np.ndarray
    p_A: np.ndarray
    p_D_closed: np.ndarray
    states: np.ndarray


def population_timeseries(ctx: PropagatorContext, rho0, grid) -> PopulationSeries:
    grid = np.asarray(grid, dtype=float)
    states = propagate_grid(ctx, rho0, grid)
    nd = ctx.params.N_D
    diag = np.einsum("tii->ti", states).real
    p_d = diag[:, :nd].sum(axis=1)
    p_a = diag[:, nd:].sum(axis=1)
    closed = np.array([population_closed_form(ctx, rho0, t) for t in grid])
    return PopulationSeries(grid, p_d, p_a, closed, states)


def fluctuation_variance(p_D: float, N_D: int) -> float:
    if not -1e-12 <= p_D <= 1 + 1e-12:
        raise ParameterError(f"p_D must lie in [0, 1], got {p_D!r}")
    return p_D * (1 - p_D) / N_D**2


def fluctuation_expectation(rho, N_D: int) -> float:
    """<F^2> with F = (1/N_D)(Pi_D - p_D), Pi_D the projector on the donor sites."""
    rho = np.asarray(rho)
    pi_d = np.zeros(rho.shape)
    pi_d[:N_D, :N_D] = np.eye(N_D)
    p_d = np.trace(rho @ pi_d).real
    F = (pi_d - p_d * np.eye(rho.shape[0])) / N_D
    return float(np.trace(rho @ F @ F).real)


def site_variance(p_D: float, N_D: int) -> float:
    """Variance of one site's occupation when the donor population spreads uniformly."""
    q = p_D / N_D
    return q * (1 - q)


def uniform_donor_population(ctx: PropagatorContext, t: float) -> float:
    """Donor population for rho0 = |D><D| from its closed single-exponential form."""
    alpha = ctx.eff.alpha
    a2 = alpha * alpha
    w1, w2 = ctx.gibbs[0, 0], ctx.gibbs[1, 1]
    res = ctx.resonances
    c12 = (1 - phase(t, res[1, 2])).real
    e13 = complex(res[1, 3])
    osc = 1 - math.exp(-t * e13.imag) * math.cos(t * e13.real)
    return 1 - c12 * (1 - a2) / (1 + a2) * (1 / (1 + a2) - w1) - 2 * a2 / (1 + a2) ** 2 * osc
