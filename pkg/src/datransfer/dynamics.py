"""Main-term time evolution of the reduced DA density matrix.

The evolved state is written as rho0 minus a sum of sector terms, each carrying
a factor (1 - exp(i t eps)) for one resonance eps. Every factor vanishes at
t = 0, so rho0 is reproduced exactly there. ``herm(X)`` below denotes
X + X^dagger.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import IndexOutOfRange, NegativeTime
from .model import (EffectiveSystem, ProjectionSet, SystemParams, build_projections,
                    check_state, effective_reduction, gibbs_effective)
from .resonances import ResonanceSet, compute_resonances


@dataclass(frozen=True)
class PropagatorContext:
    params: SystemParams
    eff: EffectiveSystem
    projections: ProjectionSet
    resonances: ResonanceSet
    gibbs: np.ndarray

    @classmethod
    def build(cls, params: SystemParams, model: spectral.SpectralModel) -> "PropagatorContext":
        eff = effective_reduction(params)
        return cls(params=params, eff=eff, projections=build_projections(params, eff),
                   resonances=compute_resonances(params, eff, model),
                   gibbs=gibbs_effective(eff, params.beta))

    @property
    def gibbs_full(self) -> np.ndarray:
        P = self.projections.P
        return self.gibbs[0, 0] * P[0][0] + self.gibbs[1, 1] * P[1][1]

    @property
    def gamma_min(self) -> float:
        rates = self.resonances.positive_rates
        return float(rates.min()) if rates.size else 0.0


def phase(t: float, eps: complex) -> complex:
    """exp(i t eps) without overflow for large t."""
    eps = complex(eps)
    damp = math.exp(-t * eps.imag)
    return complex(damp * math.cos(t * eps.real), damp * math.sin(t * eps.real))


def sector_terms(ctx: PropagatorContext, rho0: np.ndarray) -> list:
    """List of (eps, X, hermitize) with rho_t = rho0 - sum c(t) X [+ h.c.], c = 1 - e^{i t eps}."""
    pr, res = ctx.projections, ctx.resonances
    P = pr.P
    w1, w2 = ctx.gibbs[0, 0], ctx.gibbs[1, 1]
    relax = (w1 * (P[1][1] @ rho0 @ P[1][1] - P[0][1] @ rho0 @ P[1][0])
             + w2 * (P[0][0] @ rho0 @ P[0][0] - P[1][0] @ rho0 @ P[0][1]))
    terms = [
        (res[1, 2], relax, False),
        (res[1, 3], P[1][1] @ rho0 @ P[0][0], True),
        (res[4, 3], pr.P_Aperp @ rho0 @ pr.P_Dperp, True),
    ]
    for s in (1, 2):
        Pss = P[s - 1][s - 1]
        terms.append((res[2, s], pr.P_Dperp @ rho0 @ Pss, True))
        terms.append((res[2, s + 2], pr.P_Aperp @ rho0 @ Pss, True))
    return terms


def _check_time(t: float):
    if not t >= 0:
        raise NegativeTime(f"time must be >= 0, got {t!r}")


def _evaluate(rho0, terms, t: float) -> np.ndarray:
    out = rho0.copy()
    for eps, X, herm in terms:
        c = 1 - phase(t, eps)
        if herm:
            Y = c * X
            out -= Y + Y.conj().T
        else:
            out -= c * X
    return out


def _warn_if_negative(rho: np.ndarray, lam: float, t: float):
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -max(10 * lam**2, 1e-9):
        warnings.warn(f"main-term state at t={t:g} has eigenvalue {lo:.3e}", RuntimeWarning)


def propagate(ctx: PropagatorContext, rho0, t: float, check_output: bool = False) -> np.ndarray:
    _check_time(t)
    rho0 = check_state(rho0, ctx.params.dim)
    rho = _evaluate(rho0, sector_terms(ctx, rho0), t)
    if check_output:
        _warn_if_negative(rho, ctx.params.lam, t)
    return rho


def propagate_grid(ctx: PropagatorContext, rho0, times) -> np.ndarray:
    """States on a time grid, shape (len(times), dim, dim)."""
    rho0 = check_state(rho0, ctx.params.dim)
    terms = sector_terms(ctx, rho0)
    out = np.empty((len(times),) + rho0.shape, dtype=complex)
    for i, t in enumerate(times):
        _check_time(t)
        out[i] = _evaluate(rho0, terms, t)
    return out


def propagate_direct(ctx: PropagatorContext, rho0, t: float) -> np.ndarray:
    """Same state written as asymptote plus decaying sector terms; a cross-check path."""
    _check_time(t)
    rho0 = check_state(rho0, ctx.params.dim)
    pr, res = ctx.projections, ctx.resonances
    P = pr.P
    w1, w2 = ctx.gibbs[0, 0], ctx.gibbs[1, 1]

    def herm(X):
        return X + X.conj().T

    rho = asymptotic_state(ctx, rho0)
    rho = rho + herm(phase(t, res[4, 3]) * pr.P_Aperp @ rho0 @ pr.P_Dperp)
    rho = rho + phase(t, res[1, 2]) * (w2 * P[0][0] @ rho0 @ P[0][0] - w2 * P[1][0] @ rho0 @ P[0][1]
                                       - w1 * P[0][1] @ rho0 @ P[1][0] + w1 * P[1][1] @ rho0 @ P[1][1])
    rho = rho + herm(phase(t, res[1, 3]) * P[1][1] @ rho0 @ P[0][0])
    for s in (1, 2):
        Pss = P[s - 1][s - 1]
        rho = rho + herm(phase(t, res[2, s]) * pr.P_Dperp @ rho0 @ Pss)
        rho = rho + herm(phase(t, res[2, s + 2]) * pr.P_Aperp @ rho0 @ Pss)
    return rho


def asymptotic_state(ctx: PropagatorContext, rho0) -> np.ndarray:
    rho0 = check_state(rho0, ctx.params.dim)
    pr = ctx.projections
    weight = np.trace(rho0 @ pr.P_bar_S).real
    return (weight * ctx.gibbs_full + pr.P_Dperp @ rho0 @ pr.P_Dperp
            + pr.P_Aperp @ rho0 @ pr.P_Aperp).astype(complex)


def donor_element(ctx: PropagatorContext, rho0, t: float, k: int, l: int) -> complex:
    """<D_k| rho_t |D_l> from the closed donor-block formula; k, l are 0-based site indices."""
    nd = ctx.params.N_D
    for idx in (k, l):
        if not 0 <= idx < nd:
            raise IndexOutOfRange(f"donor index {idx} outside 0..{nd - 1}")
    _check_time(t)
    rho0 = check_state(rho0, ctx.params.dim)
    pr, res = ctx.projections, ctx.resonances
    alpha = ctx.eff.alpha
    w1, w2 = ctx.gibbs[0, 0], ctx.gibbs[1, 1]
    phi = pr.phi
    r = phi.conj() @ rho0 @ phi.T  # r[s, s'] = <phi_s, rho0 phi_s'>
    a2 = alpha * alpha
    out = complex(rho0[k, l])
    out -= (1 - phase(t, res[1, 2])) / nd * (1 - a2) / (1 + a2) * (w2 * r[0, 0] - w1 * r[1, 1])
    out -= 2 / nd * abs(alpha) / (1 + a2) * ((1 - phase(t, res[1, 3])) * r[1, 0]).real
    ek = pr.P_Dperp[:, k]
    el = pr.P_Dperp[:, l]
    for s in range(2):
        c = 1 - phase(t, res[2, s + 1])
        # <D_k|Dperp rho0 P_ss|D_l> and <D_k|P_ss rho0 Dperp|D_l>
        left = (ek.conj() @ rho0 @ phi[s]) * phi[s][l]
        right = phi[s][k] * (phi[s].conj() @ rho0 @ el)
        out -= c * left + np.conj(c) * right
    return out


def population_closed_form(ctx: PropagatorContext, rho0, t: float) -> float:
    """Total donor population from the closed-form donor expression."""
    _check_time(t)
    rho0 = check_state(rho0, ctx.params.dim)
    pr, res = ctx.projections, ctx.resonances
    alpha = ctx.eff.alpha
    w1, w2 = ctx.gibbs[0, 0], ctx.gibbs[1, 1]
    phi = pr.phi
    r = phi.conj() @ rho0 @ phi.T
    a2 = alpha * alpha
    nd = ctx.params.N_D
    p = np.trace(rho0[:nd, :nd]).real
    p -= ((1 - phase(t, res[1, 2])) * (1 - a2) / (1 + a2) * (w2 * r[0, 0] - w1 * r[1, 1])).real
    p -= 2 * abs(alpha) / (1 + a2) * ((1 - phase(t, res[1, 3])) * r[1, 0]).real
    for s in range(2):
        c = 1 - phase(t, res[2, s + 1])
        p -= 2 * (c * np.trace(pr.P_Dperp @ rho0 @ pr.P[s][s])).real
    return float(p)
