"""Complex resonance energies for the four density-matrix sectors.

Sector j labels which block of the DA density matrix a resonance governs:

1. span{phi1, phi2} with itself (relaxation to the Gibbs state and the phi1/phi2 coherence)
2. D-perp (s = 1, 2) or A-perp (s = 3, 4) against the span
3. the adjoint blocks of sector 2
4. D-perp/A-perp blocks among themselves

Imaginary parts are decay rates and never depend on the Lamb-shift integral mu.
When mu diverges (ohmic bath at finite temperature without an infrared cutoff)
the real shifts are dropped and the affected entries are marked unavailable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import InfraredDivergent
from .model import EffectiveSystem, SystemParams

SECTOR_TAGS = {
    (1, 1): "P11+P22 stationary",
    (1, 2): "P11/P22 Gibbs relaxation",
    (1, 3): "P22 rho P11",
    (1, 4): "P11 rho P22",
    (2, 1): "Dperp rho P11",
    (2, 2): "Dperp rho P22",
    (2, 3): "Aperp rho P11",
    (2, 4): "Aperp rho P22",
    (3, 1): "P11 rho Dperp",
    (3, 2): "P22 rho Dperp",
    (3, 3): "P11 rho Aperp",
    (3, 4): "P22 rho Aperp",
    (4, 1): "Dperp rho Dperp",
    (4, 2): "Aperp rho Aperp",
    (4, 3): "Aperp rho Dperp",
    (4, 4): "Dperp rho Aperp",
}


@dataclass(frozen=True)
class DecayRates:
    """Imaginary parts of the resonances that only need J(0+) and J(e1 - e2)."""
    gamma_relax: float      # Im eps_1^(2)
    gamma_coh: float        # Im eps_1^(3)
    gamma_perp: tuple       # Im eps_2^(s), s = 1..4


@dataclass(frozen=True)
class ResonanceSet:
    eps: np.ndarray            # (4, 4) complex, eps[j-1, s-1]
    multiplicity: np.ndarray   # (4, 4) int
    regularized: np.ndarray    # (4, 4) bool, real part used an infrared cutoff
    shift_available: np.ndarray  # (4, 4) bool
    mu: float | None = None

    def __getitem__(self, key) -> complex:
        j, s = key
        return complex(self.eps[j - 1, s - 1])

    @property
    def positive_rates(self) -> np.ndarray:
        im = self.eps.imag[self.multiplicity > 0]
        return im[im > 0]

    def report(self) -> list:
        rows = []
        for j in range(1, 5):
            for s in range(1, 5):
                e = self.eps[j - 1, s - 1]
                rows.append({
                    "sector": j, "index": s, "tag": SECTOR_TAGS[(j, s)],
                    "re": float(e.real), "im": float(e.imag),
                    "multiplicity": int(self.multiplicity[j - 1, s - 1]),
                    "regularized": bool(self.regularized[j - 1, s - 1]),
                    "shift_available": bool(self.shift_available[j - 1, s - 1]),
                })
        return rows


def _multiplicities(nd: int, na: int) -> np.ndarray:
    m = np.ones((4, 4), dtype=int)
    m[1] = m[2] = [nd - 1, nd - 1, na - 1, na - 1]
    m[3] = [(nd - 1) ** 2, (na - 1) ** 2, (nd - 1) * (na - 1), (nd - 1) * (na - 1)]
    return m


def decay_rates(params: SystemParams, eff: EffectiveSystem, model: spectral.SpectralModel) -> DecayRates:
    lam2 = params.lam**2
    if lam2 == 0:
        return DecayRates(0.0, 0.0, (0.0,) * 4)
    beta = params.beta
    inv_beta = 0.0 if math.isinf(beta) else 1.0 / beta
    g11, g22, g12 = eff.gbar[0, 0] ** 2, eff.gbar[1, 1] ** 2, eff.gbar[0, 1] ** 2
    delta = abs(eff.e1 - eff.e2)
    jt0 = spectral.j_tilde_zero(model)
    jd = spectral.eval_J(model, delta)
    coth = spectral.coth_half(beta, delta)
    x = beta * delta
    relax = 4 * lam2 * (2 * inv_beta * (g11 + g22) * jt0 + g12 * coth * jd)
    coh = lam2 * (2 * inv_beta * (g11 + g22 + 2 * g12) * jt0 + 2 * g12 * coth * jd)
    p1 = 2 * lam2 * (inv_beta * g11 * jt0 + g12 * jd * spectral.occupation_lower(x))
    p2 = 2 * lam2 * (inv_beta * g22 * jt0 + g12 * jd * spectral.occupation_upper(x))
    return DecayRates(relax, coh, (p1, p2, p1, p2))


def relaxation_rate_closed_form(params: SystemParams, eff: EffectiveSystem, model: spectral.SpectralModel) -> float:
    """Relaxation rate written as (8/beta)(G11^2+G22^2) J~(0) + 4 G12^2 coth J(e1-e2)."""
    beta = params.beta
    inv_beta = 0.0 if math.isinf(beta) else 1.0 / beta
    g11, g22, g12 = eff.gbar[0, 0] ** 2, eff.gbar[1, 1] ** 2, eff.gbar[0, 1] ** 2
    delta = abs(eff.e1 - eff.e2)
    return (8 * inv_beta * (g11 + g22) * spectral.j_tilde_zero(model)
            + 4 * g12 * spectral.coth_half(beta, delta) * spectral.eval_J(model, delta))


def compute_resonances(params: SystemParams, eff: EffectiveSystem, model: spectral.SpectralModel) -> ResonanceSet:
    lam2 = params.lam**2
    beta = params.beta
    ed, ea = params.E_D, params.E_A
    rates = decay_rates(params, eff, model)
    g11, g22, g12 = eff.gbar[0, 0] ** 2, eff.gbar[1, 1] ** 2, eff.gbar[0, 1] ** 2

    mu = None
    shifts = True
    x1 = x2 = x3 = x4 = x12 = 0.0
    if lam2 != 0:
        try:
            mu = spectral.mu_integral(model, beta)
            tail = spectral.boltzmann_tail_integral(model, beta)
            pv = spectral.pv_lamb_shift(model, beta, eff.e1 - eff.e2)
        except InfraredDivergent:
            shifts = False
        else:
            x1 = (params.g_D**2 - g11) * mu
            x2 = (params.g_D**2 - g22) * mu
            x3 = (params.g_A**2 - g11) * mu
            x4 = (params.g_A**2 - g22) * mu
            x12 = (g22 - g11) * mu - g12 * tail - 2 / math.pi * g12 * pv

    eps = np.zeros((4, 4), dtype=complex)
    eps[0, 1] = 1j * rates.gamma_relax
    eps[0, 2] = complex(eff.e1 - eff.e2 + lam2 * x12, rates.gamma_coh)
    eps[0, 3] = -np.conj(eps[0, 2])
    bare = (eff.d1, eff.d2, eff.e1 - ea, eff.e2 - ea)
    xs = (x1, x2, x3, x4)
    for s in range(4):
        eps[1, s] = complex(bare[s] + lam2 * xs[s], rates.gamma_perp[s])
        eps[2, s] = -np.conj(eps[1, s])
    shift43 = -lam2 * (ed**2 - ea**2) * mu if mu is not None else 0.0
    eps[3, 2] = ed - ea + shift43
    eps[3, 3] = -np.conj(eps[3, 2])

    regularized = np.zeros((4, 4), dtype=bool)
    available = np.ones((4, 4), dtype=bool)
    depends_on_mu = np.zeros((4, 4), dtype=bool)
    depends_on_mu[0, 2:] = True
    depends_on_mu[1:3, :] = True
    depends_on_mu[3, 2:] = True
    if lam2 != 0:
        if not shifts:
            available[depends_on_mu] = False
        elif model.ir_cutoff:
            regularized[depends_on_mu] = True
    return ResonanceSet(eps=eps, multiplicity=_multiplicities(params.N_D, params.N_A),
                        regularized=regularized, shift_available=available, mu=mu)
