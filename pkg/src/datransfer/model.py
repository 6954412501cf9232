"""Donor-acceptor Hamiltonian, the effective two-level reduction and projectors.

Sites are ordered D_1..D_{N_D}, A_1..A_{N_A}. All donor sites share the energy
E_D and all acceptor sites share E_A; every donor couples to every acceptor with
the same matrix element V. Only the uniform states |D> and |A> mix, so the
transfer problem reduces to a two-level system with coupling v = V*sqrt(N_D*N_A).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateEffectiveSystem, InvalidState, ParameterError

PSD_TOL = 1e-9
TRACE_TOL = 1e-10
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class SystemParams:
    E_D: float
    E_A: float
    N_D: int
    N_A: int
    V: float
    g_D: float
    g_A: float
    lam: float
    beta: float
    weak_coupling_threshold: float = 0.1

    def __post_init__(self):
        for name in ("N_D", "N_A"):
            n = getattr(self, name)
            if int(n) != n or n < 1:
                raise ParameterError(f"{name} must be a positive integer, got {n!r}")
            object.__setattr__(self, name, int(n))
        for name in ("E_D", "E_A", "V", "g_D", "g_A", "lam"):
            x = float(getattr(self, name))
            if not math.isfinite(x):
                raise ParameterError(f"{name} must be finite, got {x!r}")
            object.__setattr__(self, name, x)
        beta = float(self.beta)
        if not beta > 0:
            raise ParameterError(f"beta must be > 0, got {beta!r}")
        object.__setattr__(self, "beta", beta)
        if not self.weak_coupling_threshold > 0:
            raise ParameterError("weak_coupling_threshold must be > 0")

    @property
    def dim(self) -> int:
        return self.N_D + self.N_A

    @property
    def v(self) -> float:
        return self.V * math.sqrt(self.N_D * self.N_A)

    def regime_warning(self) -> str | None:
        """Message when lambda^2 is not small against the level splitting."""
        gap = math.hypot(self.E_D - self.E_A, 2 * self.v)
        if self.lam**2 >= self.weak_coupling_threshold * gap:
            return (f"lambda^2 = {self.lam**2:.3g} is not below "
                    f"{self.weak_coupling_threshold:g} * |e1 - e2| = "
                    f"{self.weak_coupling_threshold * gap:.3g}; weak-coupling results may be inaccurate")
        return None


@dataclass(frozen=True)
class EffectiveSystem:
    """Two-level data on span{|D>, |A>}; vectors are in the (|D>, |A>) basis."""
    E_D: float
    E_A: float
    v: float
    e1: float
    e2: float
    phi1: np.ndarray
    phi2: np.ndarray
    alpha: float
    gbar: np.ndarray
    # e_s - E_D, kept separately because they lose precision when re-derived
    d1: float = field(repr=False, default=0.0)
    d2: float = field(repr=False, default=0.0)

    @property
    def splitting(self) -> float:
        return self.e1 - self.e2

    @property
    def eta(self) -> float:
        return (self.E_D - self.E_A) / (2 * self.v)


@dataclass(frozen=True)
class ProjectionSet:
    P_bar_S: np.ndarray
    P_Dperp: np.ndarray
    P_Aperp: np.ndarray
    P: tuple          # P[k][l] = |phi_{k+1}><phi_{l+1}| on the full space
    phi: np.ndarray   # shape (2, dim), the embedded phi_1, phi_2
    xi_D: np.ndarray  # shape (N_D - 1, dim)
    xi_A: np.ndarray  # shape (N_A - 1, dim)
    D: np.ndarray
    A: np.ndarray


def build_hamiltonian(params: SystemParams):
    """Return (H_S, G) as dense real matrices."""
    nd, na = params.N_D, params.N_A
    h = np.zeros((nd + na, nd + na))
    h[:nd, :nd] = np.diag(np.full(nd, params.E_D))
    h[nd:, nd:] = np.diag(np.full(na, params.E_A))
    h[:nd, nd:] = params.V
    h[nd:, :nd] = params.V
    g = np.diag(np.concatenate([np.full(nd, params.g_D), np.full(na, params.g_A)]))
    return h, g


def effective_reduction(params: SystemParams) -> EffectiveSystem:
    v = params.v
    if v == 0:
        raise DegenerateEffectiveSystem("effective coupling v = V*sqrt(N_D*N_A) is zero")
    ed, ea = params.E_D, params.E_A
    gap = math.hypot(ed - ea, 2 * v)
    # (e1 - E_D)(e2 - E_D) = -v^2; take the root without cancellation, derive the other
    if ed >= ea:
        d2 = -((ed - ea) + gap) / 2
        d1 = -v * v / d2
    else:
        d1 = ((ea - ed) + gap) / 2
        d2 = -v * v / d1
    e1, e2 = ed + d1, ed + d2
    sgn = 1.0 if v > 0 else -1.0
    phis = []
    for d in (d1, d2):
        n = math.hypot(v, d)
        phis.append(np.array([abs(v) / n, sgn * d / n]))
    ds = (d1, d2)
    gbar = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            gbar[i, j] = ((params.g_D * v * v + params.g_A * ds[i] * ds[j])
                          / math.sqrt((v * v + ds[i] ** 2) * (v * v + ds[j] ** 2)))
    return EffectiveSystem(E_D=ed, E_A=ea, v=v, e1=e1, e2=e2, phi1=phis[0], phi2=phis[1],
                           alpha=d1 / v, gbar=gbar, d1=d1, d2=d2)


def _complement_basis(n: int) -> np.ndarray:
    """Gram-Schmidt over e_0 - e_{j+1}, j = 0..n-2; rows are orthonormal."""
    out = []
    for j in range(n - 1):
        w = np.zeros(n)
        w[0], w[j + 1] = 1.0, -1.0
        for u in out:
            w -= (u @ w) * u
        out.append(w / np.linalg.norm(w))
    return np.array(out).reshape(len(out), n)


def build_projections(params: SystemParams, eff: EffectiveSystem) -> ProjectionSet:
    nd, na, dim = params.N_D, params.N_A, params.dim
    D = np.zeros(dim)
    D[:nd] = 1 / math.sqrt(nd)
    A = np.zeros(dim)
    A[nd:] = 1 / math.sqrt(na)
    xi_D = np.zeros((nd - 1, dim))
    xi_D[:, :nd] = _complement_basis(nd)
    xi_A = np.zeros((na - 1, dim))
    xi_A[:, nd:] = _complement_basis(na)
    phi = np.array([p[0] * D + p[1] * A for p in (eff.phi1, eff.phi2)])
    P = tuple(tuple(np.outer(phi[k], phi[l]) for l in range(2)) for k in range(2))
    return ProjectionSet(
        P_bar_S=np.outer(D, D) + np.outer(A, A),
        P_Dperp=xi_D.T @ xi_D,
        P_Aperp=xi_A.T @ xi_A,
        P=P, phi=phi, xi_D=xi_D, xi_A=xi_A, D=D, A=A,
    )


def boltzmann_weights(energies, beta: float) -> np.ndarray:
    """Normalized exp(-beta*E) with a max-shift; beta may be inf."""
    e = np.asarray(energies, dtype=float)
    shifted = e - e.min()
    if math.isinf(beta):
        w = (shifted == 0).astype(float)
    else:
        w = np.exp(-beta * shifted)
    return w / w.sum()


def gibbs_effective(eff: EffectiveSystem, beta: float) -> np.ndarray:
    """2x2 Gibbs state in the (phi1, phi2) basis."""
    if not beta > 0:
        raise ParameterError("beta must be > 0")
    return np.diag(boltzmann_weights([eff.e1, eff.e2], beta))


def check_state(rho, dim: int | None = None, tol_psd: float = PSD_TOL) -> np.ndarray:
    """Validate a density matrix and return it as a complex array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidState(f"density matrix must be square, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise InvalidState(f"density matrix has dimension {rho.shape[0]}, expected {dim}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise InvalidState("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1) > TRACE_TOL:
        raise InvalidState(f"density matrix trace is {tr!r}, expected 1")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -tol_psd:
        raise InvalidState(f"density matrix has negative eigenvalue {lo:.3e}")
    return rho
