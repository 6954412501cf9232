"""Reference computations that do not go through the resonance formulas.

* exact unitary evolution at zero bath coupling
* a Redfield generator for the effective two-level system
* the exactly solvable dephasing of the D-perp/A-perp coherence
* brute-force propagation with a few discrete bath modes at zero temperature

Nothing here imports the resonances or dynamics modules.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, sparse
from scipy.sparse.linalg import expm_multiply

from . import spectral
from .errors import DimensionTooLarge, InfraredDivergent, ParameterError
from .model import EffectiveSystem, SystemParams, build_hamiltonian

MAX_UNITARY_DIM = 64
MAX_BATH_DIM = 100_000
DENSE_LIMIT = 3000


@dataclass(frozen=True)
class OracleCheck:
    check_name: str
    predicted: float
    reference: float
    abs_err: float
    rel_err: float
    passed: bool

    @classmethod
    def compare(cls, name, predicted, reference, tol, relative=False):
        predicted, reference = float(predicted), float(reference)
        abs_err = abs(predicted - reference)
        rel_err = abs_err / abs(reference) if reference != 0 else (0.0 if abs_err == 0 else math.inf)
        ok = (rel_err if relative else abs_err) <= tol
        return cls(name, predicted, reference, abs_err, rel_err, bool(ok))

    def as_dict(self) -> dict:
        return {"check_name": self.check_name, "predicted": self.predicted, "reference": self.reference,
                "abs_err": self.abs_err, "rel_err": self.rel_err, "pass": self.passed}


# ---------------------------------------------------------------- unitary

def unitary_reference(H_S, rho0, t: float) -> np.ndarray:
    H_S = np.asarray(H_S)
    if H_S.shape[0] > MAX_UNITARY_DIM:
        raise DimensionTooLarge(f"unitary reference limited to dimension {MAX_UNITARY_DIM}")
    w, U = np.linalg.eigh(H_S)
    Ut = (U * np.exp(-1j * w * t)) @ U.conj().T
    return Ut @ np.asarray(rho0, dtype=complex) @ Ut.conj().T


# ---------------------------------------------------------------- Redfield

def bath_spectrum(model: spectral.SpectralModel, beta: float, omega: float) -> float:
    """Fourier transform of the bath correlation function, 4 J(w) (1 + n(w)), J odd."""
    if omega == 0:
        return 0.0 if math.isinf(beta) else 4 * spectral.j_tilde_zero(model) / beta
    jw = spectral.eval_J(model, abs(omega))
    if math.isinf(beta):
        return 4 * jw if omega > 0 else 0.0
    x = beta * abs(omega)
    n = 1 / math.expm1(x) if x < 700 else 0.0
    return 4 * jw * (n + 1) if omega > 0 else 4 * jw * n


def redfield_generator(eff: EffectiveSystem, model: spectral.SpectralModel, beta: float, lam: float) -> np.ndarray:
    """4x4 generator acting on row-major vec(rho) in the (phi1, phi2) basis.

    drho/dt = -i[H, rho] - lam^2 ([A, L rho] - [A, rho L^dagger]),
    L_ab = A_ab * S(E_b - E_a)/2. The principal-value (Lamb shift) part of the
    one-sided transform is left out.
    """
    E = np.array([eff.e1, eff.e2])
    H = np.diag(E).astype(complex)
    A = np.asarray(eff.gbar, dtype=complex)
    L = np.empty((2, 2), dtype=complex)
    for a in range(2):
        for b in range(2):
            L[a, b] = A[a, b] * bath_spectrum(model, beta, E[b] - E[a]) / 2

    def rhs(rho):
        out = -1j * (H @ rho - rho @ H)
        if lam:
            Lr, rL = L @ rho, rho @ L.conj().T
            out -= lam**2 * ((A @ Lr - Lr @ A) - (A @ rL - rL @ A))
        return out

    gen = np.empty((4, 4), dtype=complex)
    for k in range(4):
        basis = np.zeros(4, dtype=complex)
        basis[k] = 1
        gen[:, k] = rhs(basis.reshape(2, 2)).ravel()
    return gen


def redfield_reference(eff: EffectiveSystem, model: spectral.SpectralModel, beta: float, lam: float) -> np.ndarray:
    """Generator eigenvalues kappa = i*eps, sorted by decreasing real part."""
    kappa = np.linalg.eigvals(redfield_generator(eff, model, beta, lam))
    return kappa[np.lexsort((kappa.imag, -kappa.real))]


@dataclass(frozen=True)
class RedfieldRates:
    relaxation: float   # population relaxation rate
    coherence: float    # phi1/phi2 coherence decay rate
    frequency: float    # coherence oscillation frequency


def redfield_rates(eff: EffectiveSystem, model: spectral.SpectralModel, beta: float, lam: float) -> RedfieldRates:
    kappa = redfield_reference(eff, model, beta, lam)
    # population modes have the two smallest |Im kappa|
    order = np.argsort(np.abs(kappa.imag))
    pops, cohs = kappa[order[:2]], kappa[order[2:]]
    relax = -pops.real.min()
    return RedfieldRates(float(relax), float(-cohs.real.mean()), float(np.abs(cohs.imag).mean()))


def redfield_stationary_state(eff: EffectiveSystem, model: spectral.SpectralModel, beta: float, lam: float) -> np.ndarray:
    gen = redfield_generator(eff, model, beta, lam)
    w, vecs = np.linalg.eig(gen)
    rho = vecs[:, np.argmin(np.abs(w))].reshape(2, 2)
    rho = rho / np.trace(rho)
    return (rho + rho.conj().T) / 2


# ---------------------------------------------------------------- independent boson

def _osc_quad(f, a, b, t, kind, tol):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if b <= a:
            return 0.0
        return integrate.quad(f, a, b, weight=kind, wvar=t, limit=500, epsabs=tol, epsrel=tol)[0]


def _plain_quad(f, a, b, tol):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if b <= a:
            return 0.0
        return integrate.quad(f, a, b, limit=500, epsabs=tol, epsrel=tol)[0]


def dephasing_integrals(model: spectral.SpectralModel, beta: float, t: float, tol: float = 1e-11):
    """(Phi(t), Gamma(t)) with
    Phi = (2/pi) int J (w t - sin w t)/w^2 dw and
    Gamma = (2/pi) int J coth(beta w/2) (1 - cos w t)/w^2 dw."""
    if t == 0:
        return 0.0, 0.0
    J = lambda w: spectral.eval_J(model, w)
    lo = model.ir_cutoff or 0.0
    hi = model.uv_limit
    cut = min(hi, max(lo, 1.0 / t))
    coth = (lambda w: 1.0) if math.isinf(beta) else (lambda w: 1 / math.tanh(beta * w / 2))

    # phase integral: t * int J/w  -  int J sin(wt)/w^2
    first = t * _plain_quad(lambda w: J(w) / w, lo, hi, tol)
    near = _plain_quad(lambda w: J(w) * math.sin(w * t) / w**2, lo, cut, tol)
    far = _osc_quad(lambda w: J(w) / w**2, cut, hi, t, "sin", tol)
    phi = 2 / math.pi * (first - near - far)

    g = lambda w: J(w) * coth(w) / w**2
    near = _plain_quad(lambda w: g(w) * 2 * math.sin(w * t / 2) ** 2, lo, cut, tol)
    far = _plain_quad(g, cut, hi, tol) - _osc_quad(g, cut, hi, t, "cos", tol)
    gam = 2 / math.pi * (near + far)
    return phi, gam


def independent_boson_coherence(params: SystemParams, model: spectral.SpectralModel, t: float,
                                weights=None) -> complex:
    """Exact coherence factor of the D-perp/A-perp block.

    ``weights`` are the bath coupling strengths of the two blocks; the default
    (E_D, E_A) matches the sector-4 Lamb shift of the resonance formulas.
    """
    kd, ka = weights if weights is not None else (params.E_D, params.E_A)
    phi, gam = dephasing_integrals(model, params.beta, t)
    lam2 = params.lam**2
    arg = (params.E_D - params.E_A) * t - lam2 * (kd**2 - ka**2) * phi
    return complex(np.exp(1j * arg) * math.exp(-lam2 * (kd - ka) ** 2 * gam))


def coherence_frequency(params: SystemParams, model: spectral.SpectralModel, t: float, h: float = 1e-3,
                        weights=None) -> float:
    """d/dt arg C(t) by a central difference."""
    cp = independent_boson_coherence(params, model, t + h, weights)
    cm = independent_boson_coherence(params, model, t - h, weights)
    return float(np.angle(cp / cm) / (2 * h))


def dephasing_plateau(params: SystemParams, model: spectral.SpectralModel, weights=None) -> float:
    """lim |C(t)| = exp(-lam^2 (k_D - k_A)^2 (2/pi) int J coth/w^2 dw)."""
    kd, ka = weights if weights is not None else (params.E_D, params.E_A)
    beta = params.beta
    lo = model.ir_cutoff or 0.0
    # integrability at 0: J coth / w^2 ~ w^(s-3) at T > 0, w^(s-2) at T = 0
    s_eff = {"ohmic": 1.0, "super_ohmic": model.s}.get(model.family)
    if s_eff is None:
        s_eff = 1.0 if spectral.j_tilde_zero(model) > 0 else 2.5
    need = 2.0 if not math.isinf(beta) else 1.0
    if lo == 0 and s_eff <= need:
        raise InfraredDivergent("dephasing plateau integral diverges at w -> 0; set ir_cutoff")
    coth = (lambda w: 1.0) if math.isinf(beta) else (lambda w: 1 / math.tanh(beta * w / 2))
    val, _ = spectral.integrate_panels(lambda w: spectral.eval_J(model, w) * coth(w) / w**2,
                                       lo, model.uv_limit, model)
    return math.exp(-params.lam**2 * (kd - ka) ** 2 * 2 / math.pi * val)


# ---------------------------------------------------------------- truncated bath

@dataclass(frozen=True)
class TruncatedBath:
    frequencies: np.ndarray
    couplings: np.ndarray
    n_max: int

    @property
    def M(self) -> int:
        return len(self.frequencies)

    @classmethod
    def from_spectral(cls, model: spectral.SpectralModel, M: int, n_max: int, omega_max: float | None = None):
        """Equal-width bins on [0, omega_max] with c_m^2 = (4/pi) int_bin J."""
        if M < 0 or n_max < 0:
            raise ParameterError("M and n_max must be >= 0")
        omega_max = omega_max or 10 * model.omega_c
        edges = np.linspace(0, omega_max, M + 1)
        freqs, coup = [], []
        J = lambda w: spectral.eval_J(model, w)
        for a, b in zip(edges[:-1], edges[1:]):
            weight = integrate.quad(J, a, b, epsabs=1e-13, epsrel=1e-12)[0]
            first = integrate.quad(lambda w: w * J(w), a, b, epsabs=1e-13, epsrel=1e-12)[0]
            freqs.append(first / weight if weight > 0 else (a + b) / 2)
            coup.append(math.sqrt(4 / math.pi * weight))
        return cls(np.array(freqs), np.array(coup), int(n_max))


def _mode_ops(n_max: int):
    a = np.diag(np.sqrt(np.arange(1, n_max + 1)), 1)
    return sparse.csr_matrix(a), sparse.csr_matrix(np.diag(np.arange(n_max + 1.0)))


def _embed(op, m: int, M: int, d: int):
    left = sparse.identity(d ** m, format="csr")
    right = sparse.identity(d ** (M - m - 1), format="csr")
    return sparse.kron(sparse.kron(left, op), right, format="csr")


def bath_dimension(dim_s: int, bath: TruncatedBath) -> int:
    return dim_s * (bath.n_max + 1) ** bath.M


def full_hamiltonian(params: SystemParams, bath: TruncatedBath):
    """H_S + sum w a^dag a + lam G (x) sum (c/sqrt2)(a + a^dag), sparse."""
    H_S, G = build_hamiltonian(params)
    dim = bath_dimension(params.dim, bath)
    if dim > MAX_BATH_DIM:
        raise DimensionTooLarge(f"Hilbert dimension {dim} exceeds {MAX_BATH_DIM}")
    d = bath.n_max + 1
    dB = d ** bath.M
    a, n = _mode_ops(bath.n_max)
    HB = sparse.csr_matrix((dB, dB))
    X = sparse.csr_matrix((dB, dB))
    for m in range(bath.M):
        HB = HB + bath.frequencies[m] * _embed(n, m, bath.M, d)
        X = X + bath.couplings[m] / math.sqrt(2) * _embed(a + a.T, m, bath.M, d)
    eye_s = sparse.identity(params.dim, format="csr")
    H = sparse.kron(sparse.csr_matrix(H_S), sparse.identity(dB), format="csr") + sparse.kron(eye_s, HB, format="csr")
    if params.lam:
        H = H + params.lam * sparse.kron(sparse.csr_matrix(G), X, format="csr")
    return H


def vacuum(bath: TruncatedBath) -> np.ndarray:
    v = np.zeros((bath.n_max + 1) ** bath.M)
    v[0] = 1
    return v


def displacement_amplitudes(bath: TruncatedBath, lam: float, g: float) -> np.ndarray:
    """Coherent amplitudes that remove the linear coupling lam*g*(c/sqrt2)(a + a^dag)."""
    return -lam * g * bath.couplings / (math.sqrt(2) * bath.frequencies)


def displaced_vacuum(bath: TruncatedBath, lam: float, g: float) -> np.ndarray:
    """Product of each mode's ground state of w a^dag a + lam g (c/sqrt2)(a + a^dag).

    In the truncated space this is the exact counterpart of the coherent state
    with the amplitudes of ``displacement_amplitudes``.
    """
    a, n = _mode_ops(bath.n_max)
    a, n = a.toarray(), n.toarray()
    state = np.ones(1)
    for w, c in zip(bath.frequencies, bath.couplings):
        h = w * n + lam * g * c / math.sqrt(2) * (a + a.T)
        vals, vecs = np.linalg.eigh(h)
        gs = vecs[:, 0] * np.sign(vecs[0, 0] or 1.0)
        state = np.kron(state, gs)
    return state


@dataclass(frozen=True)
class BathEvolution:
    t: np.ndarray
    p_D: np.ndarray
    norms: np.ndarray
    reduced: np.ndarray   # (len(t), dim_s, dim_s)


def _pure_components(rho0):
    w, v = np.linalg.eigh(np.asarray(rho0, dtype=complex))
    keep = w > 1e-14
    return w[keep], v[:, keep].T


def truncated_bath_evolution(params: SystemParams, bath: TruncatedBath, rho0, grid,
                             bath_state=None) -> BathEvolution:
    """Schroedinger propagation of system (x) bath from rho0 (x) |bath_state>."""
    grid = np.asarray(grid, dtype=float)
    dim_s = params.dim
    H = full_hamiltonian(params, bath)
    chi = vacuum(bath) if bath_state is None else np.asarray(bath_state, dtype=complex)
    dB = chi.size
    weights, comps = _pure_components(rho0)
    reduced = np.zeros((len(grid), dim_s, dim_s), dtype=complex)
    norms = np.zeros(len(grid))
    dense = H.shape[0] <= DENSE_LIMIT
    if dense:
        E, U = np.linalg.eigh(H.toarray())
    for wt, psi_s in zip(weights, comps):
        psi0 = np.kron(psi_s, chi)
        if dense:
            coef = U.conj().T @ psi0
            states = [U @ (np.exp(-1j * E * t) * coef) for t in grid]
        else:
            states = _sparse_states(H, psi0, grid)
        for i, psi in enumerate(states):
            m = psi.reshape(dim_s, dB)
            reduced[i] += wt * (m @ m.conj().T)
            norms[i] += wt * np.vdot(psi, psi).real
    p_d = np.einsum("tii->t", reduced[:, :params.N_D, :params.N_D]).real
    return BathEvolution(grid, p_d, norms, reduced)


def _sparse_states(H, psi0, grid):
    A = -1j * H
    out, psi, t_prev = [], psi0.astype(complex), 0.0
    for t in grid:
        if t > t_prev:
            psi = expm_multiply(A * (t - t_prev), psi)
            t_prev = t
        out.append(psi.copy())
    return out


def stationarity_check(params: SystemParams, bath: TruncatedBath, psi, grid, displaced: bool = True) -> float:
    """Largest deviation of the reduced state from |psi><psi| along the grid."""
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    nd = params.N_D
    donor = np.linalg.norm(psi[:nd]) >= np.linalg.norm(psi[nd:])
    g = params.g_D if donor else params.g_A
    chi = displaced_vacuum(bath, params.lam, g) if displaced else vacuum(bath)
    target = np.outer(psi, psi.conj())
    ev = truncated_bath_evolution(params, bath, target, grid, bath_state=chi)
    return float(max(np.linalg.norm(r - target, 2) for r in ev.reduced))
