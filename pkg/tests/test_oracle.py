import math

import mpmath
import numpy as np
import pytest

from datransfer.errors import DimensionTooLarge, InfraredDivergent
from datransfer.model import SystemParams, build_hamiltonian, effective_reduction, gibbs_effective
from datransfer.oracle import (OracleCheck, TruncatedBath, dephasing_integrals, dephasing_plateau,
                               displaced_vacuum, full_hamiltonian, independent_boson_coherence, redfield_reference,
                               redfield_stationary_state, stationarity_check, truncated_bath_evolution,
                               unitary_reference)
from datransfer.spectral import SpectralModel
from datransfer.validation import random_state

SUPER = SpectralModel("super_ohmic", eta=0.5, omega_c=5.0, s=3)


def make(**kw):
    base = dict(E_D=1.0, E_A=-1.0, N_D=1, N_A=1, V=0.5, g_D=1.0, g_A=-1.0, lam=0.1, beta=1.0)
    base.update(kw)
    return SystemParams(**base)


def test_unitary_rabi():
    H = np.array([[0.0, 0.4], [0.4, 0.0]])
    rho = unitary_reference(H, np.diag([1.0, 0.0]), 2.0)
    assert rho[0, 0].real == pytest.approx(math.cos(0.8) ** 2, abs=1e-15)
    with pytest.raises(DimensionTooLarge):
        unitary_reference(np.eye(65), np.eye(65) / 65, 1.0)


def test_oracle_check_fields():
    c = OracleCheck.compare("x", 1.1, 1.0, 0.2, relative=True)
    assert c.passed and c.rel_err == pytest.approx(0.1)
    assert c.as_dict()["pass"] is True
    assert not OracleCheck.compare("y", 1.0, 0.0, 0.5).passed


def test_redfield_without_coupling():
    eff = effective_reduction(make())
    kappa = redfield_reference(eff, SUPER, 1.0, 0.0)
    d = eff.e1 - eff.e2
    np.testing.assert_allclose(sorted(kappa.imag), [-d, 0, 0, d], atol=1e-14)
    np.testing.assert_allclose(kappa.real, 0, atol=1e-14)


@pytest.mark.parametrize("model", [SUPER, SpectralModel("ohmic", eta=0.5, omega_c=10.0)])
def test_redfield_stationary_state_is_gibbs(model):
    eff = effective_reduction(make())
    for beta in (0.5, 2.0):
        np.testing.assert_allclose(redfield_stationary_state(eff, model, beta, 0.1), gibbs_effective(eff, beta),
                                   atol=1e-12)


def test_dephasing_integrals_against_mpmath():
    beta, t = 1.5, 2.0
    phi, gam = dephasing_integrals(SUPER, beta, t)
    J = lambda w: 0.5 * w**3 / 25 * mpmath.exp(-w / 5)
    pts = [0, 1, 5, 20, 200]
    ref_phi = 2 / mpmath.pi * mpmath.quad(lambda w: J(w) * (w * t - mpmath.sin(w * t)) / w**2, pts)
    ref_gam = 2 / mpmath.pi * mpmath.quad(
        lambda w: J(w) * mpmath.coth(beta * w / 2) * (1 - mpmath.cos(w * t)) / w**2, pts)
    assert phi == pytest.approx(float(ref_phi), rel=1e-8)
    assert gam == pytest.approx(float(ref_gam), rel=1e-8)


def test_coherence_at_zero_time():
    assert independent_boson_coherence(make(N_D=2, N_A=2), SUPER, 0.0) == 1


def test_equal_energies_do_not_dephase():
    p = make(E_D=0.7, E_A=0.7, lam=0.3)
    for t in (1.0, 30.0):
        assert abs(independent_boson_coherence(p, SUPER, t)) == pytest.approx(1, abs=1e-14)


def test_plateau_reached_at_long_times():
    p = make(lam=0.2)
    plateau = dephasing_plateau(p, SUPER)
    assert 0 < plateau < 1
    assert abs(abs(independent_boson_coherence(p, SUPER, 200.0)) - plateau) <= 1e-4


def test_plateau_divergence():
    with pytest.raises(InfraredDivergent):
        dephasing_plateau(make(), SpectralModel("ohmic", eta=0.5, omega_c=5.0))
    with pytest.raises(InfraredDivergent):
        dephasing_plateau(make(), SpectralModel("super_ohmic", eta=0.5, omega_c=5.0, s=2))


def test_bath_discretization():
    bath = TruncatedBath.from_spectral(SUPER, 5, 1)
    assert bath.M == 5 and np.all(np.diff(bath.frequencies) > 0)
    total = float(mpmath.quad(lambda w: 0.5 * w**3 / 25 * mpmath.exp(-w / 5), [0, 5, 50]))
    assert (bath.couplings**2).sum() == pytest.approx(4 / math.pi * total, rel=1e-10)


def test_no_modes_is_unitary(rng):
    p = make(N_D=2, N_A=1, lam=0.3)
    bath = TruncatedBath.from_spectral(SUPER, 0, 3)
    rho0 = random_state(rng, p.dim)
    ev = truncated_bath_evolution(p, bath, rho0, [0.0, 1.5, 4.0])
    H, _ = build_hamiltonian(p)
    for t, r in zip(ev.t, ev.reduced):
        np.testing.assert_allclose(r, unitary_reference(H, rho0, t), atol=1e-12)


def test_zero_coupling_bath_is_unitary(rng):
    p = make(lam=0.0)
    bath = TruncatedBath.from_spectral(SUPER, 3, 2)
    rho0 = random_state(rng, p.dim)
    ev = truncated_bath_evolution(p, bath, rho0, [0.0, 2.0, 9.0])
    H, _ = build_hamiltonian(p)
    for t, r in zip(ev.t, ev.reduced):
        np.testing.assert_allclose(r, unitary_reference(H, rho0, t), atol=1e-12)


def test_norm_conserved():
    p = make(lam=0.3)
    bath = TruncatedBath.from_spectral(SUPER, 3, 3)
    ev = truncated_bath_evolution(p, bath, np.diag([1.0, 0.0]), np.linspace(0, 30, 7))
    np.testing.assert_allclose(ev.norms, 1, atol=1e-10)
    assert np.all((ev.p_D >= -1e-12) & (ev.p_D <= 1 + 1e-12))


def test_sparse_and_dense_paths_agree(monkeypatch):
    from datransfer import oracle
    p = make(lam=0.3)
    bath = TruncatedBath.from_spectral(SUPER, 3, 3)
    grid = [0.0, 1.0, 5.0]
    dense = truncated_bath_evolution(p, bath, np.diag([1.0, 0.0]), grid)
    monkeypatch.setattr(oracle, "DENSE_LIMIT", 0)
    sparse_ = truncated_bath_evolution(p, bath, np.diag([1.0, 0.0]), grid)
    np.testing.assert_allclose(sparse_.reduced, dense.reduced, atol=1e-10)


def test_complement_state_stationary_in_bath():
    grid = np.linspace(0, 40, 9)
    psi = np.array([1.0, -1.0, 0.0]) / math.sqrt(2)
    bath = TruncatedBath.from_spectral(SUPER, 3, 3)
    assert stationarity_check(make(N_D=2, lam=0.0), bath, psi, grid, displaced=False) <= 1e-10
    assert stationarity_check(make(N_D=2, lam=0.2), bath, psi, grid) <= 1e-8
    # negative control: the symmetric donor state hybridizes with the acceptor
    D = np.array([1.0, 1.0, 0.0]) / math.sqrt(2)
    assert stationarity_check(make(N_D=2, lam=0.2), bath, D, grid) > 1e-2


def test_displaced_vacuum_normalized():
    bath = TruncatedBath.from_spectral(SUPER, 2, 4)
    chi = displaced_vacuum(bath, 0.2, 1.0)
    assert np.linalg.norm(chi) == pytest.approx(1, abs=1e-14)


def test_dimension_cap():
    bath = TruncatedBath.from_spectral(SUPER, 12, 3)
    with pytest.raises(DimensionTooLarge):
        full_hamiltonian(make(), bath)
