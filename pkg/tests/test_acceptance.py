"""Acceptance criteria 1-12. Each test records a pass/fail line printed at the end of the run."""

import dataclasses
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import record
from datransfer.dynamics import PropagatorContext, asymptotic_state, propagate
from datransfer.model import SystemParams, build_hamiltonian, effective_reduction
from datransfer.observables import (InitialDistribution, alpha_of_eta, efficiency_coherent, efficiency_incoherent,
                                    fluctuation_expectation, make_initial_state, max_acceptor_probability,
                                    uniform_donor_population)
from datransfer.oracle import (TruncatedBath, coherence_frequency, independent_boson_coherence, redfield_rates,
                               stationarity_check, unitary_reference)
from datransfer.resonances import compute_resonances, relaxation_rate_closed_form
from datransfer.spectral import QuadSettings, SpectralModel
from datransfer.validation import brute_force_rate, random_params, random_state

SUPER = SpectralModel("super_ohmic", eta=0.5, omega_c=5.0, s=3)
TIMES = (0.1, 1.0, 10.0)


def make(**kw):
    base = dict(E_D=1.0, E_A=-1.0, N_D=3, N_A=2, V=0.2, g_D=1.0, g_A=-1.0, lam=0.1, beta=2.0)
    base.update(kw)
    return SystemParams(**base)


def detuned(eta, N_D=3, N_A=2, v=0.4, **kw):
    """Parameters with (E_D - E_A)/(2|v|) = eta."""
    return make(E_D=0.0, E_A=-2 * v * eta, N_D=N_D, N_A=N_A, V=v / math.sqrt(N_D * N_A), **kw)


def test_c01_unitary_limit(rng):
    start = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        p = random_params(rng, max_dim=8, lam=0.0)
        ctx = PropagatorContext.build(p, SUPER)
        rho0 = random_state(rng, p.dim)
        H, _ = build_hamiltonian(p)
        for t in TIMES:
            worst = max(worst, np.linalg.norm(propagate(ctx, rho0, t) - unitary_reference(H, rho0, t)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5
    record(1, ok, f"max error {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_c02_structural_invariants(rng):
    tr = herm = conf = 0.0
    times = np.geomspace(0.01, 1e3, 10)
    for _ in range(50):
        p = dataclasses.replace(random_params(rng, lam=0.0), lam=float(rng.uniform(0.01, 0.2)))
        ctx = PropagatorContext.build(p, SUPER)
        pr = ctx.projections
        S = np.stack([pr.D, pr.A], axis=1)
        sd = np.concatenate([S, pr.xi_D.T], axis=1).astype(complex)
        sa = np.concatenate([S, pr.xi_A.T], axis=1).astype(complex)
        rho0 = random_state(rng, p.dim)
        rho_s, rho_sd, rho_sa = (random_state(rng, p.dim, b) for b in (S.astype(complex), sd, sa))
        for t in times:
            r = propagate(ctx, rho0, t)
            tr = max(tr, abs(np.trace(r) - 1))
            herm = max(herm, np.abs(r - r.conj().T).max())
            # blocks outside the initial support stay empty
            out_s = np.eye(p.dim) - pr.P_bar_S
            conf = max(conf, np.abs(out_s @ propagate(ctx, rho_s, t)).max(),
                       np.abs(pr.P_Aperp @ propagate(ctx, rho_sd, t)).max(),
                       np.abs(pr.P_Dperp @ propagate(ctx, rho_sa, t)).max())
    ok = tr <= 1e-10 and herm <= 1e-12 and conf <= 1e-12
    record(2, ok, f"trace {tr:.1e}, hermiticity {herm:.1e}, confinement {conf:.1e}")
    assert ok


def test_c03_stationary_manifold(rng):
    worst = 0.0
    for nd, na in ((3, 2), (2, 4), (5, 5)):
        p = make(N_D=nd, N_A=na)
        ctx = PropagatorContext.build(p, SUPER)
        for xi in (ctx.projections.xi_D, ctx.projections.xi_A):
            rho0 = random_state(rng, p.dim, xi.T.astype(complex))
            for t in (0.0, 0.5, 10.0, 1e3, 1e6):
                worst = max(worst, np.linalg.norm(propagate(ctx, rho0, t) - rho0, 2))
    bath = TruncatedBath.from_spectral(SUPER, 3, 3)
    psi = np.array([1.0, -1.0, 0.0]) / math.sqrt(2)
    residual = stationarity_check(make(N_D=2, N_A=1, lam=0.2), bath, psi, np.linspace(0, 40, 9))
    ok = worst <= 1e-12 and residual <= 1e-8
    record(3, ok, f"main-term deviation {worst:.1e}, bath residual {residual:.1e}")
    assert ok


def test_c04_asymptotic_envelope(rng):
    worst = 0.0
    for nd, na, beta in ((3, 2, 2.0), (2, 3, 0.5), (4, 1, 10.0)):
        p = make(N_D=nd, N_A=na, beta=beta)
        ctx = PropagatorContext.build(p, SUPER)
        pr = ctx.projections
        g = ctx.gamma_min
        for comp in (pr.xi_D, pr.xi_A):
            basis = np.concatenate([np.stack([pr.D, pr.A]), comp]).T.astype(complex)
            rho0 = random_state(rng, p.dim, basis)
            asym = asymptotic_state(ctx, rho0)
            for tg in (1.0, 3.0, 10.0):
                dev = np.linalg.norm(propagate(ctx, rho0, tg / g) - asym, 2)
                worst = max(worst, dev / (2 * math.exp(-tg)))
    ok = worst <= 1.0
    record(4, ok, f"max deviation / bound {worst:.3f}")
    assert ok


def test_c05_efficiency_closed_forms(rng):
    errs = []
    for nd, beta, eta in ((3, 2.0, 0.5), (4, 0.3, 2.0), (2, 8.0, 0.0)):
        p = detuned(eta, N_D=nd, beta=beta)
        ctx = PropagatorContext.build(p, SUPER)
        t = 60 / ctx.gamma_min
        dist = rng.dirichlet(np.ones(nd))
        for kind in ("incoherent", "coherent"):
            d = InitialDistribution(dist, kind)
            pd = np.trace(propagate(ctx, make_initial_state(d, (nd, 2)), t)[:nd, :nd]).real
            rep = efficiency_incoherent(ctx.eff, beta, nd) if kind == "incoherent" else \
                efficiency_coherent(ctx.eff, beta, nd, d)
            errs.append(abs(pd - rep.p_D_inf))
    dyn = max(errs)

    lim = []
    for nd in (2, 3, 8):
        for eta in (0.0, 0.5):
            eff = effective_reduction(detuned(eta, N_D=nd))
            split = eff.e1 - eff.e2
            a2 = alpha_of_eta(eta) ** 2
            lim.append(abs(efficiency_incoherent(eff, 1e-3 / split, nd).p_D_inf - (1 - 1 / (2 * nd))))
            lim.append(abs(efficiency_incoherent(eff, 1e3 / split, nd).p_D_inf - (1 - 1 / (nd * (1 + a2)))))
    limits = max(lim)

    order_ok = True
    eff = effective_reduction(detuned(1.0, N_D=5))
    for _ in range(100):
        dist = rng.dirichlet(np.full(5, 0.5))
        inc = efficiency_incoherent(eff, 2.0, 5).p_D_inf
        coh = efficiency_coherent(eff, 2.0, 5, dist).p_D_inf
        order_ok &= coh < inc
    for k in range(5):
        point = np.eye(5)[k]
        order_ok &= efficiency_coherent(eff, 2.0, 5, point).p_D_inf == pytest.approx(
            efficiency_incoherent(eff, 2.0, 5).p_D_inf, abs=1e-15)
    ok = dyn <= 1e-8 and limits <= 1e-4 and order_ok
    record(5, ok, f"dynamics {dyn:.1e}, limits {limits:.1e}, ordering {'ok' if order_ok else 'violated'}")
    assert ok


def test_c06_uniform_distribution_is_optimal(rng):
    p = detuned(1.5, N_D=6, beta=3.0)
    eff = effective_reduction(p)
    best = efficiency_coherent(eff, p.beta, 6, np.full(6, 1 / 6)).p_A_inf
    cap = max_acceptor_probability(eff, p.beta)
    beaten = 0
    for _ in range(200):
        dist = rng.dirichlet(np.full(6, rng.uniform(0.2, 5)))
        beaten += efficiency_coherent(eff, p.beta, 6, dist).p_A_inf > best + 1e-15
    max_err = abs(best - cap)

    deep = detuned(20.0, N_D=6)
    deff = effective_reduction(deep)
    beta = 1e3 / (deff.e1 - deff.e2)
    depleted = efficiency_coherent(deff, beta, 6, np.full(6, 1 / 6)).p_D_inf
    a2 = alpha_of_eta(20.0) ** 2
    ok = beaten == 0 and max_err <= 1e-10 and depleted <= 2.5e-3 and depleted == pytest.approx(a2 / (1 + a2),
                                                                                                abs=1e-12)
    record(6, ok, f"{beaten} distributions beat uniform, max formula error {max_err:.1e}, "
                  f"deep-detuning p_D {depleted:.2e}")
    assert ok


def test_c07_rates_against_redfield():
    worst = gworst = 0.0
    for beta in (0.5, 2.0, 8.0):
        for eta in (0.0, 0.75, 3.0):
            p = detuned(eta, N_D=2, N_A=2, v=0.5, beta=beta)
            eff = effective_reduction(p)
            lam = math.sqrt(0.02 * (eff.e1 - eff.e2))
            p = dataclasses.replace(p, lam=lam)
            res = compute_resonances(p, eff, SUPER)
            rf = redfield_rates(eff, SUPER, beta, lam)
            worst = max(worst, abs(res[1, 2].imag / rf.relaxation - 1), abs(res[1, 3].imag / rf.coherence - 1))
            g0 = lam**2 * relaxation_rate_closed_form(p, eff, SUPER)
            gworst = max(gworst, abs(res[1, 2].imag - g0))
    ok = worst <= 0.05 and gworst <= 1e-12
    record(7, ok, f"max relative rate deviation {worst:.1e} (super-ohmic), gamma0 identity {gworst:.1e}")
    assert ok


def test_c08_resonance_structure():
    mirror = scaling = nind = 0.0
    for model in (SUPER, SpectralModel("ohmic", eta=0.5, omega_c=10.0, ir_cutoff=1e-6)):
        p = make()
        eff = effective_reduction(p)
        res = compute_resonances(p, eff, model)
        mirror = max(mirror, np.abs(res.eps[2] + np.conj(res.eps[1])).max())
        res2 = compute_resonances(dataclasses.replace(p, lam=2 * p.lam), eff, model)
        scaling = max(scaling, np.abs(res2.eps.imag - 4 * res.eps.imag).max())
        for nd, na in ((1, 6), (6, 1), (2, 3), (7, 9)):
            q = make(N_D=nd, N_A=na, V=p.v / math.sqrt(nd * na))
            nind = max(nind, np.abs(compute_resonances(q, effective_reduction(q), model).eps - res.eps).max())
    ok = mirror == 0 and scaling <= 1e-16 and nind <= 1e-14
    record(8, ok, f"mirror {mirror:.1e}, scaling {scaling:.1e}, site-count independence {nind:.1e}")
    assert ok


def test_c09_fluctuations(rng):
    v = 0.4
    var_err = mu_err = 0.0
    scaled = []
    for nd in (2, 4, 8, 16, 32):
        p = make(N_D=nd, N_A=1, V=v / math.sqrt(nd))
        ctx = PropagatorContext.build(p, SUPER)
        rho0 = make_initial_state(InitialDistribution.uniform(nd), (nd, 1))
        for t in (0.0, 1.0, 10.0, 100.0, 1e4):
            rho = propagate(ctx, rho0, t)
            pd = np.trace(rho[:nd, :nd]).real
            var = fluctuation_expectation(rho, nd)
            var_err = max(var_err, abs(var - pd * (1 - pd) / nd**2))
            mu_err = max(mu_err, abs(uniform_donor_population(ctx, t) - pd))
            if t == 10.0:
                scaled.append(var * nd**2)
    spread = max(scaled) - min(scaled)
    ok = var_err <= 1e-8 and mu_err <= 1e-8 and spread <= 1e-8
    record(9, ok, f"variance {var_err:.1e}, N_D^2 scaling spread {spread:.1e}, mu(t) {mu_err:.1e}")
    assert ok


def test_c10_brute_force_rate():
    start = time.perf_counter()
    r = brute_force_rate()
    elapsed = time.perf_counter() - start
    rel = r.fitted / r.predicted - 1
    norm = np.abs(r.series.norms - 1).max()
    ok = abs(rel) <= 0.2 and elapsed < 60 and norm <= 1e-10
    record(10, ok, f"fitted {r.fitted:.5f} vs predicted {r.predicted:.5f} ({rel:+.1%}), {elapsed:.1f} s")
    assert ok


def test_c11_independent_boson():
    model = dataclasses.replace(SUPER, quad=QuadSettings(tolerance=1e-6))
    c0_err = 0.0
    signs_ok = True
    for ed, ea, beta in ((1.0, -0.5, 2.0), (0.3, 1.2, 1.0), (-2.0, 0.5, math.inf), (1.5, 0.0, 0.5)):
        p = make(E_D=ed, E_A=ea, lam=0.15, beta=beta)
        c0_err = max(c0_err, abs(independent_boson_coherence(p, model, 0.0) - 1))
        res = compute_resonances(p, effective_reduction(p), model)
        shift_res = res[4, 3].real - (ed - ea)
        shift_ib = coherence_frequency(p, model, 20 * 2 * math.pi / model.omega_c) - (ed - ea)
        signs_ok &= np.sign(shift_res) == np.sign(shift_ib) != 0
    ok = c0_err == 0 and signs_ok
    record(11, ok, f"|C(0) - 1| = {c0_err:.1e}, shift signs {'agree' if signs_ok else 'disagree'}")
    assert ok


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "datransfer", *args], capture_output=True, text=True)


def test_c12_cli_determinism(tmp_path):
    example = Path(__file__).resolve().parents[1] / "scenarios" / "example.toml"
    same = True
    for verb in ("evolve", "sweep", "resonances"):
        a, b = tmp_path / f"{verb}_a", tmp_path / f"{verb}_b"
        for out in (a, b):
            assert _cli(verb, "--config", str(example), "--out", str(out)).returncode == 0
        for f in sorted(a.iterdir()):
            if f.name == "manifest.json":
                ma, mb = json.loads(f.read_text()), json.loads((b / f.name).read_text())
                ma.pop("timestamp"), mb.pop("timestamp")
                same &= ma == mb
            else:
                same &= f.read_bytes() == (b / f.name).read_bytes()
    tight = tmp_path / "tight.toml"
    tight.write_text(example.read_text().replace("[validate]", "[validate]\ntolerances = { unitary = 1e-15 }"))
    normal = _cli("validate", "--config", str(example), "--out", str(tmp_path / "v1")).returncode
    tightened = _cli("validate", "--config", str(tight), "--out", str(tmp_path / "v2")).returncode
    ok = same and normal == 0 and tightened != 0
    record(12, ok, f"identical outputs: {same}, validate exit {normal} normal / {tightened} tightened")
    assert ok
