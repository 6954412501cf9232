"""Bath spectral densities and the frequency integrals built from them.

J(w) is normalized so that the bath correlation spectrum at zero temperature
is 4 J(w) for w > 0. Semi-infinite integrals are truncated at 40 * omega_c for
the analytic families (an incomplete-gamma tail bound is checked) and at the
last grid point for tabulated data, beyond which J is taken to be zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator

from .errors import (DivergentLimit, InfraredDivergent, NegativeFrequency,
                     ParameterError, QuadratureError)

FAMILIES = ("ohmic", "super_ohmic", "tabulated")
UV_FACTOR = 40.0


@dataclass(frozen=True)
class QuadSettings:
    panels: int = 8
    tolerance: float = 1e-10
    limit: int = 200

    def __post_init__(self):
        if self.panels < 1 or self.limit < 1 or not self.tolerance > 0:
            raise ParameterError("quadrature settings must be positive")

    def refined(self, factor: int = 2) -> "QuadSettings":
        return QuadSettings(self.panels * factor, self.tolerance, self.limit)


@dataclass(frozen=True)
class SpectralModel:
    family: str = "ohmic"
    eta: float = 0.1
    omega_c: float = 1.0
    s: float = 1.0
    ir_cutoff: float | None = None
    quad: QuadSettings = field(default_factory=QuadSettings)
    table: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown spectral family {self.family!r}; expected one of {FAMILIES}")
        if self.ir_cutoff is not None and not self.ir_cutoff >= 0:
            raise ParameterError("ir_cutoff must be >= 0")
        if self.family == "tabulated":
            if self.table is None:
                raise ParameterError("tabulated spectral density needs a table")
            w, j = (np.asarray(a, dtype=float) for a in self.table)
            if w.ndim != 1 or w.shape != j.shape or len(w) < 4:
                raise ParameterError("table must hold two equal-length columns with at least 4 rows")
            if w[0] != 0:
                raise ParameterError("table must start at omega = 0")
            if np.any(np.diff(w) <= 0):
                raise ParameterError("table frequencies must be strictly increasing")
            if np.any(j < 0) or j[0] != 0:
                raise ParameterError("table J must be nonnegative with J(0) = 0")
            object.__setattr__(self, "table", (w, j))
            # interpolate J/w so the small-w behaviour (linear or faster) is kept
            q = np.empty_like(w)
            q[1:] = j[1:] / w[1:]
            q0, p = _slope_at_zero(w, j)
            q[0] = q[1] if p < -0.25 else q0
            object.__setattr__(self, "_interp", PchipInterpolator(w, q, extrapolate=False))
            return
        if not self.eta >= 0 or not self.omega_c > 0:
            raise ParameterError("eta must be >= 0 and omega_c > 0")
        if self.family == "ohmic":
            object.__setattr__(self, "s", 1.0)
        elif not self.s > 1:
            raise ParameterError("super-ohmic power s must be > 1")

    @property
    def uv_limit(self) -> float:
        if self.family == "tabulated":
            return float(self.table[0][-1])
        return UV_FACTOR * self.omega_c

    @property
    def scale(self) -> float:
        """Characteristic frequency used to lay out quadrature panels."""
        if self.family == "tabulated":
            w, j = self.table
            return float(w[np.argmax(j)]) or float(w[-1]) / 10
        return self.omega_c

    def with_quad(self, quad: QuadSettings) -> "SpectralModel":
        return SpectralModel(self.family, self.eta, self.omega_c, self.s, self.ir_cutoff, quad, self.table)


def load_table(path) -> tuple:
    """Read a two-column (omega, J) text file."""
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 2:
        raise ParameterError(f"{path}: expected two columns, found {data.shape[1]}")
    return data[:, 0].copy(), data[:, 1].copy()


def _jfunc(model: SpectralModel):
    """Unchecked J for scalar or array arguments."""
    if model.family == "tabulated":
        interp = model._interp
        hi = model.uv_limit

        def j(w):
            out = np.asarray(w) * np.nan_to_num(interp(np.minimum(w, hi)), nan=0.0)
            out = np.where(np.asarray(w) > hi, 0.0, out)
            return float(out) if np.ndim(out) == 0 else out
        return j
    eta, wc, s = model.eta, model.omega_c, model.s
    if model.family == "ohmic":
        return lambda w: eta * w * np.exp(-w / wc)
    return lambda w: eta * w**s * wc ** (1 - s) * np.exp(-w / wc)


def eval_J(model: SpectralModel, omega):
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise NegativeFrequency(f"J is defined for omega >= 0, got {omega!r}")
    out = _jfunc(model)(w)
    return float(out) if np.ndim(out) == 0 else np.asarray(out)


def _slope_at_zero(w, j) -> tuple:
    """Extrapolated J(w)/w at w = 0 and the local power of J/w near 0."""
    w, j = w[1:5], j[1:5]
    q = j / w
    p = math.log(q[0] / q[1]) / math.log(w[0] / w[1]) if q[0] > 0 and q[1] > 0 else 0.0
    if p > 0.5:
        # J vanishes faster than w: super-ohmic onset
        return 0.0, p
    # Neville extrapolation of the slopes to w = 0
    t = list(q)
    for k in range(1, len(t)):
        for i in range(len(t) - k):
            t[i] = (w[i + k] * t[i] - w[i] * t[i + 1]) / (w[i + k] - w[i])
    return max(float(t[0]), 0.0), p


def j_tilde_zero(model: SpectralModel) -> float:
    """Limit of J(w)/w as w -> 0."""
    if model.family == "ohmic":
        return model.eta
    if model.family == "super_ohmic":
        return 0.0
    val, p = _slope_at_zero(*model.table)
    if p < -0.25:
        raise DivergentLimit(f"tabulated J(w)/w grows like w^{p:.2f} near 0")
    return val


def coth_half(beta: float, w):
    """coth(beta*w/2); beta may be inf."""
    if math.isinf(beta):
        return np.ones_like(np.asarray(w, dtype=float)) if np.ndim(w) else 1.0
    return 1.0 / np.tanh(beta * np.asarray(w) / 2) if np.ndim(w) else 1.0 / math.tanh(beta * w / 2)


def occupation_lower(x: float) -> float:
    """1/|1 - exp(-x)|."""
    return 1.0 / abs(math.expm1(-x))


def occupation_upper(x: float) -> float:
    """1/|1 - exp(x)|; zero for x = inf."""
    if x > 700:
        return math.exp(-x)
    return 1.0 / abs(math.expm1(x))


def _panel_edges(model: SpectralModel, lo: float, hi: float, quad: QuadSettings) -> np.ndarray:
    n = quad.panels
    mid = min(model.scale, hi)
    edges = []
    if lo < mid:
        if lo > 0:
            edges.extend(np.geomspace(lo, mid, n + 1))
        else:
            edges.append(0.0)
            edges.extend(np.geomspace(mid * 1e-6, mid, n))
    if hi > mid:
        edges.extend(np.linspace(max(mid, lo), hi, n + 1))
    e = np.unique(np.asarray(edges))
    return e[(e >= lo) & (e <= hi)]


def integrate_panels(f, a: float, b: float, model: SpectralModel, quad: QuadSettings | None = None):
    """Panelled adaptive quadrature of f over [a, b]; returns (value, error estimate)."""
    quad = quad or model.quad
    if b <= a:
        return 0.0, 0.0
    edges = _panel_edges(model, a, b, quad)
    if edges[0] > a:
        edges = np.concatenate([[a], edges])
    if edges[-1] < b:
        edges = np.concatenate([edges, [b]])
    total, err, mag = 0.0, 0.0, 0.0
    eps_abs = quad.tolerance / len(edges)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            val, e = integrate.quad(f, lo, hi, limit=quad.limit, epsabs=eps_abs, epsrel=quad.tolerance)
            total += val
            err += e
            mag += abs(val)
    err += 64 * np.finfo(float).eps * mag
    if not math.isfinite(total):
        raise QuadratureError("non-finite quadrature result")
    return total, err


def _check_tail(model: SpectralModel, power: float, weight: float, value: float):
    """Bound the integral of weight * J(w) * w^power beyond the UV limit."""
    if model.family == "tabulated":
        return
    a = model.s + power + 1
    lam = model.uv_limit / model.omega_c
    tail = weight * model.eta * model.omega_c ** (power + 1) * special.gamma(a) * special.gammaincc(a, lam)
    if tail > model.quad.tolerance * max(1.0, abs(value)):
        warnings.warn(f"UV truncation tail {tail:.2e} exceeds quadrature tolerance", RuntimeWarning)


def _lower_limit(model: SpectralModel) -> float:
    return float(model.ir_cutoff) if model.ir_cutoff else 0.0


def _ir_check(model: SpectralModel, beta: float, what: str):
    if model.ir_cutoff or math.isinf(beta):
        return
    if j_tilde_zero(model) > 0:
        raise InfraredDivergent(
            f"{what} diverges logarithmically at w -> 0 for J(w)/w -> {j_tilde_zero(model):g} "
            f"at finite temperature; set ir_cutoff")


def mu_integral(model: SpectralModel, beta: float, with_error: bool = False, quad: QuadSettings | None = None):
    """(2/pi) * int J(w)/w * coth(beta*w/2) dw."""
    _ir_check(model, beta, "mu integral")
    j = _jfunc(model)
    if math.isinf(beta):
        f = lambda w: j(w) / w
    else:
        f = lambda w: j(w) / (w * math.tanh(beta * w / 2))
    val, err = integrate_panels(f, _lower_limit(model), model.uv_limit, model, quad)
    val, err = 2 / math.pi * val, 2 / math.pi * err
    _check_tail(model, -1, 2 / math.pi * float(coth_half(beta, model.uv_limit)), val)
    return (val, err) if with_error else val


def boltzmann_tail_integral(model: SpectralModel, beta: float) -> float:
    """(2/pi) * int J(w)/w * exp(-beta*w) * coth(beta*w/2) dw."""
    if math.isinf(beta):
        return 0.0
    _ir_check(model, beta, "Boltzmann-weighted integral")
    j = _jfunc(model)

    def f(w):
        y = math.exp(-beta * w)
        return j(w) / w * y * (1 + y) / -math.expm1(-beta * w)
    val, _ = integrate_panels(f, _lower_limit(model), model.uv_limit, model)
    return 2 / math.pi * val


def pv_lamb_shift(model: SpectralModel, beta: float, delta_e: float, with_error: bool = False,
                  quad: QuadSettings | None = None):
    """P.V. int J(w) coth(beta*w/2) [1/(w - d) - 1/(w + d)] dw, odd in d."""
    if delta_e == 0:
        return (0.0, 0.0) if with_error else 0.0
    if delta_e < 0:
        val, err = pv_lamb_shift(model, beta, -delta_e, True, quad)
        return (-val, err) if with_error else -val
    quad = quad or model.quad
    j = _jfunc(model)
    jt0 = j_tilde_zero(model)

    def f(w):
        if math.isinf(beta):
            return j(w)
        if w == 0:
            return 2 * jt0 / beta
        return j(w) / math.tanh(beta * w / 2)

    lo, hi, d = _lower_limit(model), model.uv_limit, delta_e
    half = min(d / 2, model.omega_c / 10 if model.family != "tabulated" else model.scale / 10)
    a, b = max(lo, d - half), min(hi, d + half)
    parts = []
    parts.append(integrate_panels(lambda w: f(w) / (w - d), lo, a, model, quad))
    parts.append(integrate_panels(lambda w: f(w) / (w - d), b, hi, model, quad))
    parts.append(integrate_panels(lambda w: -f(w) / (w + d), lo, hi, model, quad))
    if a < d < b:
        fd = f(d)
        sub = lambda w: (f(w) - fd) / (w - d)
        for lo_, hi_ in ((a, d), (d, b)):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                parts.append(integrate.quad(sub, lo_, hi_, limit=quad.limit, epsabs=quad.tolerance / 8,
                                            epsrel=quad.tolerance))
        # the symmetric remainder fd * PV int_a^b dw/(w-d) is zero unless the window was clipped
        if (b - d) != (d - a):
            parts.append((fd * math.log((b - d) / (d - a)), 0.0))
    val = sum(p[0] for p in parts)
    err = sum(p[1] for p in parts)
    return (val, err) if with_error else val


def weight_w1(params, model: SpectralModel) -> float:
    """exp(-lam^2 E_D^2 (4/pi) int tanh(beta*w/4) J(w)/w dw)."""
    if params.lam == 0 or params.E_D == 0:
        return 1.0
    j = _jfunc(model)
    beta = params.beta
    if math.isinf(beta):
        f = lambda w: j(w) / w
    else:
        f = lambda w: math.tanh(beta * w / 4) * j(w) / w
    val, _ = integrate_panels(f, _lower_limit(model), model.uv_limit, model)
    return math.exp(-params.lam**2 * params.E_D**2 * 4 / math.pi * val)
