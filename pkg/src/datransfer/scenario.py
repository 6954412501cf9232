"""Scenario files: TOML with fixed sections, unknown keys rejected."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError, DATransferError
from .model import SystemParams, check_state
from .observables import InitialDistribution, make_initial_state
from .spectral import QuadSettings, SpectralModel, load_table

SECTIONS = {
    "system": {"E_D", "E_A", "N_D", "N_A", "V", "g_D", "g_A", "lambda", "beta", "weak_coupling_threshold"},
    "spectral": {"family", "eta", "omega_c", "s", "ir_cutoff", "table", "panels", "tolerance"},
    "initial": {"kind", "p", "file"},
    "time_grid": {"t_max", "points", "spacing", "t_min"},
    "outputs": {"artifacts", "elements"},
    "sweep": {"axis", "values", "start", "stop", "num", "log"},
    "validate": {"tolerances", "brute_force", "random_cases"},
}
REQUIRED_SYSTEM = ("E_D", "E_A", "N_D", "N_A", "V", "g_D", "g_A", "lambda", "beta")
ARTIFACTS = {"timeseries", "manifest", "resonances"}
AXES = ("eta", "beta", "N_D", "lambda", "p")
INITIAL_KINDS = ("uniform_D", "incoherent", "coherent", "file")
DEFAULT_TOLERANCES = {
    "unitary": 1e-9,
    "trace": 1e-10,
    "hermitian": 1e-12,
    "confinement": 1e-12,
    "stationary": 1e-12,
    "asymptotic": 2.0,
    "efficiency": 1e-8,
    "donor_element": 1e-10,
    "resonance_structure": 1e-14,
    "gamma0": 1e-12,
    "redfield": 0.05,
    "fluctuation": 1e-8,
    "ib_coherence": 1e-6,
    "brute_force": 0.2,
}


@dataclass(frozen=True)
class TimeGrid:
    t_max: float
    points: int
    spacing: str = "linear"
    t_min: float | None = None

    def values(self) -> np.ndarray:
        if self.spacing == "linear":
            return np.linspace(0.0, self.t_max, self.points)
        return np.geomspace(self.t_min or self.t_max * 1e-4, self.t_max, self.points)


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple


@dataclass(frozen=True)
class Scenario:
    params: SystemParams
    spectral: SpectralModel
    initial_kind: str = "uniform_D"
    initial_p: tuple | None = None
    initial_file: Path | None = None
    time_grid: TimeGrid | None = None
    artifacts: tuple = ("timeseries", "manifest", "resonances")
    elements: tuple = (("D1", "D1"), ("phi1", "phi2"))
    sweep: SweepSpec | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    brute_force: bool = False
    random_cases: int = 20

    def initial_state(self) -> np.ndarray:
        nd, na = self.params.N_D, self.params.N_A
        if self.initial_kind == "uniform_D":
            return make_initial_state(InitialDistribution.uniform(nd, "coherent"), (nd, na))
        if self.initial_kind in ("incoherent", "coherent"):
            return make_initial_state(InitialDistribution(np.array(self.initial_p), self.initial_kind), (nd, na))
        return read_state_file(self.initial_file, (nd, na))

    def distribution(self) -> np.ndarray:
        if self.initial_kind in ("incoherent", "coherent"):
            return np.array(self.initial_p)
        return np.full(self.params.N_D, 1.0 / self.params.N_D)


def read_state_file(path, dims) -> np.ndarray:
    """Plain text: 'N_D N_A' then one 'row col re im' line per matrix entry."""
    path = Path(path)
    try:
        lines = [ln.split() for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    except OSError as exc:
        raise ConfigError(f"cannot read state file: {exc}", str(path)) from exc
    if not lines or len(lines[0]) != 2:
        raise ConfigError("first line must be 'N_D N_A'", f"{path}:1")
    nd, na = (int(x) for x in lines[0])
    if (nd, na) != tuple(dims):
        raise ConfigError(f"state dimensions ({nd}, {na}) do not match system ({dims[0]}, {dims[1]})", f"{path}:1")
    d = nd + na
    rho = np.zeros((d, d), dtype=complex)
    seen = set()
    for lineno, parts in enumerate(lines[1:], start=2):
        if len(parts) != 4:
            raise ConfigError("expected 'row col re im'", f"{path}:{lineno}")
        r, c = int(parts[0]), int(parts[1])
        if not (0 <= r < d and 0 <= c < d):
            raise ConfigError(f"index ({r}, {c}) out of range", f"{path}:{lineno}")
        rho[r, c] = complex(float(parts[2]), float(parts[3]))
        seen.add((r, c))
    if len(seen) != d * d:
        raise ConfigError(f"expected {d * d} entries, found {len(seen)}", str(path))
    try:
        return check_state(rho, d)
    except DATransferError as exc:
        raise ConfigError(str(exc), str(path)) from exc


def write_state_file(path, rho, dims):
    nd, na = dims
    with open(path, "w") as fh:
        fh.write(f"{nd} {na}\n")
        for (r, c), x in np.ndenumerate(rho):
            fh.write(f"{r} {c} {x.real:.16e} {x.imag:.16e}\n")


def _number(sec, key, value, where, integer=False):
    if isinstance(value, str) and value.lower() in ("inf", "infinity"):
        value = math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", f"{where}.{key}")
    if integer and (not isinstance(value, int)):
        raise ConfigError(f"expected an integer, got {value!r}", f"{where}.{key}")
    return value


def _check_keys(table, allowed, where):
    if not isinstance(table, dict):
        raise ConfigError("expected a table", where)
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} (allowed: {', '.join(sorted(allowed))})", f"{where}.{key}")


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(exc), str(path)) from exc
    return parse_scenario(raw, base=path.parent)


def parse_scenario(raw: dict, base: Path = Path(".")) -> Scenario:
    _check_keys(raw, SECTIONS, "config")
    if "system" not in raw:
        raise ConfigError("missing section", "system")
    sysraw = raw["system"]
    _check_keys(sysraw, SECTIONS["system"], "system")
    for key in REQUIRED_SYSTEM:
        if key not in sysraw:
            raise ConfigError("missing required key", f"system.{key}")
    vals = {k: _number("system", k, v, "system", integer=k in ("N_D", "N_A")) for k, v in sysraw.items()}
    try:
        params = SystemParams(E_D=vals["E_D"], E_A=vals["E_A"], N_D=vals["N_D"], N_A=vals["N_A"], V=vals["V"],
                              g_D=vals["g_D"], g_A=vals["g_A"], lam=vals["lambda"], beta=vals["beta"],
                              weak_coupling_threshold=vals.get("weak_coupling_threshold", 0.1))
    except DATransferError as exc:
        raise ConfigError(str(exc), "system") from exc

    spec = _parse_spectral(raw.get("spectral", {}), base)
    kw = {}
    init = raw.get("initial", {})
    _check_keys(init, SECTIONS["initial"], "initial")
    kind = init.get("kind", "uniform_D")
    if kind not in INITIAL_KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {INITIAL_KINDS}", "initial.kind")
    kw["initial_kind"] = kind
    if kind in ("incoherent", "coherent"):
        if "p" not in init:
            raise ConfigError("distribution required", "initial.p")
        p = np.asarray([_number("initial", "p", x, "initial") for x in init["p"]], dtype=float)
        if p.size != params.N_D or np.any(p < 0) or abs(p.sum() - 1) > 1e-10:
            raise ConfigError(f"p must hold {params.N_D} nonnegative entries summing to 1", "initial.p")
        kw["initial_p"] = tuple(p)
    if kind == "file":
        if "file" not in init:
            raise ConfigError("state file required", "initial.file")
        f = Path(init["file"])
        f = f if f.is_absolute() else base / f
        if not f.exists():
            raise ConfigError(f"file {f} does not exist", "initial.file")
        kw["initial_file"] = f

    if "time_grid" in raw:
        tg = raw["time_grid"]
        _check_keys(tg, SECTIONS["time_grid"], "time_grid")
        for key in ("t_max", "points"):
            if key not in tg:
                raise ConfigError("missing required key", f"time_grid.{key}")
        t_max = _number("time_grid", "t_max", tg["t_max"], "time_grid")
        points = _number("time_grid", "points", tg["points"], "time_grid", integer=True)
        spacing = tg.get("spacing", "linear")
        t_min = tg.get("t_min")
        if spacing not in ("linear", "log"):
            raise ConfigError("spacing must be 'linear' or 'log'", "time_grid.spacing")
        if points < 2:
            raise ConfigError("time grid needs at least 2 points", "time_grid.points")
        if not (t_max > 0 and math.isfinite(t_max)):
            raise ConfigError("t_max must be positive and finite", "time_grid.t_max")
        if t_min is not None:
            t_min = _number("time_grid", "t_min", t_min, "time_grid")
            if spacing != "log" or not 0 < t_min < t_max:
                raise ConfigError("t_min applies to log spacing and must satisfy 0 < t_min < t_max",
                                  "time_grid.t_min")
        kw["time_grid"] = TimeGrid(float(t_max), points, spacing, t_min)

    if "outputs" in raw:
        out = raw["outputs"]
        _check_keys(out, SECTIONS["outputs"], "outputs")
        arts = tuple(out.get("artifacts", ("timeseries", "manifest", "resonances")))
        bad = set(arts) - ARTIFACTS
        if bad:
            raise ConfigError(f"unknown artifacts {sorted(bad)}", "outputs.artifacts")
        kw["artifacts"] = arts
        if "elements" in out:
            els = []
            for pair in out["elements"]:
                if not (isinstance(pair, list) and len(pair) == 2):
                    raise ConfigError("each element is a [bra, ket] pair", "outputs.elements")
                for label in pair:
                    _selector(label, params)
                els.append(tuple(pair))
            kw["elements"] = tuple(els)

    if "sweep" in raw:
        kw["sweep"] = _parse_sweep(raw["sweep"])

    if "validate" in raw:
        v = raw["validate"]
        _check_keys(v, SECTIONS["validate"], "validate")
        tol = dict(DEFAULT_TOLERANCES)
        tv = v.get("tolerances", {})
        _check_keys(tv, DEFAULT_TOLERANCES, "validate.tolerances")
        for k, x in tv.items():
            tol[k] = float(_number("validate.tolerances", k, x, "validate.tolerances"))
        kw["tolerances"] = tol
        kw["brute_force"] = bool(v.get("brute_force", False))
        kw["random_cases"] = int(v.get("random_cases", 20))
    return Scenario(params=params, spectral=spec, **kw)


def _parse_spectral(sp: dict, base: Path) -> SpectralModel:
    _check_keys(sp, SECTIONS["spectral"], "spectral")
    family = sp.get("family", "ohmic")
    quad = QuadSettings(panels=int(sp.get("panels", 8)), tolerance=float(sp.get("tolerance", 1e-10)))
    table = None
    if family == "tabulated":
        if "table" not in sp:
            raise ConfigError("tabulated family needs a table file", "spectral.table")
        f = Path(sp["table"])
        f = f if f.is_absolute() else base / f
        if not f.exists():
            raise ConfigError(f"file {f} does not exist", "spectral.table")
        table = load_table(f)
    ir = sp.get("ir_cutoff")
    try:
        return SpectralModel(family=family, eta=float(sp.get("eta", 0.1)), omega_c=float(sp.get("omega_c", 1.0)),
                             s=float(sp.get("s", 1.0 if family != "super_ohmic" else 3.0)),
                             ir_cutoff=None if ir is None else float(ir), quad=quad, table=table)
    except DATransferError as exc:
        raise ConfigError(str(exc), "spectral") from exc


def _parse_sweep(sw: dict) -> SweepSpec:
    _check_keys(sw, SECTIONS["sweep"], "sweep")
    axis = sw.get("axis")
    if axis not in AXES:
        raise ConfigError(f"axis must be one of {AXES}", "sweep.axis")
    if "values" in sw:
        values = [float(x) for x in sw["values"]]
    else:
        for key in ("start", "stop", "num"):
            if key not in sw:
                raise ConfigError("give 'values' or start/stop/num", f"sweep.{key}")
        fn = np.geomspace if sw.get("log", False) else np.linspace
        values = list(fn(float(sw["start"]), float(sw["stop"]), int(sw["num"])))
    if not values:
        raise ConfigError("empty sweep grid", "sweep")
    if axis == "N_D":
        if any(int(x) != x or x < 1 for x in values):
            raise ConfigError("N_D values must be positive integers", "sweep.values")
    if axis == "p" and any(not 0 <= x <= 1 for x in values):
        raise ConfigError("p-interpolation values must lie in [0, 1]", "sweep.values")
    if axis in ("beta",) and any(x <= 0 for x in values):
        raise ConfigError("beta values must be positive", "sweep.values")
    if axis == "eta" and any(x < 0 for x in values):
        raise ConfigError("eta values must be >= 0", "sweep.values")
    return SweepSpec(axis, tuple(values))


def _selector(label: str, params: SystemParams) -> np.ndarray:
    """Vector for an element label: D<k>, A<k> (1-based sites), D, A, phi1, phi2."""
    from .model import build_projections, effective_reduction
    d = params.dim
    vec = np.zeros(d)
    if label in ("D", "A", "phi1", "phi2"):
        if label == "D":
            vec[:params.N_D] = 1 / math.sqrt(params.N_D)
            return vec
        if label == "A":
            vec[params.N_D:] = 1 / math.sqrt(params.N_A)
            return vec
        eff = effective_reduction(params)
        return build_projections(params, eff).phi[0 if label == "phi1" else 1]
    if len(label) > 1 and label[0] in "DA" and label[1:].isdigit():
        k = int(label[1:])
        n = params.N_D if label[0] == "D" else params.N_A
        if not 1 <= k <= n:
            raise ConfigError(f"site {label} out of range", "outputs.elements")
        vec[(k - 1) + (0 if label[0] == "D" else params.N_D)] = 1
        return vec
    raise ConfigError(f"unknown element label {label!r}", "outputs.elements")


selector_vector = _selector
