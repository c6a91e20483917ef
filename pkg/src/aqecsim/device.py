"""Device parameter registry, static Hamiltonians, collapse operators and reset rates.

Units: angular frequencies in rad/us, times in us. Profiles store linear
frequencies in MHz and are converted with a factor 2*pi on load.
"""

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .quantum import HilbertLayout, mode_operator

TWO_PI = 2 * np.pi
SCHEMA_VERSION = 1
PROFILE_DIR_ENV = "AQECSIM_PROFILE_DIR"
MODE_KINDS = ("qubit", "cavity", "readout")


class ConfigError(ValueError):
    """Malformed configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ModeParams:
    kind: str
    freq_mhz: float
    t1_us: float = None
    t2_us: float = None
    n_th: float = 0.0

    @property
    def omega(self):
        return TWO_PI * self.freq_mhz


def _pair(a, b):
    return tuple(sorted((a, b)))


@dataclass
class DeviceParams:
    """Per-mode coherence data plus a signed Kerr table (chi/2pi in MHz)."""

    modes: dict
    kerr_mhz: dict = field(default_factory=dict)
    negligible: set = field(default_factory=set)
    name: str = "custom"
    protocol: dict = field(default_factory=dict)
    budget: dict = field(default_factory=dict)
    asymmetric: dict = field(default_factory=dict)

    def mode(self, name):
        try:
            return self.modes[name]
        except KeyError:
            raise KeyError(f"mode {name!r} not in device profile {self.name!r}") from None

    def kerr(self, a, b):
        """Signed chi_ab in rad/us; raises for a pair that is neither listed nor whitelisted."""
        key = _pair(a, b)
        if key in self.kerr_mhz:
            return TWO_PI * self.kerr_mhz[key]
        if key in self.negligible:
            return 0.0
        raise KeyError(f"no Kerr entry for pair {key} and the pair is not whitelisted as negligible")

    def validate(self):
        """List of human-readable invariant violations (empty when consistent)."""
        problems = []
        for n, m in self.modes.items():
            if m.kind not in MODE_KINDS:
                problems.append(f"mode {n}: unknown kind {m.kind!r}")
            if m.t1_us is not None and m.t1_us <= 0:
                problems.append(f"mode {n}: T1 must be positive")
            if m.t1_us is not None and m.t2_us is not None and m.t2_us > 2 * m.t1_us * (1 + 1e-12):
                problems.append(f"mode {n}: T2 = {m.t2_us} us exceeds 2*T1 = {2 * m.t1_us} us")
            if not 0.0 <= m.n_th <= 0.05:
                problems.append(f"mode {n}: thermal population {m.n_th} outside [0, 0.05]")
        for (a, b) in list(self.kerr_mhz) + list(self.negligible):
            for x in (a, b):
                if x not in self.modes:
                    problems.append(f"Kerr pair ({a}, {b}) references unknown mode {x}")
        for key in self.kerr_mhz:
            if key in self.negligible:
                problems.append(f"Kerr pair {key} is both listed and whitelisted")
        for key, asym in self.asymmetric.items():
            problems.append(f"Kerr table asymmetric for pair {key}: {asym[0]} vs {asym[1]} MHz")
        return problems


def _num(value, key, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    return float(value)


def params_from_dict(data):
    """Build :class:`DeviceParams` from a parsed profile mapping."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "profile must be a mapping")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")
    raw_modes = data.get("modes")
    if not isinstance(raw_modes, dict) or not raw_modes:
        raise ConfigError("modes", "must be a non-empty mapping")
    modes = {}
    for name, m in raw_modes.items():
        key = f"modes.{name}"
        if not isinstance(m, dict):
            raise ConfigError(key, "must be a mapping")
        unknown = set(m) - {"kind", "freq_mhz", "t1_us", "t2_us", "n_th"}
        if unknown:
            raise ConfigError(f"{key}.{sorted(unknown)[0]}", "unknown field")
        if "kind" not in m:
            raise ConfigError(f"{key}.kind", "missing")
        modes[str(name)] = ModeParams(
            kind=str(m["kind"]),
            freq_mhz=_num(m.get("freq_mhz", 0.0), f"{key}.freq_mhz"),
            t1_us=_num(m.get("t1_us"), f"{key}.t1_us", allow_none=True),
            t2_us=_num(m.get("t2_us"), f"{key}.t2_us", allow_none=True),
            n_th=_num(m.get("n_th", 0.0), f"{key}.n_th"),
        )
    kerr = {}
    asym = {}
    for i, row in enumerate(data.get("kerr_mhz") or []):
        key = f"kerr_mhz[{i}]"
        if not isinstance(row, (list, tuple)) or len(row) != 3:
            raise ConfigError(key, "expected [mode_a, mode_b, chi_mhz]")
        a, b, v = str(row[0]), str(row[1]), _num(row[2], key)
        p = _pair(a, b)
        if p in kerr and kerr[p] != v:
            asym[p] = (kerr[p], v)
        kerr[p] = v
    neg = set()
    for i, row in enumerate(data.get("negligible_pairs") or []):
        if not isinstance(row, (list, tuple)) or len(row) != 2:
            raise ConfigError(f"negligible_pairs[{i}]", "expected [mode_a, mode_b]")
        neg.add(_pair(str(row[0]), str(row[1])))
    params = DeviceParams(modes=modes, kerr_mhz=kerr, negligible=neg, name=str(data.get("name", "custom")),
                          protocol=dict(data.get("protocol") or {}), budget=dict(data.get("budget") or {}),
                          asymmetric=asym)
    return params


def available_profiles():
    names = {p.stem for p in resources.files("aqecsim.data").iterdir() if p.name.endswith(".yaml")}
    extra = os.environ.get(PROFILE_DIR_ENV)
    if extra and Path(extra).is_dir():
        names |= {p.stem for p in Path(extra).glob("*.yaml")}
    return sorted(names)


def profile_path(name):
    """Resolve a profile name or path. Searches ``$AQECSIM_PROFILE_DIR`` before the shipped data."""
    p = Path(name)
    if p.suffix in (".yaml", ".yml") and p.exists():
        return p
    extra = os.environ.get(PROFILE_DIR_ENV)
    if extra:
        cand = Path(extra) / f"{name}.yaml"
        if cand.exists():
            return cand
    shipped = resources.files("aqecsim.data") / f"{name}.yaml"
    if shipped.is_file():
        return Path(str(shipped))
    raise ConfigError("profile", f"unknown profile {name!r}; available: {available_profiles()}")


def load_profile(name="paper-default"):
    path = profile_path(name)
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("profile", f"cannot parse {path}: {exc}") from None
    return params_from_dict(data)


def _ladder(layout, name):
    return mode_operator(layout, name, "lower")


def build_static_hamiltonian(params, layout, frame="rotating"):
    """``sum w_m n_m + 1/2 sum_mn chi_mn a_m^dag a_n^dag a_m a_n`` over the layout modes.

    Two-level modes use ``a -> sigma_minus`` automatically (their self-Kerr
    term vanishes). In the rotating frame the linear terms are dropped.
    """
    if frame not in ("rotating", "lab"):
        raise ValueError(f"frame must be 'rotating' or 'lab', got {frame!r}")
    for n in layout.names:
        params.mode(n)
    h = np.zeros((layout.dim, layout.dim), dtype=complex)
    nums = {n: mode_operator(layout, n, "number") for n in layout.names}
    if frame == "lab":
        for n in layout.names:
            h += params.mode(n).omega * nums[n]
    names = layout.names
    for i, a in enumerate(names):
        for b in names[i:]:
            chi = params.kerr(a, b)
            if chi == 0.0:
                continue
            if a == b:
                op = _ladder(layout, a)
                h += 0.5 * chi * (op.conj().T @ op.conj().T @ op @ op)
            else:
                # both orderings of the double sum give chi * n_a * n_b
                h += chi * nums[a] @ nums[b]
    return 0.5 * (h + h.conj().T)


@dataclass(frozen=True)
class Collapse:
    label: str
    op: np.ndarray
    rate: float

    @property
    def scaled(self):
        return np.sqrt(self.rate) * self.op


@dataclass
class CollapseSet:
    """Jump operators with their rates in 1/us; the Lindblad term uses ``sqrt(rate) * op``."""

    entries: list = field(default_factory=list)

    def __post_init__(self):
        for e in self.entries:
            if e.rate < 0:
                raise ValueError(f"negative rate for {e.label}")

    def add(self, label, op, rate):
        if rate < 0:
            raise ValueError(f"negative rate for {label}")
        if rate > 0:
            self.entries.append(Collapse(label, np.asarray(op, dtype=complex), float(rate)))
        return self

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __add__(self, other):
        return CollapseSet(list(self.entries) + list(other.entries))

    def operators(self):
        return [e.scaled for e in self.entries]

    def labels(self):
        return [e.label for e in self.entries]

    def max_rate(self):
        return max((e.rate for e in self.entries), default=0.0)


def dephasing_rate(t1, t2):
    """Pure dephasing rate ``1/T_phi = 1/T2 - 1/(2 T1)``; raises for T2 > 2 T1."""
    if t2 is None:
        return 0.0
    if t2 > 2 * t1 * (1 + 1e-12):
        raise ValueError(f"T2 = {t2} exceeds 2*T1 = {2 * t1}")
    return max(1.0 / t2 - 0.5 / t1, 0.0)


def build_collapse_set(params, layout, modes=None, dephasing=True, thermal=True):
    """Decay, heating and pure-dephasing operators for the layout modes.

    ``modes`` restricts the set to a subset of layout modes.
    """
    out = CollapseSet()
    for n in modes or layout.names:
        m = params.mode(n)
        if m.t1_us is None:
            continue
        nth = m.n_th if thermal else 0.0
        a = mode_operator(layout, n, "lower")
        out.add(f"{n}:decay", a, (1 + nth) / m.t1_us)
        out.add(f"{n}:heating", a.conj().T, nth / m.t1_us)
        if dephasing:
            try:
                gphi = dephasing_rate(m.t1_us, m.t2_us)
            except ValueError as exc:
                raise ValueError(f"mode {n}: {exc}") from None
            out.add(f"{n}:dephasing", mode_operator(layout, n, "number"), 2 * gphi)
    return out


def raman_reset_rate(omega_raman, gamma_r):
    """Effective adiabatically-eliminated reset rate ``Omega^2 / gamma_R`` (1/us)."""
    if gamma_r <= 0:
        raise ValueError("gamma_r must be positive")
    return omega_raman**2 / gamma_r


def raman_drive_for_lifetime(lifetime, gamma_r):
    """Drive strength (rad/us) that gives an effective reset lifetime ``lifetime``."""
    if lifetime <= 0 or gamma_r <= 0:
        raise ValueError("lifetime and gamma_r must be positive")
    return float(np.sqrt(gamma_r / lifetime))


def reset_collapse(layout, mode, rate):
    """Reset entry: ``|g><e|`` for a two-level mode, ``a`` for a cavity."""
    op = mode_operator(layout, mode, "sigma_minus" if layout.dim_of(mode) == 2 else "lower")
    return CollapseSet().add(f"{mode}:reset", op, rate)


def default_layout(params, names, cavity_dim=8):
    """Layout with two levels for qubits and ``cavity_dim`` for bosonic modes."""
    return HilbertLayout([(n, 2 if params.mode(n).kind == "qubit" else cavity_dim) for n in names])
