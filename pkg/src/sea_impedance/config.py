"""Experiment configuration files, controller files and atomic output.

Configuration is INI-style (``configparser``)::

    [sea]
    K_s = 0.0484        # two springs of 0.0242 Nm/rad in parallel

Every section and key is checked against a closed schema; unknown or
missing keys raise :class:`ConfigError` naming the key and its line.
"""

from __future__ import annotations

import configparser
import csv
import io
import os
import re
import tempfile
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .lti import Polynomial, RationalTransferFunction
from .sea import DesiredImpedance, SeaParameters, WeightingSet, lowpass_phi
from .simulation import SignalSpec
from .synthesis import ControllerRealization, SynthesisBounds

TF = RationalTransferFunction

SEA_KEYS = ("J_A", "b_f", "K_s", "K_pv", "K_iv", "omega_max")
SEA_OPTIONAL = ("r", "K_g")
IMPEDANCE_KEYS = ("M_d", "B_d", "K_d")
WEIGHT_KEYS = ("M", "omega_0", "epsilon", "W_u", "W_d", "W_n", "W_phi")
WEIGHT_OPTIONAL = ("W_phi_cutoff", "W_phi_order")
BOUND_KEYS = ("gamma_e", "gamma_u")
SIGNAL_FIELDS = ("kind", "amplitude", "frequency", "phase", "path", "column", "seed")
SIGNAL_CHANNELS = ("phi_L", "d", "n")
SIGNAL_GLOBAL = ("duration", "sample_rate", "steady_fraction")
OUTPUT_KEYS = ("name", "dir")

SCHEMA = {
    "sea": (SEA_KEYS, SEA_OPTIONAL),
    "impedance": (IMPEDANCE_KEYS, ()),
    "weights": (WEIGHT_KEYS, WEIGHT_OPTIONAL),
    "bounds": (BOUND_KEYS, ()),
    "signals": ((), SIGNAL_GLOBAL + tuple(f"{c}_{f}" for c in SIGNAL_CHANNELS for f in SIGNAL_FIELDS)),
    "output": ((), OUTPUT_KEYS),
}


@dataclass(frozen=True)
class PhiFilterChoice:
    kind: str = "unity"  # unity | lowpass
    cutoff: float = 500.0
    order: int = 2

    def tf(self) -> RationalTransferFunction:
        return TF.constant(1.0) if self.kind == "unity" else lowpass_phi(self.cutoff, self.order)


@dataclass(frozen=True)
class ExperimentConfig:
    sea: SeaParameters
    impedance: DesiredImpedance
    weights: WeightingSet
    bounds: SynthesisBounds
    phi_filter: PhiFilterChoice = field(default_factory=PhiFilterChoice)
    phi_L: SignalSpec = field(default_factory=lambda: SignalSpec("sinusoid", 2.0, 2.0))
    d: SignalSpec = field(default_factory=SignalSpec.zero)
    n: SignalSpec = field(default_factory=SignalSpec.zero)
    steady_fraction: float = 0.25
    name: str = "experiment"
    output_dir: str = "out"

    def with_sample_rate(self, rate: float) -> "ExperimentConfig":
        from dataclasses import replace

        return replace(
            self,
            phi_L=replace(self.phi_L, sample_rate=rate),
            d=replace(self.d, sample_rate=rate),
            n=replace(self.n, sample_rate=rate),
        )

    def with_bounds(self, bounds: SynthesisBounds) -> "ExperimentConfig":
        from dataclasses import replace

        return replace(self, bounds=bounds)


# ---------------------------------------------------------------------------
# value parsing
# ---------------------------------------------------------------------------

_LIST = r"\[\s*([^\]]*)\]"
_RATIONAL = re.compile(rf"^{_LIST}\s*/\s*{_LIST}$")


def _float_list(text: str) -> list[float]:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    return [float(p) for p in parts]


def parse_weight(text: str) -> RationalTransferFunction:
    """A number, or ``[num...] / [den...]`` descending-power coefficient lists."""
    text = text.strip()
    m = _RATIONAL.match(text)
    if m:
        return TF(Polynomial.from_descending(_float_list(m.group(1))), Polynomial.from_descending(_float_list(m.group(2))))
    return TF.constant(float(text))


def format_weight(w: RationalTransferFunction) -> str:
    if w.is_static:
        return repr(float(w.numerator.coefficients[0] / w.denominator.coefficients[0])) if not w.numerator.is_zero else "0.0"
    num = ", ".join(repr(float(c)) for c in w.numerator.coefficients[::-1])
    den = ", ".join(repr(float(c)) for c in w.denominator.coefficients[::-1])
    return f"[{num}] / [{den}]"


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return i
            continue
        if current == section and key is not None:
            k = re.split(r"[=:]", line, maxsplit=1)[0].strip()
            if k == key:
                return i
    return None


class _Reader:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None, strict=True)
        cp.optionxform = str  # keys are case sensitive (K_s vs k_s)
        try:
            cp.read_string(text, source=source)
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError(f"{source}: {exc.message if hasattr(exc, 'message') else exc}", None, line) from None
        self.cp = cp
        for sec in cp.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"{source}: unknown section [{sec}]", sec, _line_of(text, sec, None))
            required, optional = SCHEMA[sec]
            for key in cp[sec]:
                if key not in required and key not in optional:
                    raise ConfigError(f"{source}: unknown key in [{sec}]", key, _line_of(text, sec, key))
        for sec, (required, _) in SCHEMA.items():
            for key in required:
                if not cp.has_section(sec) or key not in cp[sec]:
                    raise ConfigError(f"{source}: missing required key in [{sec}]", key, _line_of(text, sec, None))

    def has(self, sec, key):
        return self.cp.has_section(sec) and key in self.cp[sec]

    def get(self, sec, key, conv=float, default=None):
        if not self.has(sec, key):
            return default
        raw = self.cp[sec][key]
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.source}: bad value {raw!r} in [{sec}] ({exc})", key, _line_of(self.text, sec, key)) from None

    def build(self, sec, key, fn):
        """Run a constructor, re-raising validation errors against ``key``."""
        try:
            return fn()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{self.source}: invalid [{sec}] values: {exc}", key, _line_of(self.text, sec, key)) from None


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    r = _Reader(text, source)
    sea = r.build("sea", None, lambda: SeaParameters(
        **{k: r.get("sea", k) for k in SEA_KEYS},
        **{k: r.get("sea", k) for k in SEA_OPTIONAL if r.has("sea", k)},
    ))
    imp = r.build("impedance", None, lambda: DesiredImpedance(**{k: r.get("impedance", k) for k in IMPEDANCE_KEYS}))

    phi_kind = r.get("weights", "W_phi", str).strip()
    if phi_kind not in ("unity", "lowpass"):
        raise ConfigError(f"{source}: W_phi must be 'unity' or 'lowpass'", "W_phi", _line_of(text, "weights", "W_phi"))
    phi = PhiFilterChoice(phi_kind, r.get("weights", "W_phi_cutoff", float, 500.0), r.get("weights", "W_phi_order", int, 2))
    weights = r.build("weights", None, lambda: WeightingSet(
        M=r.get("weights", "M"),
        omega_0=r.get("weights", "omega_0"),
        epsilon=r.get("weights", "epsilon"),
        W_u=r.get("weights", "W_u", parse_weight),
        W_d=r.get("weights", "W_d", parse_weight),
        W_n=r.get("weights", "W_n", parse_weight),
        W_phi=phi.tf(),
    ))
    bounds = r.build("bounds", None, lambda: SynthesisBounds(r.get("bounds", "gamma_e"), r.get("bounds", "gamma_u")))

    duration = r.get("signals", "duration", float, 10.0)
    rate = r.get("signals", "sample_rate", float, 2000.0)
    sigs = {}
    for ch in SIGNAL_CHANNELS:
        default_kind = "sinusoid" if ch == "phi_L" else "constant"
        kw = dict(
            kind=r.get("signals", f"{ch}_kind", str, default_kind).strip(),
            amplitude=r.get("signals", f"{ch}_amplitude", float, 2.0 if ch == "phi_L" else 0.0),
            frequency=r.get("signals", f"{ch}_frequency", float, 2.0 if ch == "phi_L" else 0.0),
            phase=r.get("signals", f"{ch}_phase", float, 0.0),
            path=r.get("signals", f"{ch}_path", str, None),
            column=r.get("signals", f"{ch}_column", str, None),
            seed=r.get("signals", f"{ch}_seed", int, 0),
        )
        key = f"{ch}_kind" if r.has("signals", f"{ch}_kind") else "duration"
        sigs[ch] = r.build("signals", key, lambda kw=kw: SignalSpec(duration=duration, sample_rate=rate, **kw))
    steady = r.get("signals", "steady_fraction", float, 0.25)
    if not 0 <= steady < 1:
        raise ConfigError(f"{source}: steady_fraction must lie in [0, 1)", "steady_fraction", _line_of(text, "signals", "steady_fraction"))
    return ExperimentConfig(
        sea, imp, weights, bounds, phi, sigs["phi_L"], sigs["d"], sigs["n"], steady,
        r.get("output", "name", str, "experiment").strip(),
        r.get("output", "dir", str, "out").strip(),
    )


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, str(p))


def format_config(cfg: ExperimentConfig) -> str:
    out = io.StringIO()
    w = out.write
    w(f"# experiment {cfg.name}\n\n[sea]\n")
    for f in fields(SeaParameters):
        w(f"{f.name} = {getattr(cfg.sea, f.name)!r}\n")
    w("\n[impedance]\n")
    for k in IMPEDANCE_KEYS:
        w(f"{k} = {getattr(cfg.impedance, k)!r}\n")
    ws = cfg.weights
    w("\n[weights]\n")
    w(f"M = {ws.M!r}\nomega_0 = {ws.omega_0!r}\nepsilon = {ws.epsilon!r}\n")
    w(f"W_u = {format_weight(ws.W_u)}\nW_d = {format_weight(ws.W_d)}\nW_n = {format_weight(ws.W_n)}\n")
    w(f"W_phi = {cfg.phi_filter.kind}\nW_phi_cutoff = {cfg.phi_filter.cutoff!r}\nW_phi_order = {cfg.phi_filter.order}\n")
    w(f"\n[bounds]\ngamma_e = {cfg.bounds.gamma_e!r}\ngamma_u = {cfg.bounds.gamma_u!r}\n")
    w(f"\n[signals]\nduration = {cfg.phi_L.duration!r}\nsample_rate = {cfg.phi_L.sample_rate!r}\n")
    w(f"steady_fraction = {cfg.steady_fraction!r}\n")
    for ch in SIGNAL_CHANNELS:
        s = getattr(cfg, ch)
        w(f"{ch}_kind = {s.kind}\n{ch}_amplitude = {s.amplitude!r}\n{ch}_frequency = {s.frequency!r}\n")
        w(f"{ch}_phase = {s.phase!r}\n{ch}_seed = {s.seed}\n")
        if s.path is not None:
            w(f"{ch}_path = {s.path}\n")
        if s.column is not None:
            w(f"{ch}_column = {s.column}\n")
    w(f"\n[output]\nname = {cfg.name}\ndir = {cfg.output_dir}\n")
    return out.getvalue()


BUNDLED = {
    "0.3": "stiffness_0.3.ini",
    "0.6": "stiffness_0.6.ini",
    "0.9": "stiffness_0.9.ini",
    "general": "general.ini",
}


def bundled_config(name: str) -> ExperimentConfig:
    """One of the shipped experiment files (keys of :data:`BUNDLED`, or
    ``"defaults"``)."""
    fname = "defaults.ini" if name == "defaults" else BUNDLED.get(name)
    if fname is None:
        raise ConfigError(f"no bundled config {name!r}; choose from {sorted(BUNDLED)}")
    text = resources.files("sea_impedance").joinpath("configs", fname).read_text()
    return parse_config(text, f"bundled:{fname}")


# ---------------------------------------------------------------------------
# controller files
# ---------------------------------------------------------------------------


def format_controller(k: ControllerRealization) -> str:
    lines = [
        "# dynamic output-feedback controller",
        "# x_k' = A_k x_k + B_k [tau_L; e],  omega_d = C_k x_k + D_k [tau_L; e]",
        f"order {k.order}",
        "inputs tau_L e",
        "outputs omega_d",
    ]
    for name in ("A_k", "B_k", "C_k", "D_k"):
        M = getattr(k, name)
        lines.append(f"{name} {M.shape[0]} {M.shape[1]}")
        for row in M:
            lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_controller(text: str, source: str = "<controller>") -> ControllerRealization:
    rows = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    tokens = [(i + 1, ln) for i, ln in enumerate(rows) if ln]
    mats: dict[str, np.ndarray] = {}
    order = None
    pos = 0
    while pos < len(tokens):
        lineno, ln = tokens[pos]
        head = ln.split()
        if head[0] == "order":
            order = int(head[1])
            pos += 1
        elif head[0] in ("inputs", "outputs"):
            pos += 1
        elif head[0] in ("A_k", "B_k", "C_k", "D_k"):
            r, c = int(head[1]), int(head[2])
            body = tokens[pos + 1 : pos + 1 + r]
            if len(body) != r:
                raise ConfigError(f"{source}: block {head[0]} truncated", head[0], lineno)
            M = np.empty((r, c))
            for j, (ln2, txt) in enumerate(body):
                vals = txt.split()
                if len(vals) != c:
                    raise ConfigError(f"{source}: row has {len(vals)} values, expected {c}", head[0], ln2)
                M[j] = [float(v) for v in vals]
            mats[head[0]] = M
            pos += 1 + r
        else:
            raise ConfigError(f"{source}: unexpected line {ln!r}", head[0], lineno)
    for name in ("A_k", "B_k", "C_k"):
        if name not in mats:
            raise ConfigError(f"{source}: missing block", name)
    k = ControllerRealization(mats["A_k"], mats["B_k"], mats["C_k"], mats.get("D_k"))
    if order is not None and order != k.order:
        raise DimensionMismatch(f"{source}: declared order {order} but A_k is {k.order}x{k.order}")
    return k


def load_controller(path: str | os.PathLike) -> ControllerRealization:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read controller {p}: {exc.strerror}") from None
    return parse_controller(text, str(p))


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    """Write through a temporary file in the same directory, then rename."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=f".{p.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return p


def csv_text(columns: Mapping[str, np.ndarray]) -> str:
    names = list(columns)
    data = [np.asarray(columns[k], dtype=float) for k in names]
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(names)
    for row in zip(*data):
        wr.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def write_csv(path: str | os.PathLike, columns: Mapping[str, np.ndarray]) -> Path:
    return atomic_write_text(path, csv_text(columns))
