"""Fixed-step time-domain simulation of the closed interaction loop."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import SeaImpedanceError, StepTooLarge, UnstableClosedLoop
from .lti import is_hurwitz

log = logging.getLogger(__name__)

SIGNAL_KINDS = ("sinusoid", "constant", "file", "noise")
MAX_SUBSTEPS = 64
STEP_LIMIT = 0.1  # largest allowed h * spectral radius


@dataclass(frozen=True)
class SignalSpec:
    """Exogenous input description.

    ``noise`` is a band-limited pseudo-random signal: a sum of 32 sinusoids
    with frequencies uniform in ``(0, frequency]`` Hz and random phases drawn
    from ``seed``, scaled to RMS ``amplitude``.  ``file`` replays a CSV with a
    ``time_s`` column and the column named by ``column`` (linear
    interpolation, held constant outside the recorded span).
    """

    kind: str = "constant"
    amplitude: float = 0.0
    frequency: float = 0.0  # Hz
    phase: float = 0.0  # rad
    duration: float = 10.0  # s
    sample_rate: float = 2000.0  # Hz
    path: str | None = None
    column: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}; expected one of {SIGNAL_KINDS}")
        if not self.duration > 0:
            raise ValueError("signal duration must be positive")
        if not self.sample_rate > 0:
            raise ValueError("sample rate must be positive")
        if self.kind == "sinusoid" and self.sample_rate < 50 * self.frequency:
            raise ValueError(
                f"sample rate {self.sample_rate} Hz is below 50x the {self.frequency} Hz sinusoid"
            )
        if self.kind == "noise" and not self.frequency > 0:
            raise ValueError("noise bandwidth (frequency) must be positive")
        if self.kind == "file" and not (self.path and self.column):
            raise ValueError("file signals need both path and column")

    @classmethod
    def zero(cls, duration: float = 10.0, sample_rate: float = 2000.0) -> "SignalSpec":
        return cls("constant", 0.0, duration=duration, sample_rate=sample_rate)

    def sampler(self):
        """Return a vectorized function ``t -> value``."""
        if self.kind == "sinusoid":
            a, w, ph = self.amplitude, 2.0 * math.pi * self.frequency, self.phase
            return lambda t: a * np.sin(w * np.asarray(t, dtype=float) + ph)
        if self.kind == "constant":
            a = self.amplitude
            return lambda t: np.full(np.shape(t), a, dtype=float)
        if self.kind == "noise":
            rng = np.random.default_rng(self.seed)
            k = 32
            freqs = 2.0 * math.pi * self.frequency * rng.uniform(0.0, 1.0, k)
            phases = rng.uniform(0.0, 2.0 * math.pi, k)
            gain = self.amplitude * math.sqrt(2.0 / k)

            def noise(t):
                t = np.asarray(t, dtype=float)
                return gain * np.sum(np.sin(np.multiply.outer(t, freqs) + phases), axis=-1)

            return noise
        ts, vs = _read_column(Path(self.path), self.column)
        return lambda t: np.interp(t, ts, vs)


def _read_column(path: Path, column: str) -> tuple[np.ndarray, np.ndarray]:
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "time_s" not in rows[0] or column not in rows[0]:
        raise ValueError(f"{path} lacks a time_s or {column!r} column")
    ts = np.array([float(r["time_s"]) for r in rows])
    vs = np.array([float(r[column]) for r in rows])
    if np.any(np.diff(ts) <= 0):
        raise ValueError(f"{path}: time_s must be strictly increasing")
    return ts, vs


@dataclass
class SimulationTrace:
    time: np.ndarray
    phi_L: np.ndarray
    tau_d: np.ndarray
    tau_L: np.ndarray
    e: np.ndarray
    omega_d: np.ndarray
    steady_window: tuple[float, float]
    metrics: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.time)
        for name in ("phi_L", "tau_d", "tau_L", "e", "omega_d"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"series {name} does not match the time grid")
        if not self.metrics:
            m = self.steady_mask()
            self.metrics = {
                "max_abs_error": float(np.max(np.abs(self.e[m]))),
                "max_abs_control": float(np.max(np.abs(self.omega_d[m]))),
                "max_abs_tau_d": float(np.max(np.abs(self.tau_d[m]))),
            }

    def steady_mask(self) -> np.ndarray:
        t0, t1 = self.steady_window
        return (self.time >= t0 - 1e-12) & (self.time <= t1 + 1e-12)

    @property
    def max_abs_error(self) -> float:
        return self.metrics["max_abs_error"]

    @property
    def max_abs_control(self) -> float:
        return self.metrics["max_abs_control"]

    @property
    def max_abs_tau_d(self) -> float:
        return self.metrics["max_abs_tau_d"]

    def columns(self) -> dict[str, np.ndarray]:
        return {
            "time_s": self.time,
            "phi_L_rad": self.phi_L,
            "tau_d_Nm": self.tau_d,
            "tau_L_Nm": self.tau_L,
            "e_Nm": self.e,
            "omega_d_rad_s": self.omega_d,
        }


def rk4_matrices(A: np.ndarray, B: np.ndarray, h: float):
    """One classical RK4 step for ``x' = A x + B w(t)`` in closed form.

    Returns ``(Phi, G0, Gm, G1)`` with
    ``x+ = Phi x + G0 w(t) + Gm w(t + h/2) + G1 w(t + h)``.
    """
    n = A.shape[0]
    I = np.eye(n)
    hA = h * A
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    Phi = I + hA + hA2 / 2.0 + hA3 / 6.0 + hA3 @ hA / 24.0
    G0 = h / 6.0 * (I + hA + hA2 / 2.0 + hA3 / 4.0) @ B
    Gm = h / 6.0 * (4.0 * I + 2.0 * hA + hA2 / 2.0) @ B
    G1 = h / 6.0 * B
    return Phi, G0, Gm, G1


def _substeps(A: np.ndarray, h: float, substeps: int | None) -> int:
    rho = float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0
    if substeps is None:
        k = max(1, math.ceil(h * rho / STEP_LIMIT - 1e-12))
        if k > MAX_SUBSTEPS:
            raise StepTooLarge(
                f"h * rho = {h * rho:.3g} needs {k} substeps (limit {MAX_SUBSTEPS}); raise the sample rate"
            )
        return k
    if (h / substeps) * rho > STEP_LIMIT:
        raise StepTooLarge(f"step {h / substeps:.3g} s times spectral radius {rho:.3g} exceeds {STEP_LIMIT}")
    return substeps


def simulate(
    cl,
    phi_L: SignalSpec,
    d: SignalSpec | None = None,
    n: SignalSpec | None = None,
    *,
    steady_fraction: float = 0.25,
    substeps: int | None = None,
) -> SimulationTrace:
    """Integrate the closed loop from rest with fixed-step RK4.

    The record step is ``1/phi_L.sample_rate``.  When that step is too
    coarse for the fastest closed-loop mode, each record interval is split
    into the fewest equal substeps meeting ``h * rho <= 0.1`` (pass
    ``substeps`` to force a value).
    """
    sys = cl.system
    stable, absc = is_hurwitz(sys)
    if not stable:
        raise UnstableClosedLoop(f"closed loop is not Hurwitz (abscissa {absc:.3g})")
    duration, rate = phi_L.duration, phi_L.sample_rate
    h = 1.0 / rate
    k = _substeps(sys.A, h, substeps)
    hs = h / k
    N = int(round(duration * rate))
    t = np.arange(N + 1) * h

    specs = [phi_L, d or SignalSpec.zero(duration, rate), n or SignalSpec.zero(duration, rate)]
    fine = np.arange(2 * k * N + 1) * (hs / 2.0)  # substep ends and midpoints
    W = np.stack([s.sampler()(fine) for s in specs], axis=1)

    Phi, G0, Gm, G1 = rk4_matrices(sys.A, sys.B, hs)
    x = np.zeros(sys.n_states)
    X = np.empty((N + 1, sys.n_states))
    X[0] = x
    for i in range(N):
        base = 2 * k * i
        for j in range(k):
            a = base + 2 * j
            x = Phi @ x + G0 @ W[a] + Gm @ W[a + 1] + G1 @ W[a + 2]
        X[i + 1] = x
    Wrec = W[:: 2 * k]
    Y = X @ sys.C.T + Wrec @ sys.D.T
    lab = list(sys.output_labels)
    tau_L = Y[:, lab.index("tau_L")]
    e = Y[:, lab.index("e")]
    omega_d = Y[:, lab.index("omega_d")]
    window = (steady_fraction * duration, t[-1])
    return SimulationTrace(t, Wrec[:, 0].copy(), e + tau_L, tau_L, e, omega_d, window)


def steady_amplitude(trace: SimulationTrace, series: str, frequency: float) -> float:
    """Amplitude of the ``frequency`` Hz component of a series, fitted by
    least squares over the steady window."""
    m = trace.steady_mask()
    t = trace.time[m]
    w = 2.0 * math.pi * frequency
    basis = np.column_stack([np.sin(w * t), np.cos(w * t), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(basis, getattr(trace, series)[m], rcond=None)
    return float(math.hypot(coef[0], coef[1]))


def cycle_deviation(trace: SimulationTrace, series: str, frequency: float) -> float:
    """Largest difference between a series and itself one period later,
    within the steady window (period must be a whole number of samples)."""
    dt = trace.time[1] - trace.time[0]
    p = int(round(1.0 / (frequency * dt)))
    if abs(p * dt * frequency - 1.0) > 1e-9:
        raise ValueError("period is not a whole number of samples")
    m = np.nonzero(trace.steady_mask())[0]
    v = getattr(trace, series)
    i0 = m[0]
    return float(np.max(np.abs(v[i0 + p : m[-1] + 1] - v[i0 : m[-1] + 1 - p])))


# ---------------------------------------------------------------------------
# Case sweeps
# ---------------------------------------------------------------------------


@dataclass
class CaseResult:
    impedance: object
    bounds: object
    report: object = None
    trace: SimulationTrace | None = None
    controller: object = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.report is not None and self.report.pass_

    def row(self) -> dict:
        r = {
            "K_d": self.impedance.K_d,
            "gamma_e": self.bounds.gamma_e,
            "gamma_u": self.bounds.gamma_u,
            "max_abs_error": None,
            "max_abs_control": None,
            "status": "ok" if self.ok else (self.error or "verification failed"),
        }
        if self.trace is not None:
            r["max_abs_error"] = self.trace.max_abs_error
            r["max_abs_control"] = self.trace.max_abs_control
        return r


def sweep_cases(
    cases: Sequence[tuple],
    params,
    weights,
    phi_L: SignalSpec,
    d: SignalSpec | None = None,
    n: SignalSpec | None = None,
) -> list[CaseResult]:
    """Synthesize, verify and simulate each ``(DesiredImpedance, SynthesisBounds)``.

    Failures are recorded on their row; the remaining rows still run.
    """
    from .sea import build_generalized_plant
    from .synthesis import close_loop, synthesize_mixed, verify

    out = []
    for imp, bounds in cases:
        res = CaseResult(imp, bounds)
        try:
            plant = build_generalized_plant(params, imp, weights)
            k = synthesize_mixed(plant, bounds)
            res.controller = k
            res.report = verify(plant, k, bounds)
            res.trace = simulate(close_loop(plant, k), phi_L, d, n)
        except SeaImpedanceError as exc:
            res.error = f"{type(exc).__name__}: {exc}"
            log.warning("case K_d=%g failed: %s", imp.K_d, res.error)
        out.append(res)
    return out


def comparison_table(results: Sequence[CaseResult]) -> str:
    head = f"{'K_d [Nm/rad]':>13} {'gamma_e':>9} {'gamma_u':>9} {'max|e| [Nm]':>12} {'max|u| [rad/s]':>15}  status"
    lines = [head]
    for r in results:
        row = r.row()
        err = "-" if row["max_abs_error"] is None else f"{row['max_abs_error']:.5f}"
        ctl = "-" if row["max_abs_control"] is None else f"{row['max_abs_control']:.4f}"
        lines.append(
            f"{row['K_d']:>13.5g} {row['gamma_e']:>9.4g} {row['gamma_u']:>9.4g} {err:>12} {ctl:>15}  {row['status']}"
        )
    return "\n".join(lines)
