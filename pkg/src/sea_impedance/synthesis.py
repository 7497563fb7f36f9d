"""Mixed H2/H-infinity dynamic output-feedback synthesis.

Both channels share one pair of Lyapunov matrices ``(X, Y)`` and the
standard linearizing change of controller variables::

    A_hat = N A_k M^T + N B_k C_y X + Y B_u C_k M^T + Y A X
    B_hat = N B_k,        C_hat = C_k M^T,        M N^T = I - X Y

with the controller feedthrough fixed to zero.  The weighted-error row is
scaled by ``1/gamma_e`` and the weighted-effort row by ``1/gamma_u`` before
the LMIs are posed, so both bounds read as ``<= shrink`` in the SDP.

The raw data are badly scaled (the error weight has a pole at
``-omega_0 epsilon`` that the measurements cannot see), so a diagonal
state scaling is refined by a few margin-maximizing solves before the
final H2-minimizing solve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, Infeasible, RecoveryFailure, VerificationFailure
from .lti import StateSpace, h2_norm, hinf_norm, spectral_abscissa
from .sdp import LmiProblem
from .sea import GeneralizedPlant, W_LABELS, Y_LABELS, Z_LABELS

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthesisBounds:
    gamma_e: float  # H-inf bound, w -> weighted error
    gamma_u: float  # H2 bound, w -> weighted effort

    def __post_init__(self):
        if not (self.gamma_e > 0 and self.gamma_u > 0):
            raise ValueError("norm bounds must be strictly positive")

    def scaled(self, factor: float) -> "SynthesisBounds":
        return SynthesisBounds(self.gamma_e * factor, self.gamma_u * factor)


@dataclass(frozen=True)
class ControllerRealization:
    """Strictly proper controller ``(A_k, B_k, C_k)`` mapping ``(tau_L, e)`` to ``omega_d``."""

    A_k: np.ndarray
    B_k: np.ndarray
    C_k: np.ndarray
    D_k: np.ndarray = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A_k, dtype=float))
        B = np.atleast_2d(np.asarray(self.B_k, dtype=float))
        C = np.atleast_2d(np.asarray(self.C_k, dtype=float))
        D = np.zeros((C.shape[0], B.shape[1])) if self.D_k is None else np.atleast_2d(np.asarray(self.D_k, dtype=float))
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0] or C.shape[1] != A.shape[0]:
            raise DimensionMismatch(f"inconsistent controller shapes {A.shape}, {B.shape}, {C.shape}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionMismatch(f"D_k shape {D.shape} does not match ({C.shape[0]}, {B.shape[1]})")
        if np.any(D != 0):
            raise ValueError("controller feedthrough D_k must be zero")
        for name, val in (("A_k", A), ("B_k", B), ("C_k", C), ("D_k", D)):
            object.__setattr__(self, name, val)

    @property
    def order(self) -> int:
        return self.A_k.shape[0]

    def as_state_space(self) -> StateSpace:
        return StateSpace(self.A_k, self.B_k, self.C_k, self.D_k, Y_LABELS, ("omega_d",))

    @classmethod
    def zero(cls, order: int = 1, n_y: int = 2, n_u: int = 1) -> "ControllerRealization":
        return cls(-np.eye(order), np.zeros((order, n_y)), np.zeros((n_u, order)))


@dataclass(frozen=True)
class ClosedLoopSystem:
    """Plant with controller in the loop.

    ``system`` maps ``(phi_L, d, n)`` to ``(e_w, u_w, tau_L, e, omega_d)``;
    the state is ``(plant state, controller state)``.
    """

    system: StateSpace
    plant: GeneralizedPlant
    controller: ControllerRealization

    @property
    def n_states(self) -> int:
        return self.system.n_states

    def channel(self, outputs, inputs=None) -> StateSpace:
        return self.system.subsystem(outputs, inputs)


@dataclass
class VerificationReport:
    hinf_we_to_etilde: float
    h2_w_to_utilde: float
    spectral_abscissa: float
    bounds: SynthesisBounds
    pass_: bool = field(init=False)

    def __post_init__(self):
        self.pass_ = bool(
            self.spectral_abscissa < 0
            and self.hinf_we_to_etilde <= self.bounds.gamma_e
            and self.h2_w_to_utilde <= self.bounds.gamma_u
        )

    @property
    def passed(self) -> bool:
        return self.pass_

    def summary(self) -> str:
        return (
            f"hinf(w->e_w) = {self.hinf_we_to_etilde:.6g} (bound {self.bounds.gamma_e:.6g}), "
            f"h2(w->u_w) = {self.h2_w_to_utilde:.6g} (bound {self.bounds.gamma_u:.6g}), "
            f"abscissa = {self.spectral_abscissa:.6g}, pass = {self.pass_}"
        )


def close_loop(plant: GeneralizedPlant, k: ControllerRealization) -> ClosedLoopSystem:
    """Interconnect plant and controller (``u = K y``, ``D_k = 0``)."""
    if k.B_k.shape[1] != plant.n_y or k.C_k.shape[0] != plant.n_u:
        raise DimensionMismatch(
            f"controller is {k.C_k.shape[0]}x{k.B_k.shape[1]}, plant needs {plant.n_u}x{plant.n_y}"
        )
    Ap, Bw, Bu, Cz, Cy = plant.A, plant.Bw, plant.Bu, plant.Cz, plant.Cy
    Dzw, Dzu, Dyw = plant.Dzw, plant.Dzu, plant.Dyw
    if np.any(plant.Dyu != 0):
        raise DimensionMismatch("plant has measurement feedthrough from u; not supported")
    A = np.block([[Ap, Bu @ k.C_k], [k.B_k @ Cy, k.A_k]])
    B = np.vstack([Bw, k.B_k @ Dyw])
    C = np.vstack([
        np.hstack([Cz, Dzu @ k.C_k]),
        np.hstack([Cy, plant.Dyu @ k.C_k]),
        np.hstack([np.zeros((plant.n_u, plant.n_states)), k.C_k]),
    ])
    D = np.vstack([Dzw, Dyw, np.zeros((plant.n_u, plant.n_w))])
    sys = StateSpace(A, B, C, D, W_LABELS, Z_LABELS + Y_LABELS + ("omega_d",))
    return ClosedLoopSystem(sys, plant, k)


def verify(plant: GeneralizedPlant, k: ControllerRealization, bounds: SynthesisBounds) -> VerificationReport:
    """Independent a-posteriori check of both norm bounds and stability."""
    cl = close_loop(plant, k)
    absc = spectral_abscissa(cl.system.A)
    if absc >= 0:
        return VerificationReport(np.inf, np.inf, absc, bounds)
    hi = hinf_norm(cl.channel(["e_w"]))
    h2 = h2_norm(cl.channel(["u_w"]))
    return VerificationReport(hi, h2, absc, bounds)


# ---------------------------------------------------------------------------
# LMI synthesis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthesisOptions:
    shrink: float = 0.999  # bounds are enforced as shrink * gamma inside the SDP
    rescale_iterations: int = 3
    margin_cap: float = 1e-2  # upper limit on the LMI margin while rescaling
    final_margin: float = 1e-4  # margin kept in the H2-minimizing solve
    xy_cap: float = 1e4  # X, Y <= xy_cap * I in scaled coordinates
    loose_cap: float = 1e8  # cap for the first pass, before any rescaling
    recovery_cond: float = 1e12
    objective: str = "h2"  # "h2": minimize the H2 level; "margin": stop at the max-margin point


@dataclass
class _Data:
    A: np.ndarray
    Bw: np.ndarray
    Bu: np.ndarray
    C1: np.ndarray
    D11: np.ndarray
    D12: np.ndarray
    C2: np.ndarray
    D2u: np.ndarray
    Cy: np.ndarray
    Dyw: np.ndarray


def _normalized_data(plant: GeneralizedPlant, bounds: SynthesisBounds, sc: np.ndarray) -> _Data:
    T, Ti = np.diag(sc), np.diag(1.0 / sc)
    A = Ti @ plant.A @ T
    Bw, Bu = Ti @ plant.Bw, Ti @ plant.Bu
    Cz = plant.Cz @ T
    Cy = plant.Cy @ T
    ge, gu = bounds.gamma_e, bounds.gamma_u
    return _Data(
        A, Bw, Bu,
        Cz[:1] / ge, plant.Dzw[:1] / ge, plant.Dzu[:1] / ge,
        Cz[1:] / gu, plant.Dzu[1:] / gu,
        Cy, plant.Dyw,
    )


def _build_lmis(d: _Data, opts: SynthesisOptions, stage: str, t_floor: float = 0.0):
    n = d.A.shape[0]
    nw = d.Bw.shape[1]
    ny = d.Cy.shape[0]
    nu = d.Bu.shape[1]
    n2 = d.C2.shape[0]
    I = np.eye(n)
    g = opts.shrink
    p = LmiProblem()
    X = p.variable("X", n, symmetric=True)
    Y = p.variable("Y", n, symmetric=True)
    Ah = p.variable("A_hat", n, n)
    Bh = p.variable("B_hat", n, ny)
    Ch = p.variable("C_hat", nu, n)
    Q = p.variable("Q", n2, symmetric=True)
    t = p.scalar("t")

    def blocks(v):
        x, y = v[X], v[Y]
        AA = np.block([[d.A @ x + d.Bu @ v[Ch], d.A], [v[Ah], y @ d.A + v[Bh] @ d.Cy]])
        BB = np.vstack([d.Bw, y @ d.Bw + v[Bh] @ d.Dyw])
        CC = np.hstack([d.C1 @ x + d.D12 @ v[Ch], d.C1])
        return AA + AA.T, BB, CC

    def tt(v, k):
        return v[t][0, 0] * np.eye(k)

    def hinf(v):
        He, BB, CC = blocks(v)
        L = np.block([
            [He, BB, CC.T],
            [BB.T, -g * np.eye(nw), d.D11.T],
            [CC, d.D11, -g * np.eye(1)],
        ])
        return -L - tt(v, L.shape[0])

    def h2a(v):
        He, BB, _ = blocks(v)
        L = np.block([[He, BB], [BB.T, -np.eye(nw)]])
        return -L - tt(v, L.shape[0])

    def h2b(v):
        x, y = v[X], v[Y]
        C2c = np.hstack([d.C2 @ x + d.D2u @ v[Ch], d.C2])
        L = np.block([[np.block([[x, I], [I, y]]), C2c.T], [C2c, v[Q]]])
        return L - tt(v, L.shape[0])

    p.add("hinf", hinf)
    p.add("h2_dissipation", h2a)
    p.add("h2_output", h2b)
    p.add("coupling", lambda v: np.block([[v[X], I], [I, v[Y]]]) - tt(v, 2 * n))
    p.add("X_cap", lambda v: opts.xy_cap * I - v[X])
    p.add("Y_cap", lambda v: opts.xy_cap * I - v[Y])
    p.add("h2_level", lambda v: np.array([[g * g - np.trace(v[Q])]]))
    if stage == "margin":
        p.add("t_cap", lambda v: np.array([[opts.margin_cap - v[t][0, 0]]]))
        objective = lambda v: -v[t][0, 0]  # noqa: E731
    else:
        p.add("t_floor", lambda v: np.array([[v[t][0, 0] - t_floor]]))
        objective = lambda v: np.trace(v[Q])  # noqa: E731
    return p, objective, (X, Y, Ah, Bh, Ch, t)


def _recover(d: _Data, X, Y, Ah, Bh, Ch, cond_limit: float) -> ControllerRealization:
    n = d.A.shape[0]
    U, s, Vt = np.linalg.svd(np.eye(n) - X @ Y)
    if s[-1] <= 0 or s[0] / s[-1] > cond_limit:
        raise RecoveryFailure(f"I - XY is ill-conditioned (cond {s[0] / max(s[-1], 1e-300):.3g})")
    Mm = U * np.sqrt(s)
    Nn = Vt.T * np.sqrt(s)
    Ck = np.linalg.solve(Mm, Ch.T).T
    Bk = np.linalg.solve(Nn, Bh)
    Ak = np.linalg.solve(Nn, Ah - Nn @ Bk @ d.Cy @ X - Y @ d.Bu @ Ck @ Mm.T - Y @ d.A @ X)
    Ak = np.linalg.solve(Mm, Ak.T).T
    return ControllerRealization(Ak, Bk, Ck)


def _check_structure(plant: GeneralizedPlant):
    if np.any(plant.Dzw[1:] != 0):
        raise ValueError("the H2 channel has direct feedthrough from w; its H2 norm is infinite")
    if np.any(plant.Dyu != 0):
        raise ValueError("measurement feedthrough from u is not supported")


def synthesize_mixed(
    plant: GeneralizedPlant,
    bounds: SynthesisBounds,
    options: SynthesisOptions | None = None,
) -> ControllerRealization:
    """Full-order controller meeting ``||w->e_w||_inf <= gamma_e`` and
    ``||w->u_w||_2 <= gamma_u`` with an internally stable loop.

    Raises
    ------
    Infeasible
        The LMIs have no strictly feasible point at these bounds.
    RecoveryFailure
        ``I - XY`` too ill-conditioned to invert.
    VerificationFailure
        The recovered controller fails the independent norm check.
    """
    opts = options or SynthesisOptions()
    _check_structure(plant)
    sc = sla.matrix_balance(plant.A, permute=False, separate=True)[1][0].astype(float)
    candidates = []
    margin = -np.inf
    caps = [opts.loose_cap] + [opts.xy_cap] * opts.rescale_iterations
    for it, cap in enumerate(caps):
        d = _normalized_data(plant, bounds, sc)
        p, obj, (X, Y, Ah, Bh, Ch, t) = _build_lmis(d, replace(opts, xy_cap=cap), "margin")
        res, v = p.solve(obj)
        margin = float(v[t][0, 0])
        log.info("rescale pass %d (cap %.0e): margin %.4g (%s)", it, cap, margin, res.status)
        if margin > 1e-9:
            candidates.append((d, v[X], v[Y], v[Ah], v[Bh], v[Ch]))
        xd, yd = np.diag(v[X]), np.diag(v[Y])
        if np.all(xd > 0) and np.all(yd > 0):
            sc = sc * (xd / yd) ** 0.25
    if not candidates:
        raise Infeasible(f"no strictly feasible point at {bounds} (margin {margin:.3g})", bounds)
    if margin > 1e-9 and opts.objective == "h2":
        d = _normalized_data(plant, bounds, sc)
        p, obj, (X, Y, Ah, Bh, Ch, t) = _build_lmis(d, opts, "final", min(opts.final_margin, 0.5 * margin))
        res, v = p.solve(obj)
        log.info("final pass: trace Q %.4g (%s)", res.primal_objective, res.status)
        if float(v[t][0, 0]) > 0:
            candidates.append((d, v[X], v[Y], v[Ah], v[Bh], v[Ch]))

    failure = None
    report = None
    for d, Xv, Yv, Ahv, Bhv, Chv in reversed(candidates):
        try:
            k = _recover(d, Xv, Yv, Ahv, Bhv, Chv, opts.recovery_cond)
        except RecoveryFailure as exc:
            failure = exc
            continue
        report = verify(plant, k, bounds)
        if report.pass_:
            return k
        log.info("candidate rejected: %s", report.summary())
    if report is None and failure is not None:
        raise failure
    if report is None:
        raise Infeasible(f"no usable LMI solution at {bounds}", bounds)
    raise VerificationFailure(f"controller failed verification: {report.summary()}", report)
