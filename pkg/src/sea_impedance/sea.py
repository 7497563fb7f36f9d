"""Cable-driven series elastic actuator model and weighted generalized plant.

The actuator is a velocity-sourced motor under a PI velocity loop pushing on
a spring whose far end is the human-held output link::

    omega_d + W_d d --(+)--> PI --> 1/(J s + b) --> omega_A --> 1/s --> phi_A
                      (-)                            |
                       ^-----------------------------+
    tau_L = K_s (phi_A - phi_meas),   phi_meas = W_phi phi_L - W_n n

The desired interaction torque is ``tau_d = -P_d W_phi phi_L`` and the
impedance error is ``e = tau_d - tau_L``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ImproperSystem
from .lti import Polynomial, RationalTransferFunction, StateSpace, interconnect, realize

log = logging.getLogger(__name__)

TF = RationalTransferFunction


@dataclass(frozen=True)
class SeaParameters:
    """Identified actuator parameters (SI units).

    ``K_s`` is the effective stiffness of both springs together.  ``r`` and
    ``K_g`` are carried for bookkeeping only; no model equation uses them.
    """

    J_A: float = 6.9e-4  # kg m^2
    b_f: float = 0.0059  # Nm/(rad/s)
    K_s: float = 0.0484  # Nm/rad (2 x 0.0242)
    K_pv: float = 0.0457  # Nm/(rad/s)
    K_iv: float = 1.3455  # Nm/rad
    omega_max: float = 44.0  # rad/s
    r: float = 7.25e-3  # m
    K_g: float = 14.0

    def __post_init__(self):
        for name in ("J_A", "K_pv", "K_iv", "omega_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.K_s < 0:
            raise ValueError("K_s must be nonnegative")
        if self.b_f < 0:
            raise ValueError("b_f must be nonnegative")


@dataclass(frozen=True)
class DesiredImpedance:
    """Target mass-damper-spring ``P_d = M_d s^2 + B_d s + K_d``."""

    M_d: float = 0.0
    B_d: float = 0.0
    K_d: float = 0.0

    def __post_init__(self):
        vals = (self.M_d, self.B_d, self.K_d)
        if min(vals) < 0:
            raise ValueError("impedance coefficients must be nonnegative")
        if max(vals) <= 0:
            raise ValueError("at least one impedance coefficient must be positive")


def design_We(M: float, omega_0: float, epsilon: float) -> RationalTransferFunction:
    """Error weight ``(s/M + omega_0) / (s + omega_0 epsilon)``.

    ``1/W_e`` bounds the sensitivity: steady error ``epsilon``, bandwidth
    ``omega_0`` and peak ``M``.
    """
    if not M >= 1:
        raise ValueError("peak sensitivity M must be >= 1")
    if not omega_0 > 0:
        raise ValueError("omega_0 must be positive")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return TF(Polynomial([omega_0, 1.0 / M]), Polynomial([omega_0 * epsilon, 1.0]))


def lowpass_phi(cutoff: float = 500.0, order: int = 2) -> RationalTransferFunction:
    """Unit-DC-gain filter ``(cutoff / (s + cutoff))**order``."""
    return TF(Polynomial([cutoff**order]), Polynomial([cutoff, 1.0]) ** order)


def _as_tf(w) -> RationalTransferFunction:
    if isinstance(w, RationalTransferFunction):
        return w
    return TF.constant(float(w))


@dataclass(frozen=True)
class WeightingSet:
    """Frequency weights of the generalized plant.

    ``W_e`` is derived from ``(M, omega_0, epsilon)``; the remaining weights
    may be scalars or rational functions.
    """

    M: float = 1.0
    omega_0: float = 60.0
    epsilon: float = 0.005
    W_u: RationalTransferFunction = field(default_factory=lambda: TF.constant(1.0 / 44.0))
    W_d: RationalTransferFunction = field(default_factory=lambda: TF.constant(0.1))
    W_n: RationalTransferFunction = field(default_factory=lambda: TF.constant(0.1))
    W_phi: RationalTransferFunction = field(default_factory=lambda: TF.constant(1.0))

    def __post_init__(self):
        for name in ("W_u", "W_d", "W_n", "W_phi"):
            object.__setattr__(self, name, _as_tf(getattr(self, name)))
            w = getattr(self, name)
            if not w.is_proper:
                raise ImproperSystem(f"{name} is improper")
            if w.denominator.degree > 0 and np.any(w.poles().real >= 0):
                raise ValueError(f"{name} must be stable")
        design_We(self.M, self.omega_0, self.epsilon)  # validates

    @property
    def W_e(self) -> RationalTransferFunction:
        return design_We(self.M, self.omega_0, self.epsilon)


def build_sea_plant(p: SeaParameters) -> tuple[RationalTransferFunction, RationalTransferFunction]:
    """Return ``(G1, G2)``: omega_d -> tau_L and phi_L -> tau_L."""
    J, b, Ks, Kp, Ki = p.J_A, p.b_f, p.K_s, p.K_pv, p.K_iv
    G1 = TF(Polynomial([Ki * Ks, Kp * Ks]), Polynomial([0.0, Ki + Ks, b + Kp, J]))
    G2 = TF(Polynomial([-Ki * Ks, -(b + Kp) * Ks, -J * Ks]), Polynomial([Ki + Ks, b + Kp, J]))
    return G1, G2


def desired_models(d: DesiredImpedance) -> tuple[RationalTransferFunction, RationalTransferFunction]:
    """Return ``(P_d, Z_d)`` with ``Z_d = P_d / s``."""
    P_d = TF(Polynomial([d.K_d, d.B_d, d.M_d]), Polynomial([1.0]))
    Z_d = TF(Polynomial([d.K_d, d.B_d, d.M_d]), Polynomial([0.0, 1.0]))
    return P_d, Z_d


# channel layout of the generalized plant
W_LABELS = ("phi_L", "d", "n")
U_LABELS = ("omega_d",)
Z_LABELS = ("e_w", "u_w")
Y_LABELS = ("tau_L", "e")


@dataclass(frozen=True)
class GeneralizedPlant:
    """Weighted open loop with inputs ``(phi_L, d, n, omega_d)`` and outputs
    ``(e_w, u_w, tau_L, e)``; ``e_w`` and ``u_w`` are the weighted error and
    weighted control effort."""

    system: StateSpace
    n_w: int = 3
    n_u: int = 1
    n_z: int = 2
    n_y: int = 2

    @property
    def A(self):
        return self.system.A

    @property
    def Bw(self):
        return self.system.B[:, : self.n_w]

    @property
    def Bu(self):
        return self.system.B[:, self.n_w :]

    @property
    def Cz(self):
        return self.system.C[: self.n_z]

    @property
    def Cy(self):
        return self.system.C[self.n_z :]

    @property
    def Dzw(self):
        return self.system.D[: self.n_z, : self.n_w]

    @property
    def Dzu(self):
        return self.system.D[: self.n_z, self.n_w :]

    @property
    def Dyw(self):
        return self.system.D[self.n_z :, : self.n_w]

    @property
    def Dyu(self):
        return self.system.D[self.n_z :, self.n_w :]

    @property
    def n_states(self) -> int:
        return self.system.n_states


def _shared_filter(W_phi: RationalTransferFunction, P_d: RationalTransferFunction) -> StateSpace:
    """One realization of ``[W_phi; P_d W_phi]`` driven by phi_L.

    Both rows share the denominator of ``W_phi``, so they share its
    controllable-canonical ``(A, B)``.
    """
    num = W_phi.numerator * P_d.numerator
    den = W_phi.denominator * P_d.denominator
    pw = TF(num, den)
    if not pw.is_proper:
        raise ImproperSystem(
            f"P_d W_phi is improper (relative degree {pw.relative_degree}); "
            "raise the relative degree of W_phi"
        )
    r1 = realize(W_phi)
    r2 = realize(pw)
    if r1.n_states != r2.n_states or not (np.allclose(r1.A, r2.A) and np.allclose(r1.B, r2.B)):
        raise AssertionError("shared filter realization mismatch")
    return StateSpace(
        r1.A, r1.B, np.vstack([r1.C, r2.C]), np.vstack([r1.D, r2.D]),
        input_labels=("phi_L",), output_labels=("phi_f", "pd_phi_f"),
    )


def build_generalized_plant(
    p: SeaParameters,
    impedance: DesiredImpedance,
    weights: WeightingSet,
    *,
    filter_spring_path: bool = True,
) -> GeneralizedPlant:
    """Assemble the weighted open loop from the physical block diagram.

    With ``filter_spring_path`` (the design model) the spring sees the
    W_phi-filtered hand motion, so every transfer entry carries W_phi.  Pass
    False for the physical loop, in which the spring sees raw phi_L and only
    the desired torque is filtered.
    """
    P_d, _ = desired_models(impedance)
    Ks = p.K_s
    systems = {
        "pi": realize(TF(Polynomial([p.K_iv, p.K_pv]), Polynomial([0.0, 1.0])), "v", "tau_m"),
        "motor": realize(TF(Polynomial([1.0]), Polynomial([p.b_f, p.J_A])), "tau", "omega_A"),
        "cable": realize(TF(Polynomial([1.0]), Polynomial([0.0, 1.0])), "omega_A", "phi_A"),
        "filt": _shared_filter(weights.W_phi, P_d),
        "wd": realize(weights.W_d, "d", "d_w"),
        "wn": realize(weights.W_n, "n", "n_w"),
        "spring": StateSpace.static([[Ks, -Ks]], ("phi_A", "phi_m"), ("tau_L",)),
        "err": StateSpace.static([[-1.0, -1.0]], ("pd_phi", "tau_L"), ("e",)),
        "we": realize(weights.W_e, "e", "e_w"),
        "wu": realize(weights.W_u, "u", "u_w"),
    }
    connections = {
        "pi.v": [(1.0, "omega_d"), (1.0, "wd.d_w"), (-1.0, "motor.omega_A")],
        "motor.tau": [(1.0, "pi.tau_m"), (-1.0, "spring.tau_L")],
        "cable.omega_A": "motor.omega_A",
        "filt.phi_L": "phi_L",
        "wd.d": "d",
        "wn.n": "n",
        "spring.phi_A": "cable.phi_A",
        "spring.phi_m": [(1.0, "filt.phi_f" if filter_spring_path else "phi_L"), (-1.0, "wn.n_w")],
        "err.pd_phi": "filt.pd_phi_f",
        "err.tau_L": "spring.tau_L",
        "we.e": "err.e",
        "wu.u": "omega_d",
    }
    sys = interconnect(
        systems,
        connections,
        inputs=W_LABELS + U_LABELS,
        outputs=("we.e_w", "wu.u_w", "spring.tau_L", "err.e"),
    ).relabel(output_labels=Z_LABELS + Y_LABELS)
    gp = GeneralizedPlant(sys)
    _warn_axis_poles(gp)
    return gp


def _warn_axis_poles(gp: GeneralizedPlant) -> None:
    poles = np.linalg.eigvals(gp.A)
    near = poles[np.abs(poles.real) < 1e-8]
    extra = near[np.abs(near) > 1e-8]
    if extra.size:
        log.warning("plant has poles near the imaginary axis besides the origin: %s", extra)


def plant_entry_table(
    G1: RationalTransferFunction,
    G2: RationalTransferFunction,
    P_d: RationalTransferFunction,
    weights: WeightingSet,
) -> list[list[RationalTransferFunction]]:
    """Closed-form 4x4 transfer matrix of the generalized plant.

    Rows ``(e_w, u_w, tau_L, e)``, columns ``(phi_L, d, n, omega_d)``.  Used
    as an independent oracle for :func:`build_generalized_plant`.
    """
    We, Wu, Wd, Wn, Wp = weights.W_e, weights.W_u, weights.W_d, weights.W_n, weights.W_phi
    zero = TF.constant(0.0)
    return [
        [-(P_d + G2) * Wp * We, -G1 * Wd * We, G2 * Wn * We, -G1 * We],
        [zero, zero, zero, Wu],
        [G2 * Wp, G1 * Wd, -G2 * Wn, G1],
        [-(P_d + G2) * Wp, -G1 * Wd, G2 * Wn, -G1],
    ]
