"""Continuous-time LTI algebra: polynomials, transfer functions, state space.

Polynomials store coefficients in *ascending* powers of ``s``.  All objects
are treated as immutable values once constructed.
"""

from __future__ import annotations

from functools import cached_property
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import polynomial as npoly

from .errors import (
    AlgebraicLoop,
    DimensionMismatch,
    ImproperSystem,
    InfiniteH2Norm,
    NotHurwitz,
    SingularResolvent,
    UnwiredInput,
    UnwiredOutput,
)

HURWITZ_MARGIN = 1e-9
CANCEL_TOL = 1e-7


# ---------------------------------------------------------------------------
# Polynomials and rational functions
# ---------------------------------------------------------------------------


class Polynomial:
    """Real polynomial in ``s`` with ascending coefficients.

    Trailing (highest-degree) exact zeros are trimmed, so ``degree`` is
    ``len(coefficients) - 1``.  The zero polynomial has no coefficients and
    degree ``-1``.
    """

    __slots__ = ("_c",)

    def __init__(self, coefficients: Iterable[float] | float):
        c = np.atleast_1d(np.asarray(coefficients, dtype=float)).copy()
        if c.ndim != 1:
            raise ValueError("coefficients must be one-dimensional")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else c[:0]
        c.setflags(write=False)
        self._c = c

    @classmethod
    def from_descending(cls, coefficients: Iterable[float]) -> "Polynomial":
        return cls(np.asarray(list(coefficients), dtype=float)[::-1])

    @classmethod
    def from_roots(cls, roots: Iterable[complex], gain: float = 1.0) -> "Polynomial":
        c = npoly.polyfromroots(list(roots))
        return cls(gain * np.real(c))

    @property
    def coefficients(self) -> np.ndarray:
        return self._c

    @property
    def degree(self) -> int:
        return self._c.size - 1

    @property
    def is_zero(self) -> bool:
        return self._c.size == 0

    @property
    def leading(self) -> float:
        return float(self._c[-1]) if self._c.size else 0.0

    def roots(self) -> np.ndarray:
        """Roots via companion-matrix eigenvalues."""
        if self.degree < 1:
            return np.zeros(0, dtype=complex)
        return npoly.polyroots(self._c).astype(complex)

    def __call__(self, s):
        if self.is_zero:
            return np.zeros_like(np.asarray(s, dtype=complex))
        return npoly.polyval(s, self._c)

    def _coerce(self, other) -> "Polynomial":
        return other if isinstance(other, Polynomial) else Polynomial(other)

    def __add__(self, other):
        a, b = self._c, self._coerce(other)._c
        n = max(a.size, b.size)
        return Polynomial(np.pad(a, (0, n - a.size)) + np.pad(b, (0, n - b.size)))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self._c)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if self.is_zero or other.is_zero:
            return Polynomial([])
        return Polynomial(npoly.polymul(self._c, other._c))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Polynomial([1.0])
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._c.shape == other._c.shape and bool(np.all(self._c == other._c))

    def __hash__(self):
        return hash(self._c.tobytes())

    def allclose(self, other: "Polynomial", rtol: float = 1e-9) -> bool:
        a, b = self._c, other._c
        n = max(a.size, b.size)
        a = np.pad(a, (0, n - a.size))
        b = np.pad(b, (0, n - b.size))
        scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-300)
        return bool(np.all(np.abs(a - b) <= rtol * scale))

    def __repr__(self):
        return f"Polynomial({self._c.tolist()})"


@dataclass(frozen=True, eq=False)
class RationalTransferFunction:
    """``numerator(s) / denominator(s)`` with real coefficients.

    Improper values are legal; they are rejected only by :func:`realize`.
    No pole-zero cancellation happens unless :meth:`minimize` is called.
    """

    numerator: Polynomial
    denominator: Polynomial

    def __post_init__(self):
        num = self.numerator if isinstance(self.numerator, Polynomial) else Polynomial(self.numerator)
        den = self.denominator if isinstance(self.denominator, Polynomial) else Polynomial(self.denominator)
        if den.is_zero:
            raise ZeroDivisionError("denominator is the zero polynomial")
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    @classmethod
    def constant(cls, k: float) -> "RationalTransferFunction":
        return cls(Polynomial([k]), Polynomial([1.0]))

    @classmethod
    def s(cls) -> "RationalTransferFunction":
        return cls(Polynomial([0.0, 1.0]), Polynomial([1.0]))

    @property
    def is_proper(self) -> bool:
        return self.numerator.degree <= self.denominator.degree

    @property
    def relative_degree(self) -> int:
        if self.numerator.is_zero:
            return self.denominator.degree + 1
        return self.denominator.degree - self.numerator.degree

    @property
    def is_static(self) -> bool:
        return self.denominator.degree == 0 and self.numerator.degree <= 0

    def poles(self) -> np.ndarray:
        return self.denominator.roots()

    def zeros(self) -> np.ndarray:
        return self.numerator.roots()

    def __call__(self, s):
        return self.numerator(s) / self.denominator(s)

    def normalized(self) -> "RationalTransferFunction":
        """Scale so the denominator is monic."""
        lead = self.denominator.leading
        return RationalTransferFunction(
            Polynomial(self.numerator.coefficients / lead),
            Polynomial(self.denominator.coefficients / lead),
        )

    def minimize(self, tol: float = CANCEL_TOL) -> "RationalTransferFunction":
        """Cancel numerator/denominator roots closer than ``tol``."""
        zs = list(self.zeros())
        ps = list(self.poles())
        kept_z = []
        for z in zs:
            if ps:
                d = np.abs(np.asarray(ps) - z)
                k = int(np.argmin(d))
                if d[k] <= tol:
                    ps.pop(k)
                    continue
            kept_z.append(z)
        gain = self.numerator.leading / self.denominator.leading
        if self.numerator.is_zero:
            return RationalTransferFunction(Polynomial([]), Polynomial([1.0]))
        return RationalTransferFunction(Polynomial.from_roots(kept_z, gain), Polynomial.from_roots(ps))

    @staticmethod
    def _coerce(other) -> "RationalTransferFunction":
        if isinstance(other, RationalTransferFunction):
            return other
        if isinstance(other, Polynomial):
            return RationalTransferFunction(other, Polynomial([1.0]))
        return RationalTransferFunction.constant(float(other))

    def __mul__(self, other):
        o = self._coerce(other)
        return RationalTransferFunction(self.numerator * o.numerator, self.denominator * o.denominator)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o.numerator.is_zero:
            raise ZeroDivisionError("division by the zero transfer function")
        return RationalTransferFunction(self.numerator * o.denominator, self.denominator * o.numerator)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __add__(self, other):
        o = self._coerce(other)
        if self.denominator == o.denominator:
            return RationalTransferFunction(self.numerator + o.numerator, self.denominator)
        return RationalTransferFunction(
            self.numerator * o.denominator + o.numerator * self.denominator,
            self.denominator * o.denominator,
        )

    __radd__ = __add__

    def __eq__(self, other):
        """Structural equality (same coefficient arrays), not equivalence."""
        if not isinstance(other, RationalTransferFunction):
            return NotImplemented
        return self.numerator == other.numerator and self.denominator == other.denominator

    def __hash__(self):
        return hash((self.numerator, self.denominator))

    def __neg__(self):
        return RationalTransferFunction(-self.numerator, self.denominator)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __pow__(self, k: int):
        out = RationalTransferFunction.constant(1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    def __repr__(self):
        return (f"RationalTransferFunction(num={self.numerator.coefficients.tolist()}, "
                f"den={self.denominator.coefficients.tolist()})")


# ---------------------------------------------------------------------------
# State space
# ---------------------------------------------------------------------------


def _labels(labels, count, prefix):
    if labels is None:
        return tuple(f"{prefix}{k}" for k in range(count))
    labels = tuple(labels)
    if len(labels) != count:
        raise DimensionMismatch(f"expected {count} {prefix} labels, got {len(labels)}")
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate labels in {labels}")
    return labels


@dataclass(frozen=True, eq=False)
class StateSpace:
    """``x' = A x + B u``, ``y = C x + D u`` with labelled channels."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    input_labels: tuple = field(default=None)
    output_labels: tuple = field(default=None)

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        p, m = D.shape
        A = np.asarray(self.A, dtype=float)
        A = np.atleast_2d(A) if A.size else np.zeros((0, 0))
        n = A.shape[0]
        if A.ndim != 2 or A.shape != (n, n):
            raise DimensionMismatch("A must be square")
        B = np.asarray(self.B, dtype=float).reshape(n, m)
        C = np.asarray(self.C, dtype=float).reshape(p, n)
        for name, mat in (("A", A), ("B", B), ("C", C), ("D", D)):
            mat = mat.copy()
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)
        object.__setattr__(self, "input_labels", _labels(self.input_labels, m, "u"))
        object.__setattr__(self, "output_labels", _labels(self.output_labels, p, "y"))

    @classmethod
    def static(cls, gain, input_labels=None, output_labels=None) -> "StateSpace":
        D = np.atleast_2d(np.asarray(gain, dtype=float))
        p, m = D.shape
        return cls(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), D, input_labels, output_labels)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    def relabel(self, input_labels=None, output_labels=None) -> "StateSpace":
        return StateSpace(self.A, self.B, self.C, self.D,
                          input_labels or self.input_labels, output_labels or self.output_labels)

    def _index(self, keys, labels):
        out = []
        for k in keys:
            if isinstance(k, (int, np.integer)):
                out.append(int(k))
            else:
                try:
                    out.append(labels.index(k))
                except ValueError:
                    raise KeyError(f"unknown channel {k!r}; have {labels}") from None
        return out

    def subsystem(self, outputs=None, inputs=None) -> "StateSpace":
        """Select output rows and input columns by label or index."""
        oi = list(range(self.n_outputs)) if outputs is None else self._index(outputs, self.output_labels)
        ii = list(range(self.n_inputs)) if inputs is None else self._index(inputs, self.input_labels)
        return StateSpace(
            self.A, self.B[:, ii], self.C[oi, :], self.D[np.ix_(oi, ii)],
            [self.input_labels[i] for i in ii], [self.output_labels[i] for i in oi],
        )

    def evaluate(self, s: complex) -> np.ndarray:
        """Transfer matrix ``C (sI - A)^-1 B + D`` at one complex point."""
        if self.n_states == 0:
            return self.D.astype(complex)
        A, B, C = self._balanced
        M = s * np.eye(self.n_states) - A
        try:
            X = np.linalg.solve(M, B.astype(complex))
        except np.linalg.LinAlgError:
            raise SingularResolvent(f"sI - A singular at s={s}") from None
        if np.linalg.cond(M) > 1e14:
            raise SingularResolvent(f"sI - A numerically singular at s={s}")
        return C @ X + self.D

    @cached_property
    def _balanced(self):
        """Diagonally similar ``(A, B, C)`` with equilibrated rows/columns of ``A``."""
        if self.n_states == 0:
            return self.A, self.B, self.C
        t = sla.matrix_balance(self.A, permute=False, separate=True)[1][0].astype(float)
        return self.A * (t[None, :] / t[:, None]), self.B / t[:, None], self.C * t[None, :]

    def balanced(self) -> "StateSpace":
        A, B, C = self._balanced
        return StateSpace(A, B, C, self.D, self.input_labels, self.output_labels)

    __call__ = evaluate

    def poles(self) -> np.ndarray:
        return np.linalg.eigvals(self.A) if self.n_states else np.zeros(0, dtype=complex)

    def to_transfer_function(self, output=0, input=0) -> RationalTransferFunction:
        """SISO entry as a rational function (characteristic-polynomial route)."""
        sub = self.subsystem([output], [input])
        if sub.n_states == 0:
            return RationalTransferFunction.constant(float(sub.D[0, 0]))
        den = np.poly(sub.A)
        # C (sI-A)^-1 B = det(sI - A + B C)/det(sI - A) - 1
        num = np.poly(sub.A - sub.B @ sub.C) - den + sub.D[0, 0] * den
        return RationalTransferFunction(Polynomial(num[::-1]), Polynomial(den[::-1]))

    def similarity(self, T: np.ndarray) -> "StateSpace":
        """Coordinates ``x = T z``."""
        Ti = np.linalg.inv(T)
        return StateSpace(Ti @ self.A @ T, Ti @ self.B, self.C @ T, self.D,
                          self.input_labels, self.output_labels)

    def __repr__(self):
        return (f"StateSpace(n={self.n_states}, inputs={list(self.input_labels)}, "
                f"outputs={list(self.output_labels)})")


def realize(tf: RationalTransferFunction, input_label="u", output_label="y") -> StateSpace:
    """Controllable canonical realization of a proper SISO rational function."""
    if not tf.is_proper:
        raise ImproperSystem(
            f"numerator degree {tf.numerator.degree} exceeds denominator degree "
            f"{tf.denominator.degree}; pre-filter with a low-pass weight to make it proper")
    tf = tf.normalized()
    n = tf.denominator.degree
    a = tf.denominator.coefficients  # monic, ascending
    b = np.pad(tf.numerator.coefficients, (0, n + 1 - tf.numerator.coefficients.size))
    d = b[n]
    c = b[:n] - d * a[:n]
    A = np.zeros((n, n))
    if n:
        A[:-1, 1:] = np.eye(n - 1)
        A[-1, :] = -a[:n]
    B = np.zeros((n, 1))
    if n:
        B[-1, 0] = 1.0
    return StateSpace(A, B, c.reshape(1, n), [[d]], [input_label], [output_label])


# ---------------------------------------------------------------------------
# Interconnection
# ---------------------------------------------------------------------------


def interconnect(
    systems: Mapping[str, StateSpace],
    connections: Mapping[str, object],
    inputs: Sequence[str],
    outputs: Sequence[str],
) -> StateSpace:
    """Wire named subsystems into one aggregate system.

    Signals are addressed as ``"<system>.<label>"``; external inputs use bare
    names listed in ``inputs``.  ``connections`` maps every subsystem input to
    its driving signal: either a signal name or a sequence of
    ``(gain, signal)`` pairs (a summing junction).  ``outputs`` may name any
    subsystem output or external input.

    The states of the result are the concatenated subsystem states in the
    iteration order of ``systems``.
    """
    names = list(systems)
    out_index: dict[str, int] = {}
    in_index: dict[str, int] = {}
    blocks_A, blocks_B, blocks_C, blocks_D = [], [], [], []
    oi = ii = 0
    for name in names:
        sysk = systems[name]
        for lab in sysk.output_labels:
            out_index[f"{name}.{lab}"] = oi
            oi += 1
        for lab in sysk.input_labels:
            in_index[f"{name}.{lab}"] = ii
            ii += 1
        blocks_A.append(sysk.A)
        blocks_B.append(sysk.B)
        blocks_C.append(sysk.C)
        blocks_D.append(sysk.D)
    n_out, n_in = oi, ii
    A = sla.block_diag(*blocks_A) if blocks_A else np.zeros((0, 0))
    n = A.shape[0]
    B = _block_diag_rect(blocks_B, n, n_in)
    C = _block_diag_rect(blocks_C, n_out, n)
    D = _block_diag_rect(blocks_D, n_out, n_in)

    ext = {k: j for j, k in enumerate(inputs)}
    if len(ext) != len(inputs):
        raise ValueError("duplicate external input names")
    K = np.zeros((n_in, n_out))  # internal input <- outputs
    E = np.zeros((n_in, len(inputs)))  # internal input <- external inputs

    unknown = set(connections) - set(in_index)
    if unknown:
        raise UnwiredInput(f"connections reference unknown inputs {sorted(unknown)}")
    for sig, i in in_index.items():
        if sig not in connections:
            raise UnwiredInput(f"input {sig} is not driven")
        src = connections[sig]
        terms = [(1.0, src)] if isinstance(src, str) else list(src)
        for gain, name in terms:
            if name in out_index:
                K[i, out_index[name]] += gain
            elif name in ext:
                E[i, ext[name]] += gain
            else:
                raise UnwiredOutput(f"signal {name!r} driving {sig} does not exist")

    L = np.eye(n_out) - D @ K
    if n_out and np.linalg.cond(L) > 1e12:
        raise AlgebraicLoop("feedthrough loop I - D K is singular")
    Li = np.linalg.inv(L) if n_out else L
    # y = Li (C x + D E w);  u_int = K y + E w
    Cy = Li @ C
    Dy = Li @ D @ E
    Ac = A + B @ K @ Cy
    Bc = B @ (K @ Dy + E)

    rows_C, rows_D = [], []
    for name in outputs:
        if name in out_index:
            k = out_index[name]
            rows_C.append(Cy[k])
            rows_D.append(Dy[k])
        elif name in ext:
            rows_C.append(np.zeros(n))
            e = np.zeros(len(inputs))
            e[ext[name]] = 1.0
            rows_D.append(e)
        else:
            raise UnwiredOutput(f"requested output {name!r} does not exist")
    Cout = np.array(rows_C).reshape(len(outputs), n)
    Dout = np.array(rows_D).reshape(len(outputs), len(inputs))
    out_labels = [o.split(".", 1)[-1] if o.count(".") else o for o in outputs]
    if len(set(out_labels)) != len(out_labels):
        out_labels = list(outputs)
    return StateSpace(Ac, Bc, Cout, Dout, list(inputs), out_labels)


def _block_diag_rect(blocks, rows, cols):
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r : r + b.shape[0], c : c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def series(first: StateSpace, second: StateSpace) -> StateSpace:
    """``second * first`` for SISO systems."""
    return interconnect(
        {"a": first.relabel(["u"], ["y"]), "b": second.relabel(["u"], ["y"])},
        {"a.u": "in", "b.u": "a.y"}, ["in"], ["b.y"],
    ).relabel(["u"], ["y"])


def feedback(forward: StateSpace, back: StateSpace | None = None, sign: float = -1.0) -> StateSpace:
    """SISO closed loop ``forward / (1 - sign * forward * back)``."""
    back = back if back is not None else StateSpace.static([[1.0]])
    return interconnect(
        {"g": forward.relabel(["u"], ["y"]), "h": back.relabel(["u"], ["y"])},
        {"g.u": [(1.0, "r"), (sign, "h.y")], "h.u": "g.y"}, ["r"], ["g.y"],
    ).relabel(["u"], ["y"])


# ---------------------------------------------------------------------------
# Stability, Lyapunov, norms
# ---------------------------------------------------------------------------


def spectral_abscissa(A: np.ndarray) -> float:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(A).real))


def is_hurwitz(sys: StateSpace | np.ndarray) -> tuple[bool, float]:
    """``(stable, abscissa)``; stable iff every eigenvalue has Re < -1e-9."""
    A = sys.A if isinstance(sys, StateSpace) else np.asarray(sys, dtype=float)
    a = spectral_abscissa(A)
    return a < -HURWITZ_MARGIN, a


def solve_lyapunov(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve ``A P + P A^T + Q = 0`` for Hurwitz ``A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    stable, a = is_hurwitz(A)
    if not stable:
        raise NotHurwitz(f"spectral abscissa {a:.3g} >= 0")
    Q = 0.5 * (Q + Q.T)
    P = sla.solve_continuous_lyapunov(A, -Q)
    return 0.5 * (P + P.T)


def lyapunov_residual(A, P, Q) -> float:
    return float(np.linalg.norm(A @ P + P @ A.T + Q, "fro"))


def h2_norm(sys: StateSpace) -> float:
    """``sqrt(trace(C P C^T))`` with ``P`` the controllability Gramian."""
    if np.any(sys.D != 0):
        raise InfiniteH2Norm("nonzero feedthrough")
    if sys.n_states == 0:
        return 0.0
    sys = sys.balanced()
    try:
        P = solve_lyapunov(sys.A, sys.B @ sys.B.T)
    except NotHurwitz as exc:
        raise InfiniteH2Norm(str(exc)) from None
    return float(np.sqrt(max(np.trace(sys.C @ P @ sys.C.T), 0.0)))


def _sigma_max(sys: StateSpace, w: float) -> float:
    return float(np.linalg.norm(sys.evaluate(1j * w), 2))


def _hamiltonian_has_imag_eig(sys: StateSpace, gamma: float) -> bool:
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    R = gamma**2 * np.eye(D.shape[1]) - D.T @ D
    S = gamma**2 * np.eye(D.shape[0]) - D @ D.T
    Ri = np.linalg.inv(R)
    Ah = A + B @ Ri @ D.T @ C
    H = np.block([
        [Ah, B @ Ri @ B.T],
        [-gamma**2 * C.T @ np.linalg.solve(S, C), -Ah.T],
    ])
    ev = np.linalg.eigvals(H)
    scale = max(np.linalg.norm(H, 1), 1.0)
    near = ev[np.abs(ev.real) <= 1e-7 * scale]
    if near.size == 0:
        return False
    # confirm candidate crossings on the frequency response itself
    for lam in near:
        w = abs(lam.imag)
        if _sigma_max(sys, w) >= gamma * (1 - 1e-6):
            return True
    return False


def hinf_norm(sys: StateSpace, tol: float = 1e-6) -> float:
    """Peak largest singular value over frequency.

    Bisection on ``gamma`` with the Hamiltonian imaginary-eigenvalue test.
    The returned value is the upper end of the final bracket, so it is never
    below the true norm by more than rounding.
    """
    dnorm = float(np.linalg.norm(sys.D, 2)) if sys.D.size else 0.0
    if sys.n_states == 0:
        return dnorm
    stable, a = is_hurwitz(sys)
    if not stable:
        raise NotHurwitz(f"spectral abscissa {a:.3g} >= 0")
    sys = sys.balanced()
    grid = np.logspace(-3, 5, 100)
    poles = np.abs(sys.poles())
    grid = np.concatenate([grid, poles[poles > 0], [0.0]])
    lo = max(max(_sigma_max(sys, w) for w in grid), dnorm)
    if lo == 0.0:
        return 0.0
    hi = 2.0 * lo + dnorm
    while _hamiltonian_has_imag_eig(sys, hi):
        lo = hi
        hi *= 2.0
    while hi - lo > tol * lo:
        mid = 0.5 * (lo + hi)
        if _hamiltonian_has_imag_eig(sys, mid):
            lo = mid
        else:
            hi = mid
    return hi


# ---------------------------------------------------------------------------
# Frequency response
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FrequencyResponse:
    """Complex response matrices on a strictly increasing grid (rad/s)."""

    frequencies: np.ndarray
    values: np.ndarray  # shape (N, p, m)

    def __post_init__(self):
        w = np.asarray(self.frequencies, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None, None]
        if w.ndim != 1 or v.shape[0] != w.size:
            raise DimensionMismatch("one response matrix per frequency is required")
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_transfer_function(cls, tf: RationalTransferFunction, grid) -> "FrequencyResponse":
        grid = _check_grid(grid)
        return cls(grid, tf(1j * grid))

    def entry(self, i: int = 0, j: int = 0) -> np.ndarray:
        return self.values[:, i, j]

    def magnitude_db(self, i: int = 0, j: int = 0) -> np.ndarray:
        return 20.0 * np.log10(np.abs(self.entry(i, j)))

    def phase_deg(self, i: int = 0, j: int = 0, unwrap: bool = True) -> np.ndarray:
        ph = np.angle(self.entry(i, j))
        if unwrap:
            ph = np.unwrap(ph)
        return np.degrees(ph)


def _check_grid(grid) -> np.ndarray:
    w = np.asarray(grid, dtype=float).ravel()
    if w.size == 0 or np.any(w <= 0) or np.any(np.diff(w) <= 0):
        raise ValueError("frequency grid must be positive and strictly increasing")
    return w


def frequency_response(sys: StateSpace, grid) -> FrequencyResponse:
    w = _check_grid(grid)
    vals = np.empty((w.size, sys.n_outputs, sys.n_inputs), dtype=complex)
    for k, wk in enumerate(w):
        vals[k] = sys.evaluate(1j * wk)
    return FrequencyResponse(w, vals)
