"""Small dense semidefinite programs in LMI form.

Solves::

    minimize    c^T x
    subject to  F0_b + sum_i x_i F_ib  >= 0     for every block b

with an infeasible-start primal-dual path-following method (Nesterov-Todd
scaling, Mehrotra predictor-corrector).  Block sizes here are a few dozen
at most, so everything is dense numpy.

:class:`LmiProblem` builds the block data from matrix-valued variables by
evaluating user callbacks, which must be affine in the variables.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)


@dataclass
class SdpResult:
    x: np.ndarray
    status: str  # optimal | inaccurate | infeasible | unbounded | max_iter | stalled
    primal_objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    slacks: list = field(default_factory=list)
    multipliers: list = field(default_factory=list)


def _sym(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def _max_step(S, dS):
    """Largest alpha with S + alpha dS >= 0 (S positive definite)."""
    L = np.linalg.cholesky(S)
    Li = sla.solve_triangular(L, np.eye(L.shape[0]), lower=True)
    lam = np.linalg.eigvalsh(_sym(Li @ dS @ Li.T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def solve_sdp(
    c: np.ndarray,
    F0: list[np.ndarray],
    F: list[np.ndarray],
    *,
    gap_tol: float = 1e-7,
    feas_tol: float = 1e-8,
    max_iter: int = 120,
) -> SdpResult:
    """Solve the LMI-form SDP.

    Parameters
    ----------
    c : (m,) array
        Objective vector.
    F0 : list of (k_b, k_b) arrays
        Constant terms, one per block.
    F : list of (m, k_b, k_b) arrays
        Coefficient matrices, one stack per block.
    """
    c = np.asarray(c, dtype=float)
    m = c.size
    F0 = [_sym(np.asarray(f, dtype=float)) for f in F0]
    F = [_sym(np.asarray(f, dtype=float)) for f in F]
    # Equilibrate: x = colscale * x_scaled, and each block multiplied by a
    # positive factor (which leaves its semidefinite constraint unchanged).
    colnorm = np.sqrt(sum(np.sum(Fb.reshape(m, -1) ** 2, axis=1) for Fb in F))
    colscale = 1.0 / np.where(colnorm > 0, colnorm, 1.0)
    F = [Fb * colscale[:, None, None] for Fb in F]
    c = c * colscale
    blkscale = []
    for b in range(len(F)):
        beta = 1.0 / max(1.0, np.linalg.norm(F0[b]), float(np.max(np.abs(F[b]))) * F[b].shape[1])
        F0[b] = F0[b] * beta
        F[b] = F[b] * beta
        blkscale.append(beta)
    sizes = [f.shape[0] for f in F0]
    ntot = sum(sizes)

    def A_of(Zs):
        return sum(np.einsum("iab,ab->i", Fb, Zb) for Fb, Zb in zip(F, Zs))

    def At_of(dx):
        return [np.einsum("i,iab->ab", dx, Fb) for Fb in F]

    normF0 = max(np.linalg.norm(f) for f in F0)
    normc = np.linalg.norm(c)
    x = np.zeros(m)
    S, Z = [], []
    for f0, Fb, k in zip(F0, F, sizes):
        fn = np.linalg.norm(Fb.reshape(m, -1), axis=1)
        xi = max(10.0, np.sqrt(k), np.linalg.norm(f0))
        zeta = max(10.0, np.sqrt(k), float(np.max((1.0 + np.abs(c)) / (1.0 + fn))))
        S.append(xi * np.eye(k))
        Z.append(zeta * np.eye(k))

    status = "max_iter"
    it = 0
    best = None
    prev_merit = np.inf
    stall = 0
    for it in range(1, max_iter + 1):
        Fx = [f0 + g for f0, g in zip(F0, At_of(x))]
        Rp = [fx - s for fx, s in zip(Fx, S)]
        rd = c - A_of(Z)
        gap = sum(float(np.sum(s * z)) for s, z in zip(S, Z))
        mu = gap / ntot
        pobj = float(c @ x)
        dobj = -sum(float(np.sum(f0 * z)) for f0, z in zip(F0, Z))
        pres = max(np.linalg.norm(r) for r in Rp) / (1.0 + normF0)
        dres = np.linalg.norm(rd) / (1.0 + normc)
        relgap = gap / (1.0 + abs(pobj) + abs(dobj))
        if relgap <= gap_tol and pres <= feas_tol and dres <= feas_tol:
            status = "optimal"
            best = None
            break
        score = max(relgap / gap_tol, pres / feas_tol, dres / feas_tol)
        if best is None or score < best[0]:
            best = (score, x, S, Z)
        elif score > 1e4 * best[0]:
            # numerical breakdown: the path has been lost
            status = "stalled"
            break
        # Farkas rays: a huge Z with A(Z) ~ 0 and <F0, Z> < 0 certifies that
        # no x satisfies the LMIs; a huge x with A^T(x) >= 0 and c^T x < 0
        # certifies an unbounded objective.
        zn = sum(float(np.trace(z)) for z in Z)
        if zn > 1e8 * (1.0 + normc):
            if np.linalg.norm(A_of(Z)) / zn < 1e-8 * (1.0 + normc) and -dobj / zn < -1e-8:
                status = "infeasible"
                break
        xn = np.linalg.norm(x)
        if xn > 1e8 * (1.0 + normF0) and pobj / xn < -1e-8:
            lam = min(np.linalg.eigvalsh(g)[0] for g in At_of(x / xn))
            if lam > -1e-8:
                status = "unbounded"
                break

        # Nesterov-Todd scaling point: W Z W = S, G = W^{-1} = Rg Rg^T
        try:
            Si, G, Ft, Rs, Rsi, Ds = [], [], [], [], [], []
            for Fb, sb, zb in zip(F, S, Z):
                L = np.linalg.cholesky(sb)
                R = np.linalg.cholesky(zb)
                Li = sla.solve_triangular(L, np.eye(L.shape[0]), lower=True)
                U, d, Vt = np.linalg.svd(R.T @ L)
                Rg = Li.T @ Vt.T * np.sqrt(d)
                Si.append(Li.T @ Li)
                G.append(Rg @ Rg.T)
                Rs.append(Rg)
                Rsi.append((Vt / np.sqrt(d)[:, None]) @ L.T)  # Rg^{-1}
                Ds.append(d)
                Ft.append((Rg.T @ Fb @ Rg).reshape(m, -1))
        except np.linalg.LinAlgError:
            status = "stalled"
            break
        M = sum(f @ f.T for f in Ft)
        M = 0.5 * (M + M.T)
        try:
            cho = sla.cho_factor(M)

            def mfactor(r):
                return sla.cho_solve(cho, r)
        except (np.linalg.LinAlgError, ValueError):
            if not np.all(np.isfinite(M)):
                status = "stalled"
                break
            Mp = M + 1e-14 * abs(np.trace(M)) / m * np.eye(m)

            def mfactor(r):
                return np.linalg.lstsq(Mp, r, rcond=None)[0]

        def msolve(r):
            # a few refinement sweeps against the unfactored operator
            dx = mfactor(r)
            for _ in range(3):
                res = r - M @ dx
                if np.linalg.norm(res) <= 1e-15 * (1.0 + np.linalg.norm(r)):
                    break
                dx = dx + mfactor(res)
            return dx

        def direction(sigma, corr=None):
            # In NT-scaled coordinates S and Z both equal diag(d); the
            # linearized complementarity is a diagonal Lyapunov equation.
            T = []
            for k in range(len(F)):
                d = Ds[k]
                R = np.diag(2.0 * (sigma * mu - d * d))
                if corr is not None:
                    dSs = Rs[k].T @ corr[0][k] @ Rs[k]
                    dZs = Rsi[k] @ corr[1][k] @ Rsi[k].T
                    R = R - (dSs @ dZs + dZs @ dSs)
                H = R / (d[:, None] + d[None, :])
                T.append(Rs[k] @ H @ Rs[k].T - G[k] @ Rp[k] @ G[k])
            dx = msolve(A_of(T) - rd)
            dS = [rp + g for rp, g in zip(Rp, At_of(dx))]
            dZ = [_sym(T[k] - G[k] @ (dS[k] - Rp[k]) @ G[k]) for k in range(len(F))]
            return dx, dS, dZ

        def steps(dS, dZ):
            ap = min([_max_step(s, d) for s, d in zip(S, dS)] + [np.inf])
            ad = min([_max_step(z, d) for z, d in zip(Z, dZ)] + [np.inf])
            return ap, ad

        try:
            dxa, dSa, dZa = direction(0.0)
            apa, ada = steps(dSa, dZa)
            apa, ada = min(1.0, apa), min(1.0, ada)
            mua = sum(float(np.sum((s + apa * ds) * (z + ada * dz)))
                      for s, ds, z, dz in zip(S, dSa, Z, dZa)) / ntot
            sigma = min(1.0, max(0.0, (mua / mu) ** 3)) if mu > 0 else 0.0
            dx, dS, dZ = direction(sigma, (dSa, dZa))
            ap, ad = steps(dS, dZ)
        except np.linalg.LinAlgError:
            status = "stalled"
            break
        tau = 0.9 + 0.09 * min(1.0, ap, ad)
        ap = min(1.0, tau * ap)
        ad = min(1.0, tau * ad)
        x = x + ap * dx
        S = [_sym(s + ap * d) for s, d in zip(S, dS)]
        Z = [_sym(z + ad * d) for z, d in zip(Z, dZ)]

        log.debug("it %d  step %.3g/%.3g  gap %.3g  pres %.3g  dres %.3g", it, ap, ad, relgap, pres, dres)
        merit = relgap + pres + dres
        if merit >= prev_merit * (1 - 1e-6) and ap < 1e-8 and ad < 1e-8:
            stall += 1
            if stall >= 5:
                status = "stalled"
                break
        else:
            stall = 0
        prev_merit = merit

    if best is not None:
        score, x, S, Z = best
        if status != "infeasible" and status != "unbounded" and score <= 1e3:
            # within three orders of the tolerances: roundoff floor reached
            status = "inaccurate"
    Fx = [f0 + g for f0, g in zip(F0, At_of(x))]
    pres = max(np.linalg.norm(f - s) for f, s in zip(Fx, S)) / (1.0 + normF0)
    dres = np.linalg.norm(c - A_of(Z)) / (1.0 + normc)
    gap = sum(float(np.sum(s * z)) for s, z in zip(S, Z))
    dobj = -sum(float(np.sum(f0 * z)) for f0, z in zip(F0, Z))
    log.debug("sdp: %s after %d iterations, gap %.3g, pres %.3g, dres %.3g", status, it, gap, pres, dres)
    slacks = [f / beta for f, beta in zip(Fx, blkscale)]
    mults = [z * beta for z, beta in zip(Z, blkscale)]
    return SdpResult(x * colscale, status, float(c @ x), dobj, gap, pres, dres, it, slacks, mults)


# ---------------------------------------------------------------------------
# Matrix-variable front end
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Variable:
    name: str
    shape: tuple
    symmetric: bool
    offset: int
    size: int

    def unpack(self, x: np.ndarray) -> np.ndarray:
        v = x[self.offset : self.offset + self.size]
        r, cdim = self.shape
        if self.symmetric:
            M = np.zeros((r, r))
            iu = np.triu_indices(r)
            M[iu] = v
            return M + np.triu(M, 1).T
        return v.reshape(r, cdim)


class LmiProblem:
    """Collects matrix variables and affine LMI constraints ``G(v) >= 0``."""

    def __init__(self):
        self.variables: list[Variable] = []
        self._n = 0
        self._constraints: list[tuple[str, Callable]] = []

    def variable(self, name: str, rows: int, cols: int | None = None, symmetric: bool = False) -> Variable:
        cols = rows if cols is None else cols
        if symmetric and rows != cols:
            raise ValueError("symmetric variables must be square")
        size = rows * (rows + 1) // 2 if symmetric else rows * cols
        v = Variable(name, (rows, cols), symmetric, self._n, size)
        self._n += size
        self.variables.append(v)
        return v

    def scalar(self, name: str) -> Variable:
        return self.variable(name, 1, 1)

    @property
    def n_decision(self) -> int:
        return self._n

    def values(self, x: np.ndarray) -> dict:
        return {v: v.unpack(x) for v in self.variables}

    def add(self, name: str, fn: Callable[[dict], np.ndarray]) -> None:
        """Constrain ``fn(values) >= 0`` (positive semidefinite)."""
        self._constraints.append((name, fn))

    def _affine(self, fn):
        x0 = np.zeros(self._n)
        base = np.atleast_2d(np.asarray(fn(self.values(x0)), dtype=float))
        coeffs = np.empty((self._n,) + base.shape)
        for i in range(self._n):
            e = np.zeros(self._n)
            e[i] = 1.0
            coeffs[i] = np.atleast_2d(np.asarray(fn(self.values(e)), dtype=float)) - base
        return base, coeffs

    def solve(self, objective: Callable[[dict], float], **kw) -> tuple[SdpResult, dict]:
        """Minimize an affine scalar objective subject to all constraints."""
        c0, cvec = self._affine(lambda v: np.array([[objective(v)]]))
        F0, F = [], []
        for _, fn in self._constraints:
            b0, bc = self._affine(fn)
            F0.append(b0)
            F.append(bc)
        used = np.zeros(self._n, dtype=bool)
        for bc in F:
            used |= np.any(bc.reshape(self._n, -1) != 0, axis=1)
        if not used.all():
            names = sorted({v.name for v in self.variables
                            if not used[v.offset : v.offset + v.size].all()})
            raise ValueError(f"variables not constrained by any LMI: {names}")
        res = solve_sdp(cvec[:, 0, 0], F0, F, **kw)
        res.primal_objective += float(c0[0, 0])
        return res, self.values(res.x)

    def constraint_names(self) -> list[str]:
        return [n for n, _ in self._constraints]
