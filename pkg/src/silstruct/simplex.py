"""A self-contained bounded-variable linear program solver.

Solves  minimize c.x  subject to  A x <= b,  lower <= x <= upper  by a
two-phase revised simplex method.  Slack variables are kept implicit
(their columns are unit vectors), the basis inverse is explicit and
updated in product form with periodic refactorization, and pricing is
Dantzig's rule with a Bland's-rule fallback that engages after a run of
degenerate pivots, which prevents cycling.  Pivot ties break toward the
lowest variable index, so a given program always solves the same way.

Lower bounds must be finite; upper bounds may be +inf.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SilstructError

OPTIMAL = "optimal"
ITERATION_LIMIT = "iteration_limit"
INFEASIBLE = "infeasible"

_PIVOT_EPS = 1e-10
_DEGENERATE_STEP = 1e-11
_DEGENERATE_RUN = 30
_REFACTOR_EVERY = 100


class UnboundedProblemError(SilstructError, ArithmeticError):
    """The objective decreases without bound over the feasible set."""


@dataclass(eq=False)
class LinearProgram:
    """Data for  minimize c.x  s.t.  a_ub x <= b_ub,  lower <= x <= upper.

    ``n_primary`` marks how many leading variables form the solution's
    ``alpha`` block (all of them when omitted).  ``basis_hint`` may name
    a starting basis as column indices, structural variables first and
    row slacks numbered from ``n``; an infeasible or singular hint is
    ignored.
    """

    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_primary: int | None = None
    basis_hint: tuple[int, ...] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.a_ub = np.asarray(self.a_ub, dtype=float)
        self.b_ub = np.asarray(self.b_ub, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.c.ndim != 1 or self.c.size < 1:
            raise ValueError("c must be a non-empty vector")
        n = self.c.size
        if self.a_ub.ndim != 2 or self.a_ub.shape[1] != n:
            raise ValueError(f"a_ub must be (m, {n})")
        m = self.a_ub.shape[0]
        if self.b_ub.shape != (m,):
            raise ValueError(f"b_ub must have length {m}")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError(f"bounds must have length {n}")
        if not (
            np.all(np.isfinite(self.c))
            and np.all(np.isfinite(self.a_ub))
            and np.all(np.isfinite(self.b_ub))
        ):
            raise ValueError("c, a_ub and b_ub must be finite")
        if not np.all(np.isfinite(self.lower)):
            raise ValueError("lower bounds must be finite")
        if np.any(np.isnan(self.upper)):
            raise ValueError("upper bounds must not be NaN")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if self.n_primary is None:
            self.n_primary = n
        if not 0 <= self.n_primary <= n:
            raise ValueError(f"n_primary must be in 0..{n}")

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.a_ub.shape[0]


@dataclass(eq=False)
class LpSolution:
    """A solve result.

    ``alpha`` is the leading ``n_primary`` variables clamped to their
    bounds; ``x`` is the full structural vector.  ``objective`` is NaN
    when the program is infeasible.
    """

    alpha: np.ndarray
    objective: float
    status: str
    x: np.ndarray
    iterations: int


def _fmt(v: float) -> str:
    if np.isposinf(v):
        return "inf"
    if np.isneginf(v):
        return "-inf"
    return repr(float(v))


def dump_lp(lp: LinearProgram) -> str:
    """Serialize a program as readable text (debugging aid, not an API)."""
    lines = ["LP 1", "MIN " + " ".join(_fmt(v) for v in lp.c)]
    for row, rhs in zip(lp.a_ub, lp.b_ub):
        lines.append("ROW " + " ".join(_fmt(v) for v in row) + " <= " + _fmt(rhs))
    for lo, up in zip(lp.lower, lp.upper):
        lines.append(f"BND {_fmt(lo)} {_fmt(up)}")
    return "\n".join(lines) + "\n"


class _Simplex:
    """Working state for one solve: columns are structural variables,
    then one implicit slack per row, then any phase-1 artificials."""

    def __init__(self, lp: LinearProgram, tol: float):
        self.A = lp.a_ub
        self.b = lp.b_ub
        self.m = lp.n_rows
        self.n = lp.n_vars
        self.tol = tol
        self.opt_tol = max(10.0 * tol, 1e-7)
        n_total = self.n + self.m
        self.lo = np.concatenate([lp.lower, np.zeros(self.m)])
        self.up = np.concatenate([lp.upper, np.full(self.m, np.inf)])
        self.art_rows: list[int] = []
        self.art_signs: list[float] = []
        self.x = self.lo.copy()
        self.at_upper = np.zeros(n_total, dtype=bool)
        self.in_basis = np.zeros(n_total, dtype=bool)
        self.basis = np.empty(0, dtype=np.int64)
        self.B_inv = np.empty((self.m, self.m))
        self.x_B = np.empty(self.m)
        self.iterations = 0
        self.pivots_since_refactor = 0
        self.degenerate_run = 0
        self.bland = False

    # -- column helpers ------------------------------------------------

    @property
    def n_total(self) -> int:
        return self.n + self.m + len(self.art_rows)

    def column(self, j: int) -> np.ndarray:
        if j < self.n:
            return self.A[:, j]
        col = np.zeros(self.m)
        if j < self.n + self.m:
            col[j - self.n] = 1.0
        else:
            a = j - self.n - self.m
            col[self.art_rows[a]] = self.art_signs[a]
        return col

    def refactor(self) -> None:
        basis_matrix = np.empty((self.m, self.m))
        for p, j in enumerate(self.basis):
            basis_matrix[:, p] = self.column(int(j))
        try:
            self.B_inv = np.linalg.inv(basis_matrix)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("basis became singular") from exc
        self.recompute_basics()
        self.pivots_since_refactor = 0

    def recompute_basics(self) -> None:
        x_struct = np.where(self.in_basis[: self.n], 0.0, self.x[: self.n])
        b_eff = self.b - self.A @ x_struct
        nb_slack = ~self.in_basis[self.n : self.n + self.m]
        b_eff -= np.where(nb_slack, self.x[self.n : self.n + self.m], 0.0)
        for a, j in enumerate(range(self.n + self.m, self.n_total)):
            if not self.in_basis[j] and self.x[j] != 0.0:
                b_eff[self.art_rows[a]] -= self.art_signs[a] * self.x[j]
        self.x_B = self.B_inv @ b_eff
        self.x[self.basis] = self.x_B

    def install_basis(self, basis) -> None:
        self.basis = np.asarray(basis, dtype=np.int64)
        self.in_basis[:] = False
        self.in_basis[self.basis] = True
        self.refactor()

    # -- pricing -------------------------------------------------------

    def reduced_costs(self, c: np.ndarray) -> np.ndarray:
        y = self.B_inv.T @ c[self.basis]
        d = np.empty(self.n_total)
        d[: self.n] = c[: self.n] - self.A.T @ y
        d[self.n : self.n + self.m] = c[self.n : self.n + self.m] - y
        for a, j in enumerate(range(self.n + self.m, self.n_total)):
            d[j] = c[j] - self.art_signs[a] * y[self.art_rows[a]]
        return d

    def pick_entering(self, d: np.ndarray) -> int:
        violation = np.where(self.at_upper, d, -d)
        fixed = self.lo == self.up
        eligible = (~self.in_basis) & (~fixed) & (violation > self.opt_tol)
        if not np.any(eligible):
            return -1
        if self.bland:
            return int(np.flatnonzero(eligible)[0])
        masked = np.where(eligible, violation, -np.inf)
        return int(np.argmax(masked))

    # -- pivoting ------------------------------------------------------

    def step(self, q: int) -> None:
        """Move variable q off its bound; flip it or swap it into the basis."""
        eta = -1.0 if self.at_upper[q] else 1.0
        w = self.B_inv @ self.column(q)
        ew = eta * w
        ratios = np.full(self.m, np.inf)
        lo_b = self.lo[self.basis]
        up_b = self.up[self.basis]
        pos = ew > _PIVOT_EPS
        if np.any(pos):
            ratios[pos] = np.maximum(self.x_B[pos] - lo_b[pos], 0.0) / ew[pos]
        neg = ew < -_PIVOT_EPS
        if np.any(neg):
            gaps = up_b[neg] - self.x_B[neg]
            ratios[neg] = np.where(
                np.isfinite(gaps), np.maximum(gaps, 0.0) / -ew[neg], np.inf
            )
        delta_flip = self.up[q] - self.lo[q]
        min_row = float(ratios.min()) if self.m else np.inf
        delta = min(min_row, delta_flip)
        if not np.isfinite(delta):
            raise UnboundedProblemError("objective is unbounded below")
        if delta_flip <= min_row:
            self.at_upper[q] = not self.at_upper[q]
            self.x[q] = self.up[q] if self.at_upper[q] else self.lo[q]
            self.x_B -= ew * delta_flip
            self.x[self.basis] = self.x_B
            self._note_step(delta_flip)
            return
        candidates = np.flatnonzero(ratios <= delta + 1e-9 * (1.0 + abs(delta)))
        order = np.lexsort((self.basis[candidates], -np.abs(w[candidates])))
        r = int(candidates[order[0]])
        if abs(w[r]) < _PIVOT_EPS:
            raise RuntimeError("pivot element vanished")
        leaving = int(self.basis[r])
        hits_upper = ew[r] < 0
        self.at_upper[leaving] = hits_upper
        self.x[leaving] = up_b[r] if hits_upper else lo_b[r]
        self.in_basis[leaving] = False
        entering_value = self.x[q] + eta * delta
        self.x_B -= ew * delta
        self.x_B[r] = entering_value
        self.basis[r] = q
        self.in_basis[q] = True
        self.x[self.basis] = self.x_B
        brow = self.B_inv[r] / w[r]
        self.B_inv -= np.outer(w, brow)
        self.B_inv[r] = brow
        self.pivots_since_refactor += 1
        if self.pivots_since_refactor >= _REFACTOR_EVERY:
            self.refactor()
        self._note_step(delta)

    def _note_step(self, delta: float) -> None:
        if delta <= _DEGENERATE_STEP:
            self.degenerate_run += 1
            if self.degenerate_run > _DEGENERATE_RUN:
                self.bland = True
        else:
            self.degenerate_run = 0
            self.bland = False

    def minimize(self, c: np.ndarray, max_iters: int) -> str:
        """Run simplex iterations for cost vector ``c``."""
        while True:
            d = self.reduced_costs(c)
            q = self.pick_entering(d)
            if q < 0:
                if self.pivots_since_refactor > 0:
                    # Confirm optimality against a fresh inverse.
                    self.refactor()
                    continue
                return OPTIMAL
            if self.iterations >= max_iters:
                return ITERATION_LIMIT
            self.iterations += 1
            self.step(q)


def solve_lp(lp: LinearProgram, max_iters: int = 50000, tol: float = 1e-8) -> LpSolution:
    """Solve a bounded-variable linear program.

    Feasibility is held to ``tol``; optimality (reduced costs) to
    ``max(10 * tol, 1e-7)``.  The returned status is ``optimal``,
    ``iteration_limit`` (best point found so far), or ``infeasible``.
    """
    state = _Simplex(lp, tol)
    n, m = state.n, state.m

    started = False
    if lp.basis_hint is not None and m > 0:
        hint = np.asarray(lp.basis_hint, dtype=np.int64)
        if (
            hint.shape == (m,)
            and np.unique(hint).size == m
            and np.all((hint >= 0) & (hint < n + m))
        ):
            try:
                state.install_basis(hint)
            except RuntimeError:
                state = _Simplex(lp, tol)
            else:
                lo_b = state.lo[state.basis]
                up_b = state.up[state.basis]
                slack = max(1.0, float(np.abs(state.b).max(initial=0.0)))
                if np.all(state.x_B >= lo_b - 1e-7 * slack) and np.all(
                    state.x_B <= up_b + 1e-7 * slack
                ):
                    started = True
                else:
                    state = _Simplex(lp, tol)

    if not started and m > 0:
        state.install_basis(np.arange(n, n + m))
        violated = state.x_B < -state.tol
        if np.any(violated):
            art_cols = []
            for row in np.flatnonzero(violated):
                state.art_rows.append(int(row))
                state.art_signs.append(-1.0)
                art_cols.append((int(row), state.n + state.m + len(art_cols)))
            grow = len(state.art_rows)
            state.lo = np.concatenate([state.lo, np.zeros(grow)])
            state.up = np.concatenate([state.up, np.full(grow, np.inf)])
            state.x = np.concatenate([state.x, np.zeros(grow)])
            state.at_upper = np.concatenate([state.at_upper, np.zeros(grow, dtype=bool)])
            state.in_basis = np.concatenate([state.in_basis, np.zeros(grow, dtype=bool)])
            for row, j in art_cols:
                pos = row  # slack basis puts row i at position i
                displaced = int(state.basis[pos])
                state.in_basis[displaced] = False
                state.x[displaced] = state.lo[displaced]
                state.basis[pos] = j
                state.in_basis[j] = True
            state.refactor()
            phase1_cost = np.zeros(state.n_total)
            phase1_cost[state.n + state.m :] = 1.0
            status = state.minimize(phase1_cost, max_iters)
            infeasibility = float(phase1_cost @ state.x)
            scale = 1.0 + float(np.abs(lp.b_ub).max(initial=0.0))
            if status == OPTIMAL and infeasibility > 1e-7 * scale:
                return _assemble(lp, state, INFEASIBLE)
            if status == ITERATION_LIMIT:
                return _assemble(lp, state, ITERATION_LIMIT)
            _expel_artificials(state)

    if m == 0:
        # Only bound constraints: each variable sits at whichever finite
        # bound its cost prefers.
        x = np.where(lp.c > 0, lp.lower, np.where(lp.c < 0, lp.upper, lp.lower))
        if np.any(~np.isfinite(x)):
            raise UnboundedProblemError("objective is unbounded below")
        state.x[: n] = x
        return _assemble(lp, state, OPTIMAL)

    cost = np.zeros(state.n_total)
    cost[:n] = lp.c
    status = state.minimize(cost, max_iters)
    return _assemble(lp, state, status)


def _expel_artificials(state: _Simplex) -> None:
    """Pivot leftover artificials out of the basis (or pin them at zero)."""
    first_art = state.n + state.m
    for pos in range(state.m):
        j = int(state.basis[pos])
        if j < first_art:
            continue
        row = state.B_inv[pos]
        coeffs = row @ state.A
        replacement = -1
        for cand in range(state.n + state.m):
            if state.in_basis[cand] or state.lo[cand] == state.up[cand]:
                continue
            coef = coeffs[cand] if cand < state.n else row[cand - state.n]
            if abs(coef) > 1e-7:
                replacement = cand
                break
        if replacement < 0:
            continue  # redundant row; the artificial stays basic at zero
        w = state.B_inv @ state.column(replacement)
        state.in_basis[j] = False
        state.x[j] = 0.0
        state.at_upper[j] = False
        state.basis[pos] = replacement
        state.in_basis[replacement] = True
        brow = state.B_inv[pos] / w[pos]
        state.B_inv -= np.outer(w, brow)
        state.B_inv[pos] = brow
        state.x_B = state.x[state.basis]
    # Artificials must never re-enter.
    state.lo[first_art:] = 0.0
    state.up[first_art:] = 0.0
    state.refactor()


def _assemble(lp: LinearProgram, state: _Simplex, status: str) -> LpSolution:
    x = state.x[: state.n].copy()
    drift = max(
        float((lp.lower - x).max(initial=0.0)), float((x - lp.upper).max(initial=0.0))
    )
    if status == OPTIMAL and drift > 1e-6:
        raise RuntimeError(f"solution violates bounds by {drift:.3e}")
    x = np.clip(x, lp.lower, lp.upper)
    objective = float(lp.c @ x) if status != INFEASIBLE else float("nan")
    alpha = x[: lp.n_primary].copy()
    return LpSolution(
        alpha=alpha,
        objective=objective,
        status=status,
        x=x,
        iterations=state.iterations,
    )
