"""Bounded-variable linear programs and a dense primal simplex solver.

Minimizes c@x subject to general rows (<=, >=, =) and box bounds on the
variables. Every structural variable needs at least one finite bound;
slack variables added internally carry the row senses. Infeasibility and
unboundedness are reported through the result status, never raised.

The solver is a two-phase primal simplex on the bounded-variable standard
form with a dense tableau: Phase 1 drives artificial variables (added for
rows the starting point violates) to zero, Phase 2 optimizes the true
objective. Entering variables follow Dantzig pricing with ties broken by
lowest index; after a run of degenerate pivots the rule switches to
Bland's to rule out cycling. All choices are index-deterministic, so a
fixed input always yields the identical result.

Re-solves may pass the basis of a previous result for the same program
extended by appended rows and/or changed bounds; the basis is repaired
with per-row artificials and phase 1 is then typically a handful of
pivots. Warm starts are an optimization only: they reach the same optimal
value as a cold solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EPS_FEAS = 1e-7
_PIVOT_TOL = 1e-9
_DUAL_TOL = 1e-9
_DEGEN_STEP = 1e-10
_BLAND_AFTER = 40

_AT_LOWER, _AT_UPPER, _BASIC = 0, 1, 2
_SENSES = ("<=", ">=", "=")


@dataclass(frozen=True)
class ConstraintRow:
    """One linear row: sum(coeff * x[idx]) sense rhs."""

    coeffs: tuple[tuple[int, float], ...]
    sense: str
    rhs: float

    def __post_init__(self):
        if self.sense not in _SENSES:
            raise ValueError(f"sense must be one of {_SENSES}, got {self.sense!r}")
        idxs = [i for i, _ in self.coeffs]
        if len(set(idxs)) != len(idxs):
            raise ValueError("duplicate variable index within a row")
        for i, a in self.coeffs:
            if i < 0 or not math.isfinite(a):
                raise ValueError(f"bad coefficient ({i}, {a})")
        if not math.isfinite(self.rhs):
            raise ValueError("rhs must be finite")

    def evaluate(self, x: np.ndarray) -> float:
        return float(sum(a * x[i] for i, a in self.coeffs))

    def satisfied(self, x: np.ndarray, tol: float = EPS_FEAS) -> bool:
        lhs = self.evaluate(x)
        if self.sense == "<=":
            return lhs <= self.rhs + tol
        if self.sense == ">=":
            return lhs >= self.rhs - tol
        return abs(lhs - self.rhs) <= tol


def row(coeffs: list[tuple[int, float]], sense: str, rhs: float) -> ConstraintRow:
    return ConstraintRow(tuple(coeffs), sense, float(rhs))


@dataclass
class LinearProgram:
    """min objective @ x  s.t.  rows,  lower <= x <= upper."""

    objective: np.ndarray
    rows: list[ConstraintRow]
    lower: np.ndarray
    upper: np.ndarray

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    def copy(self) -> "LinearProgram":
        return LinearProgram(
            self.objective.copy(), list(self.rows), self.lower.copy(), self.upper.copy()
        )


def make_program(objective, rows: list[ConstraintRow], lower, upper) -> LinearProgram:
    obj = np.asarray(objective, dtype=float)
    lo = np.asarray(lower, dtype=float)
    up = np.asarray(upper, dtype=float)
    if not (obj.shape == lo.shape == up.shape) or obj.ndim != 1:
        raise ValueError("objective and bounds must be 1-d arrays of equal length")
    if not np.all(np.isfinite(obj)):
        raise ValueError("objective coefficients must be finite")
    n = len(obj)
    for r in rows:
        for i, _ in r.coeffs:
            if i >= n:
                raise ValueError(f"row references variable {i} >= n_vars {n}")
    return LinearProgram(obj, list(rows), lo, up)


def append_rows(lp: LinearProgram, new_rows: list[ConstraintRow]) -> LinearProgram:
    """Return the program augmented with new_rows; lp itself is unchanged."""
    n = lp.n_vars
    for r in new_rows:
        for i, _ in r.coeffs:
            if not (0 <= i < n):
                raise ValueError(f"row references variable {i} outside 0..{n - 1}")
    out = lp.copy()
    out.rows.extend(new_rows)
    return out


@dataclass
class Basis:
    """Restart information: per-row basic variable and nonbasic statuses.

    ``row_vars[i]`` is the structural/slack index basic in row i, or -1
    when an artificial was basic there. ``status`` covers the structural
    and slack variables of the solve that produced the basis.
    """

    row_vars: np.ndarray
    status: np.ndarray


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    objective: float | None = None
    x: np.ndarray | None = None
    iterations: int = 0
    basis: Basis | None = None


class _Simplex:
    """Dense tableau simplex over structural + slack + artificial columns."""

    def __init__(self, lp: LinearProgram):
        n = lp.n_vars
        m = len(lp.rows)
        self.n, self.m = n, m
        A = np.zeros((m, n + m))
        b = np.zeros(m)
        lo = np.concatenate([lp.lower, np.zeros(m)])
        up = np.concatenate([lp.upper, np.zeros(m)])
        for i, r in enumerate(lp.rows):
            for j, a in r.coeffs:
                A[i, j] = a
            A[i, n + i] = 1.0
            b[i] = r.rhs
            if r.sense == "<=":
                lo[n + i], up[n + i] = 0.0, np.inf
            elif r.sense == ">=":
                lo[n + i], up[n + i] = -np.inf, 0.0
            else:
                lo[n + i], up[n + i] = 0.0, 0.0
        self.A, self.b = A, b
        self.lo_all, self.up_all = lo, up
        self.c = np.concatenate([lp.objective, np.zeros(m)])
        self.iterations = 0

    # -- starting point construction -------------------------------------

    def _nonbasic_value(self, j: int, status: int) -> float:
        return self.lo_all[j] if status == _AT_LOWER else self.up_all[j]

    def _default_status(self, j: int) -> int:
        if np.isfinite(self.lo_all[j]):
            return _AT_LOWER
        if np.isfinite(self.up_all[j]):
            return _AT_UPPER
        raise ValueError(f"variable {j} has no finite bound")

    def _cold_layout(self) -> tuple[np.ndarray, np.ndarray]:
        """All structurals at a bound, slacks basic."""
        n, m = self.n, self.m
        status = np.empty(n + m, dtype=np.int8)
        for j in range(n):
            status[j] = self._default_status(j)
        status[n:] = _BASIC
        row_vars = np.arange(n, n + m)
        return row_vars, status

    def _warm_layout(self, warm: Basis) -> tuple[np.ndarray, np.ndarray]:
        """Adopt a previous basis; rows it does not cover get their slack."""
        n, m = self.n, self.m
        m_old = len(warm.row_vars)
        if m_old > m or len(warm.status) != n + m_old:
            raise ValueError("warm basis does not match this program")
        status = np.empty(n + m, dtype=np.int8)
        status[: n + m_old] = warm.status
        status[n + m_old :] = _BASIC
        row_vars = np.concatenate(
            [warm.row_vars, np.arange(n + m_old, n + m)]
        ).astype(int)
        for i, v in enumerate(row_vars):
            if v >= 0:
                status[v] = _BASIC
        return row_vars, status

    def solve(self, warm: Basis | None = None, want_basis: bool = False) -> LpResult:
        n, m = self.n, self.m
        if np.any(self.lo_all[:n] > self.up_all[:n] + 1e-12):
            return LpResult("infeasible")

        if warm is not None:
            # dual simplex restores primal feasibility in few pivots when
            # the program changed by appended rows / tightened bounds
            try:
                result = self._dual_run(warm, want_basis)
                if result is not None:
                    return result
            except np.linalg.LinAlgError:
                pass
            try:
                return self._run(*self._warm_layout(warm), want_basis)
            except np.linalg.LinAlgError:
                pass  # singular inherited basis; fall back to cold start
        return self._run(*self._cold_layout(), want_basis)

    def _dual_run(self, warm: Basis, want_basis: bool) -> LpResult | None:
        """Warm start via dual simplex; None when this path cannot finish."""
        n, m = self.n, self.m
        m_old = len(warm.row_vars)
        if m_old > m or len(warm.status) != n + m_old:
            raise ValueError("warm basis does not match this program")
        status = np.empty(n + m, dtype=np.int8)
        status[: n + m_old] = warm.status
        status[n + m_old :] = _BASIC
        basis = np.concatenate(
            [warm.row_vars, np.arange(n + m_old, n + m)]
        ).astype(int)
        # rows that had an artificial basic get their own slack instead
        for i in np.flatnonzero(basis < 0):
            basis[i] = n + i
        if len(set(basis.tolist())) != m:
            return None  # slack already basic elsewhere; use repair path
        status[basis] = _BASIC

        values = np.zeros(n + m)
        nonbasic = status != _BASIC
        for j in np.flatnonzero(nonbasic):
            values[j] = self._nonbasic_value(j, status[j])
        if not np.all(np.isfinite(values)):
            return None

        B = self.A[:, basis]
        rhs_col = (self.b - self.A[:, nonbasic] @ values[nonbasic])[:, None]
        stacked = np.linalg.solve(B, np.concatenate([self.A, rhs_col], axis=1))
        T = stacked[:, :-1]
        x_basic = stacked[:, -1]
        st = _State(T, basis, x_basic, status, values, self.lo_all.copy(), self.up_all.copy())
        fixed = st.up - st.lo <= 1e-12

        # repair dual feasibility by flipping nonbasic variables whose
        # reduced-cost sign disagrees with their bound
        c = self.c
        d = c - c[st.basis] @ st.T
        for j in np.flatnonzero((st.status != _BASIC) & ~fixed):
            if st.status[j] == _AT_LOWER and d[j] < -_DUAL_TOL:
                if not np.isfinite(st.up[j]):
                    return None
                delta = st.up[j] - st.values[j]
                st.status[j] = _AT_UPPER
                st.values[j] = st.up[j]
                st.x_basic -= delta * st.T[:, j]
            elif st.status[j] == _AT_UPPER and d[j] > _DUAL_TOL:
                if not np.isfinite(st.lo[j]):
                    return None
                delta = st.lo[j] - st.values[j]
                st.status[j] = _AT_LOWER
                st.values[j] = st.lo[j]
                st.x_basic -= delta * st.T[:, j]

        outcome = self._dual_iterate(st, c, fixed)
        if outcome == "stalled":
            return None
        if outcome == "infeasible":
            # the certificate is tolerance-based; confirm via phase 1
            return None
        outcome = self._iterate(st, c, fixed, phase_one=False)
        if outcome == "unbounded":
            return LpResult("unbounded", iterations=self.iterations)
        if outcome == "iteration-limit":
            return None

        x = st.values.copy()
        nb = np.ones(n + m, dtype=bool)
        nb[st.basis] = False
        rhs = self.b - self.A[:, nb] @ x[nb]
        st.x_basic = np.linalg.solve(self.A[:, st.basis], rhs)
        x[st.basis] = st.x_basic
        xs = x[: self.n]
        obj = float(self.c[: self.n] @ xs)
        out_basis = None
        if want_basis:
            out_basis = Basis(st.basis.copy(), st.status[: n + m].copy())
        return LpResult("optimal", obj, xs, self.iterations, out_basis)

    def _dual_iterate(self, st: "_State", c: np.ndarray, fixed: np.ndarray) -> str:
        """Drive out-of-bound basics to their bounds, keeping dual feasibility."""
        max_iter = 20 * (self.m + st.T.shape[1]) + 2000
        d = c - c[st.basis] @ st.T
        refresh = 0
        for _ in range(max_iter):
            lo_b = st.lo[st.basis]
            up_b = st.up[st.basis]
            below = lo_b - st.x_basic
            above = st.x_basic - up_b
            viol = np.maximum(below, above)
            r = int(np.argmax(viol))
            if viol[r] <= 1e-9:
                return "feasible"
            self.iterations += 1
            refresh += 1
            if refresh >= 100:
                d = c - c[st.basis] @ st.T
                refresh = 0
            is_above = above[r] >= below[r]
            alpha = st.T[r, :]
            movable = (st.status != _BASIC) & ~fixed
            at_lo = st.status == _AT_LOWER
            at_up = st.status == _AT_UPPER
            if is_above:
                cand = movable & ((at_lo & (alpha > _PIVOT_TOL)) | (at_up & (alpha < -_PIVOT_TOL)))
            else:
                cand = movable & ((at_lo & (alpha < -_PIVOT_TOL)) | (at_up & (alpha > _PIVOT_TOL)))
            if not cand.any():
                return "infeasible"
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(cand, np.abs(d) / np.abs(alpha), np.inf)
            j = int(np.argmin(ratios))
            bound_val = up_b[r] if is_above else lo_b[r]
            step = (st.x_basic[r] - bound_val) / alpha[j]
            leave = st.basis[r]
            st.status[leave] = _AT_UPPER if is_above else _AT_LOWER
            st.values[leave] = bound_val
            enter_val = st.values[j] + step
            st.x_basic -= step * st.T[:, j]
            piv = st.T[r, j]
            st.T[r, :] /= piv
            colr = st.T[:, j].copy()
            colr[r] = 0.0
            st.T -= np.outer(colr, st.T[r, :])
            d = d - d[j] * st.T[r, :]
            st.x_basic[r] = enter_val
            st.basis[r] = j
            st.status[j] = _BASIC
        return "stalled"

    def _run(
        self, row_vars: np.ndarray, status: np.ndarray, want_basis: bool
    ) -> LpResult:
        n, m = self.n, self.m
        values = np.zeros(n + m)
        for j in range(n + m):
            if status[j] != _BASIC:
                values[j] = self._nonbasic_value(j, status[j])

        # Rows whose basic slot is free (artificial marker from a warm
        # basis) or whose basic variable lands outside its bounds get an
        # artificial column holding the residual. Evicting one basic
        # changes the values of the others, so re-solve until clean.
        basis = row_vars.copy()
        simple = bool(np.all(basis == np.arange(n, n + m)))
        for _ in range(m + 1):
            free_rows = basis < 0
            if simple:
                x_basic = self.b - self.A[:, :n] @ values[:n]
            else:
                B_cols = basis.copy()
                B_cols[free_rows] = n + np.flatnonzero(free_rows)
                nb_mask = np.ones(n + m, dtype=bool)
                nb_mask[B_cols[~free_rows]] = False
                rhs = self.b - self.A[:, nb_mask] @ values[nb_mask]
                B = self.A[:, B_cols].copy()
                for i in np.flatnonzero(free_rows):
                    # artificial placeholder column (same unit vector as
                    # the row's slack, which stays nonbasic)
                    B[:, i] = 0.0
                    B[i, i] = 1.0
                x_basic = np.linalg.solve(B, rhs)
            evicted = False
            for i in range(m):
                v = basis[i]
                if v < 0:
                    continue
                lo_v, up_v = self.lo_all[v], self.up_all[v]
                if not (lo_v - 1e-9 <= x_basic[i] <= up_v + 1e-9):
                    clamped = min(max(x_basic[i], lo_v), up_v)
                    status[v] = _AT_LOWER if clamped == lo_v else _AT_UPPER
                    values[v] = clamped
                    basis[i] = -1
                    evicted = True
            if not evicted:
                break
        else:
            raise np.linalg.LinAlgError("basis repair did not converge")

        art_rows = [i for i in range(m) if basis[i] < 0]
        n_art = len(art_rows)
        N = n + m + n_art
        A_full = np.zeros((m, N))
        A_full[:, : n + m] = self.A
        for k, i in enumerate(art_rows):
            A_full[i, n + m + k] = 1.0
            basis[i] = n + m + k
        lo = np.concatenate([self.lo_all, np.zeros(n_art)])
        up = np.concatenate([self.up_all, np.full(n_art, np.inf)])
        full_status = np.concatenate(
            [status, np.full(n_art, _BASIC, dtype=np.int8)]
        )
        full_values = np.concatenate([values, np.zeros(n_art)])

        # tableau and basic values for the final basis
        if simple and not n_art:
            T = A_full.copy()
        elif simple:
            T = A_full.copy()
            nb = np.ones(N, dtype=bool)
            nb[basis] = False
            x_basic = self.b - A_full[:, nb] @ full_values[nb]
        else:
            B = A_full[:, basis]
            nb = np.ones(N, dtype=bool)
            nb[basis] = False
            rhs_col = (self.b - A_full[:, nb] @ full_values[nb])[:, None]
            stacked = np.linalg.solve(B, np.concatenate([A_full, rhs_col], axis=1))
            T = stacked[:, :-1]
            x_basic = stacked[:, -1]
        # make artificial values non-negative by flipping their column sign
        for k, i in enumerate(art_rows):
            if x_basic[i] < 0:
                A_full[i, n + m + k] = -1.0
                T[i, :] = -T[i, :]
                x_basic[i] = -x_basic[i]

        st = _State(T, basis, x_basic, full_status, full_values, lo, up)
        fixed = st.up - st.lo <= 1e-12

        if n_art:
            c1 = np.zeros(N)
            c1[n + m :] = 1.0
            outcome = self._iterate(st, c1, fixed, phase_one=True)
            if outcome == "iteration-limit":
                raise ArithmeticError("simplex iteration limit exceeded in phase 1")
            infeas = float(c1[st.basis] @ st.x_basic)
            if infeas > EPS_FEAS:
                return LpResult("infeasible", iterations=self.iterations)
            st.lo[n + m :] = 0.0
            st.up[n + m :] = 0.0
            fixed[n + m :] = True

        c2 = np.concatenate([self.c, np.zeros(n_art)])
        outcome = self._iterate(st, c2, fixed, phase_one=False)
        if outcome == "unbounded":
            return LpResult("unbounded", iterations=self.iterations)
        if outcome == "iteration-limit":
            raise ArithmeticError("simplex iteration limit exceeded in phase 2")

        x = st.values.copy()
        if m:
            # refresh basic values against the original data to shed any
            # drift the tableau updates accumulated
            nb = np.ones(N, dtype=bool)
            nb[st.basis] = False
            rhs = self.b - A_full[:, nb] @ x[nb]
            st.x_basic = np.linalg.solve(A_full[:, st.basis], rhs)
        x[st.basis] = st.x_basic
        xs = x[: self.n]
        obj = float(self.c[: self.n] @ xs)
        out_basis = None
        if want_basis:
            row_out = st.basis.copy()
            row_out[row_out >= n + m] = -1
            out_basis = Basis(row_out, st.status[: n + m].copy())
        return LpResult("optimal", obj, xs, self.iterations, out_basis)

    def _iterate(
        self, st: "_State", c: np.ndarray, fixed: np.ndarray, phase_one: bool
    ) -> str:
        max_iter = 200 * (self.m + st.T.shape[1]) + 10000
        bland = False
        degen_streak = 0
        d = c - c[st.basis] @ st.T
        refresh = 0

        for _ in range(max_iter):
            self.iterations += 1
            refresh += 1
            if refresh >= 100:
                d = c - c[st.basis] @ st.T
                refresh = 0

            movable = (st.status != _BASIC) & ~fixed
            down_ok = movable & (st.status == _AT_UPPER) & (d > _DUAL_TOL)
            up_ok = movable & (st.status == _AT_LOWER) & (d < -_DUAL_TOL)
            eligible = down_ok | up_ok
            if not eligible.any():
                return "optimal"
            if bland:
                j = int(np.flatnonzero(eligible)[0])
            else:
                score = np.where(eligible, np.abs(d), -np.inf)
                j = int(np.argmax(score))
            direction = 1.0 if up_ok[j] else -1.0

            col = st.T[:, j]
            g = direction * col
            with np.errstate(divide="ignore", invalid="ignore"):
                lo_b = st.lo[st.basis]
                up_b = st.up[st.basis]
                ratio = np.full(self.m, np.inf)
                pos = g > _PIVOT_TOL
                ratio[pos] = (st.x_basic[pos] - lo_b[pos]) / g[pos]
                neg = g < -_PIVOT_TOL
                ratio[neg] = (st.x_basic[neg] - up_b[neg]) / g[neg]
            ratio[ratio < 0.0] = 0.0  # tiny infeasibilities from roundoff

            gap = st.up[j] - st.lo[j]
            t_block = ratio.min() if self.m else np.inf
            t = min(gap, t_block)
            if not np.isfinite(t):
                if phase_one:
                    raise ArithmeticError("phase-1 objective cannot be unbounded")
                return "unbounded"

            if t <= _DEGEN_STEP:
                degen_streak += 1
                if degen_streak > _BLAND_AFTER:
                    bland = True
            else:
                degen_streak = 0
                bland = False

            if gap <= t_block:
                # bound flip, basis unchanged
                st.x_basic -= direction * t * col
                st.status[j] = _AT_UPPER if st.status[j] == _AT_LOWER else _AT_LOWER
                st.values[j] = st.up[j] if st.status[j] == _AT_UPPER else st.lo[j]
                continue

            blockers = np.flatnonzero(ratio <= t + 1e-12)
            r = int(blockers[np.argmin(st.basis[blockers])])
            leave = st.basis[r]
            st.x_basic -= direction * t * col
            enter_val = st.values[j] + direction * t
            if g[r] > 0:
                st.status[leave] = _AT_LOWER
                st.values[leave] = st.lo[leave]
            else:
                st.status[leave] = _AT_UPPER
                st.values[leave] = st.up[leave]
            if leave >= self.n + self.m:
                # an artificial that leaves the basis never reenters
                st.lo[leave] = 0.0
                st.up[leave] = 0.0
                st.values[leave] = 0.0
                fixed[leave] = True

            piv = st.T[r, j]
            st.T[r, :] /= piv
            colr = st.T[:, j].copy()
            colr[r] = 0.0
            st.T -= np.outer(colr, st.T[r, :])
            d = d - d[j] * st.T[r, :]
            st.x_basic[r] = enter_val
            st.basis[r] = j
            st.status[j] = _BASIC
        return "iteration-limit"


@dataclass
class _State:
    T: np.ndarray
    basis: np.ndarray
    x_basic: np.ndarray
    status: np.ndarray
    values: np.ndarray
    lo: np.ndarray
    up: np.ndarray


def solve_lp(
    lp: LinearProgram, warm: Basis | None = None, want_basis: bool = False
) -> LpResult:
    """Solve the program; optimal results are feasible to EPS_FEAS.

    ``warm`` may carry the basis of a previous solve of the same program
    (possibly with rows appended at the end and/or bounds changed);
    ``want_basis`` asks for the final basis in the result for later reuse.
    """
    if np.any(np.isnan(lp.lower)) or np.any(np.isnan(lp.upper)):
        raise ValueError("bounds must not be NaN")
    result = _Simplex(lp).solve(warm, want_basis)
    if result.status == "optimal":
        _assert_feasible(lp, result.x)
    return result


def _assert_feasible(lp: LinearProgram, x: np.ndarray) -> None:
    if np.any(x < lp.lower - EPS_FEAS) or np.any(x > lp.upper + EPS_FEAS):
        raise ArithmeticError("simplex returned a point outside variable bounds")
    for r in lp.rows:
        if not r.satisfied(x, tol=EPS_FEAS):
            raise ArithmeticError("simplex returned a row-infeasible point")
