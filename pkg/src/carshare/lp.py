"""Dense LP/MIP engine: two-phase primal simplex plus branch-and-bound.

The simplex runs on a dense tableau with Bland's rule, so every solve is
deterministic and cycle-free. Solutions carry row duals, an extreme ray on
unboundedness, and a Farkas-style row certificate on infeasibility; the
decomposition driver builds its cuts from these. No big-M anywhere: phase 1
minimizes artificial variables explicitly.

Tolerances are defined once here and used everywhere:
feasibility 1e-7, reduced cost 1e-9, integrality 1e-6.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

MAX = "max"
MIN = "min"

LE = "<="
EQ = "="
GE = ">="
_ROW_SENSES = (LE, EQ, GE)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

FEAS_TOL = 1e-7  # primal feasibility, absolute
OPT_TOL = 1e-9   # reduced-cost threshold for entering columns
INT_TOL = 1e-6   # integrality tolerance

_PIVOT_TOL = 1e-9
_RATIO_TIE = 1e-12


class LpStatusError(RuntimeError):
    """A solution attribute was requested under the wrong solve status."""


@dataclass
class LpProblem:
    """Dense problem  opt c.x  s.t.  A x {<=,=,>=} b,  lower <= x <= upper.

    Default bounds are [0, +inf). ``integer`` flags variables that
    branch-and-bound must drive to integrality; ``solve_lp`` ignores them.
    """

    sense: str
    c: np.ndarray
    a: np.ndarray
    row_senses: list
    b: np.ndarray
    lower: np.ndarray = None
    upper: np.ndarray = None
    integer: np.ndarray = None

    def __post_init__(self):
        if self.sense not in (MAX, MIN):
            raise ValueError(f"sense must be {MAX!r} or {MIN!r}, got {self.sense!r}")
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        if n == 0:
            raise ValueError("problem has no variables")
        self.b = np.asarray(self.b, dtype=float).ravel()
        m = self.b.size
        self.a = np.asarray(self.a, dtype=float).reshape(m, n) if m else np.zeros((0, n))
        self.row_senses = list(self.row_senses)
        if len(self.row_senses) != m:
            raise ValueError(f"{len(self.row_senses)} row senses for {m} rows")
        for s in self.row_senses:
            if s not in _ROW_SENSES:
                raise ValueError(f"unknown row sense {s!r}")
        self.lower = (np.zeros(n) if self.lower is None
                      else np.asarray(self.lower, dtype=float).ravel())
        self.upper = (np.full(n, np.inf) if self.upper is None
                      else np.asarray(self.upper, dtype=float).ravel())
        self.integer = (np.zeros(n, dtype=bool) if self.integer is None
                        else np.asarray(self.integer, dtype=bool).ravel())
        if self.lower.size != n or self.upper.size != n or self.integer.size != n:
            raise ValueError("bounds/integrality length does not match variable count")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n_variables(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.b.size

    def copy_with_bounds(self, lower, upper) -> "LpProblem":
        return LpProblem(self.sense, self.c, self.a, self.row_senses, self.b,
                         lower, upper, self.integer)


@dataclass
class LpSolution:
    """Solve outcome. Fields are populated according to ``status``:

    optimal: x, objective, duals (one per row), dual_objective.
    unbounded: ray (a recession direction improving the objective), x
        holds the feasible point where the ray was detected.
    infeasible: farkas / farkas_upper certify infeasibility
        (sum_i farkas_i * row_i + sum_j farkas_upper_j * bound_j is a
        nonnegative combination with negative right-hand side).
    iteration_limit: best-effort fields, may be None.
    """

    status: str
    x: np.ndarray = None
    objective: float = None
    duals: np.ndarray = None
    dual_objective: float = None
    ray: np.ndarray = None
    farkas: np.ndarray = None
    farkas_upper: np.ndarray = None
    iterations: int = 0
    nodes: int = 0


def extract_duals(solution: LpSolution) -> np.ndarray:
    if solution.status != OPTIMAL:
        raise LpStatusError(f"duals require an optimal solution, status is {solution.status}")
    if solution.duals is None:
        raise LpStatusError("no duals recorded on this solution")
    return solution.duals


def extract_ray(solution: LpSolution) -> np.ndarray:
    if solution.status != UNBOUNDED:
        raise LpStatusError(f"ray requires an unbounded solution, status is {solution.status}")
    return solution.ray


# ---------------------------------------------------------------------------
# standardization: shift/flip/split variables so that every variable is >= 0,
# finite upper bounds become explicit <= rows, objective sense becomes MIN.


class _Standardized:
    __slots__ = ("a", "b", "senses", "c", "obj_const", "cols", "shift",
                 "sign", "m_orig", "n_orig", "ub_var")

    def __init__(self, problem: LpProblem):
        sign = 1.0 if problem.sense == MIN else -1.0
        n = problem.n_variables
        m = problem.n_rows
        cols = []          # (original var, coefficient): x_j = shift_j + sum coef*z
        shift = np.zeros(n)
        ub_rows = []       # (std column, rhs)
        ub_var = []        # original var behind each ub row
        for j in range(n):
            lo, hi = problem.lower[j], problem.upper[j]
            if np.isfinite(lo):
                shift[j] = lo
                cols.append((j, 1.0))
                if np.isfinite(hi):
                    ub_rows.append((len(cols) - 1, hi - lo))
                    ub_var.append(j)
            elif np.isfinite(hi):
                shift[j] = hi
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        k = len(cols)
        a = np.zeros((m + len(ub_rows), k))
        for idx, (j, coef) in enumerate(cols):
            if m:
                a[:m, idx] = coef * problem.a[:, j]
        b = np.empty(m + len(ub_rows))
        b[:m] = problem.b - (problem.a @ shift if m else 0.0)
        for r, (cidx, rhs) in enumerate(ub_rows):
            a[m + r, cidx] = 1.0
            b[m + r] = rhs
        self.a = a
        self.b = b
        self.senses = list(problem.row_senses) + [LE] * len(ub_rows)
        c = np.zeros(k)
        for idx, (j, coef) in enumerate(cols):
            c[idx] = sign * coef * problem.c[j]
        self.c = c
        self.obj_const = sign * float(problem.c @ shift)
        self.cols = cols
        self.shift = shift
        self.sign = sign
        self.m_orig = m
        self.n_orig = n
        self.ub_var = ub_var

    def x_from_std(self, z: np.ndarray) -> np.ndarray:
        x = self.shift.copy()
        for idx, (j, coef) in enumerate(self.cols):
            x[j] += coef * z[idx]
        return x

    def direction_from_std(self, d: np.ndarray) -> np.ndarray:
        r = np.zeros(self.n_orig)
        for idx, (j, coef) in enumerate(self.cols):
            r[j] += coef * d[idx]
        return r


# ---------------------------------------------------------------------------
# simplex core on  min c.z  s.t.  A z {<=,=,>=} b,  z >= 0


class _CoreResult:
    __slots__ = ("status", "z", "y", "ray", "farkas", "iterations", "obj")

    def __init__(self, status, z=None, y=None, ray=None, farkas=None,
                 iterations=0, obj=None):
        self.status = status
        self.z = z
        self.y = y              # duals per input row (zeros for redundant rows)
        self.ray = ray
        self.farkas = farkas    # certificate per input row
        self.iterations = iterations
        self.obj = obj


def _pivot(tab, basis, row, col, n_rows):
    piv = tab[row, col]
    tab[row] /= piv
    colvals = tab[:, col].copy()
    colvals[row] = 0.0
    tab -= np.outer(colvals, tab[row])
    tab[:, col] = 0.0
    tab[row, col] = 1.0
    basis[row] = col
    rhs = tab[:n_rows, -1]
    rhs[(rhs < 0.0) & (rhs > -FEAS_TOL)] = 0.0


def _bland_step(tab, basis, cost_row, allowed, n_rows):
    """One Bland-rule pivot. Returns ('optimal'|'unbounded'|'pivoted', col)."""
    reduced = tab[cost_row, :-1]
    cand = np.where(allowed & (reduced < -OPT_TOL))[0]
    if cand.size == 0:
        return "optimal", -1
    col = int(cand[0])
    colvals = tab[:n_rows, col]
    pos = colvals > _PIVOT_TOL
    if not pos.any():
        return "unbounded", col
    ratios = np.full(n_rows, np.inf)
    ratios[pos] = tab[:n_rows, -1][pos] / colvals[pos]
    rmin = ratios.min()
    ties = np.where(ratios <= rmin + _RATIO_TIE * (1.0 + abs(rmin)))[0]
    row = int(ties[np.argmin(basis[ties])])
    _pivot(tab, basis, row, col, n_rows)
    return "pivoted", col


def _solve_core(a, b, senses, c, max_iter) -> _CoreResult:
    m, k = a.shape
    n_le = sum(1 for s in senses if s == LE)
    n_ge = sum(1 for s in senses if s == GE)
    n_slack = n_le + n_ge
    a1 = np.zeros((m, k + n_slack))
    a1[:, :k] = a
    slack_of_row = np.full(m, -1, dtype=int)
    pos = k
    for i, s in enumerate(senses):
        if s == LE:
            a1[i, pos] = 1.0
            slack_of_row[i] = pos
            pos += 1
        elif s == GE:
            a1[i, pos] = -1.0
            slack_of_row[i] = pos
            pos += 1
    b1 = np.asarray(b, dtype=float).copy()
    flip = np.ones(m)
    neg = b1 < 0
    if neg.any():
        a1[neg] *= -1.0
        b1[neg] *= -1.0
        flip[neg] = -1.0

    basis = np.full(m, -1, dtype=int)
    art_rows = []
    for i in range(m):
        sc = slack_of_row[i]
        if sc >= 0 and a1[i, sc] > 0.5:
            basis[i] = sc
        else:
            art_rows.append(i)
    n_art = len(art_rows)
    ncols = k + n_slack + n_art
    a_eq = np.zeros((m, ncols))
    a_eq[:, :k + n_slack] = a1
    for t, i in enumerate(art_rows):
        a_eq[i, k + n_slack + t] = 1.0
        basis[i] = k + n_slack + t

    # tableau: m constraint rows, then phase-2 cost row, then phase-1 cost row
    tab = np.zeros((m + 2, ncols + 1))
    tab[:m, :ncols] = a_eq
    tab[:m, -1] = b1
    tab[m, :k] = c
    if n_art:
        tab[m + 1, k + n_slack:ncols] = 1.0
        for i in art_rows:
            tab[m + 1] -= tab[i]

    allowed = np.zeros(ncols, dtype=bool)
    allowed[:k + n_slack] = True
    iters = 0
    row_ids = np.arange(m)  # original row behind each kept tableau row

    if n_art:
        while iters < max_iter:
            step, _ = _bland_step(tab, basis, m + 1, allowed, m)
            if step != "pivoted":
                break
            iters += 1
        else:
            return _CoreResult(ITERATION_LIMIT, iterations=iters)
        phase1 = -tab[m + 1, -1]
        if phase1 > FEAS_TOL:
            # infeasible: phase-1 duals give the certificate
            c1 = np.zeros(ncols)
            c1[k + n_slack:] = 1.0
            basis_mat = a_eq[:, basis]
            try:
                y1 = np.linalg.solve(basis_mat.T, c1[basis])
            except np.linalg.LinAlgError:
                y1 = np.linalg.lstsq(basis_mat.T, c1[basis], rcond=None)[0]
            farkas = -(flip * y1)
            return _CoreResult(INFEASIBLE, farkas=farkas, iterations=iters)
        # drive artificial variables out of the basis; drop redundant rows
        drop = []
        for i in range(m):
            if basis[i] >= k + n_slack:
                nz = np.where(np.abs(tab[i, :k + n_slack]) > _PIVOT_TOL)[0]
                if nz.size:
                    _pivot(tab, basis, i, int(nz[0]), m)
                else:
                    drop.append(i)
        if drop:
            keep = np.setdiff1d(np.arange(m), drop)
            tab = np.vstack([tab[keep], tab[m:]])
            basis = basis[keep]
            a_eq = a_eq[keep]
            b1 = b1[keep]
            flip = flip[keep]
            row_ids = row_ids[keep]
            m = keep.size

    status = None
    ray_col = -1
    while True:
        if iters >= max_iter:
            status = ITERATION_LIMIT
            break
        step, col = _bland_step(tab, basis, m, allowed, m)
        if step == "optimal":
            status = OPTIMAL
            break
        if step == "unbounded":
            status = UNBOUNDED
            ray_col = col
            break
        iters += 1

    if status == ITERATION_LIMIT:
        return _CoreResult(ITERATION_LIMIT, iterations=iters)

    z = np.zeros(ncols)
    z[basis] = tab[:m, -1]
    z = z[:k + n_slack]
    zs = z[:k]

    if status == UNBOUNDED:
        d = np.zeros(ncols)
        d[ray_col] = 1.0
        d[basis] = -tab[:m, ray_col]
        d[np.abs(d) < 1e-11] = 0.0
        return _CoreResult(UNBOUNDED, z=zs, ray=d[:k], iterations=iters)

    # duals from the final basis: solve B^T y = c_B, map flips back
    y_full = np.zeros(len(senses))
    if m:
        c2 = np.zeros(ncols)
        c2[:k] = c
        basis_mat = a_eq[:, basis]
        try:
            y = np.linalg.solve(basis_mat.T, c2[basis])
        except np.linalg.LinAlgError:
            y = np.linalg.lstsq(basis_mat.T, c2[basis], rcond=None)[0]
        y_full[row_ids] = flip * y
    obj = float(c @ zs)
    return _CoreResult(OPTIMAL, z=zs, y=y_full, iterations=iters, obj=obj)


def solve_lp(problem: LpProblem, max_iter: int = None) -> LpSolution:
    """Two-phase primal simplex. Integrality flags are ignored.

    Deterministic: Bland's rule selects entering/leaving variables, so the
    pivot sequence is a function of the problem data alone.
    """
    std = _Standardized(problem)
    m_std, k_std = std.a.shape
    if max_iter is None:
        max_iter = 50 * (m_std + k_std + 2)
    core = _solve_core(std.a, std.b, std.senses, std.c, max_iter)

    if core.status == ITERATION_LIMIT:
        return LpSolution(ITERATION_LIMIT, iterations=core.iterations)

    if core.status == INFEASIBLE:
        cert = core.farkas
        farkas = cert[:std.m_orig].copy()
        farkas_upper = np.zeros(std.n_orig)
        for r, j in enumerate(std.ub_var):
            farkas_upper[j] = cert[std.m_orig + r]
        return LpSolution(INFEASIBLE, farkas=farkas, farkas_upper=farkas_upper,
                          iterations=core.iterations)

    x = std.x_from_std(core.z)
    finite_lo = np.isfinite(problem.lower)
    x[finite_lo] = np.maximum(x[finite_lo], problem.lower[finite_lo])
    finite_hi = np.isfinite(problem.upper)
    x[finite_hi] = np.minimum(x[finite_hi], problem.upper[finite_hi])

    if core.status == UNBOUNDED:
        ray = std.direction_from_std(core.ray)
        obj = np.inf if problem.sense == MAX else -np.inf
        return LpSolution(UNBOUNDED, x=x, objective=obj, ray=ray,
                          iterations=core.iterations)

    objective = float(problem.c @ x)
    duals = std.sign * core.y[:std.m_orig]
    dual_objective = std.sign * (float(core.y @ std.b) + std.obj_const)
    return LpSolution(OPTIMAL, x=x, objective=objective, duals=duals,
                      dual_objective=dual_objective, iterations=core.iterations)


# ---------------------------------------------------------------------------
# branch and bound


def solve_mip(problem: LpProblem, node_limit: int = 1_000_000,
              abs_gap: float = INT_TOL, max_iter: int = None) -> LpSolution:
    """Best-first branch-and-bound over LP relaxations.

    Branches on the most fractional integer variable, exploring the floor
    branch first; returns the optimal integer solution within ``abs_gap``.
    Hitting ``node_limit`` yields an iteration_limit status carrying the
    incumbent, if one exists.
    """
    int_idx = np.where(problem.integer)[0]
    if int_idx.size == 0:
        return solve_lp(problem, max_iter=max_iter)

    maximize = problem.sense == MAX

    def prio(obj):
        return -obj if maximize else obj

    root = solve_lp(problem, max_iter=max_iter)
    nodes = 1
    if root.status != OPTIMAL:
        root.nodes = nodes
        return root

    heap = []
    counter = 0
    heapq.heappush(heap, (prio(root.objective), counter,
                          root, problem.lower, problem.upper))
    inc_x = None
    inc_obj = -np.inf if maximize else np.inf
    limit_hit = False

    def is_better(candidate, reference):
        return candidate > reference if maximize else candidate < reference

    while heap:
        _, _, sol, lo, hi = heapq.heappop(heap)
        bound = sol.objective
        if inc_x is not None:
            if maximize and bound <= inc_obj + abs_gap:
                break
            if not maximize and bound >= inc_obj - abs_gap:
                break
        vals = sol.x[int_idx]
        dist = np.abs(vals - np.round(vals))
        if np.all(dist <= INT_TOL):
            xx = sol.x.copy()
            xx[int_idx] = np.round(xx[int_idx])
            obj = float(problem.c @ xx)
            if inc_x is None or is_better(obj, inc_obj):
                inc_x, inc_obj = xx, obj
            continue
        j = int(int_idx[np.argmax(np.minimum(dist, 1.0 - dist))])
        v = sol.x[j]
        children = ((j, None, np.floor(v)), (j, np.ceil(v), None))
        for var, new_lo, new_hi in children:
            if nodes >= node_limit:
                limit_hit = True
                break
            clo = lo.copy()
            chi = hi.copy()
            if new_lo is not None:
                clo[var] = max(clo[var], new_lo)
            if new_hi is not None:
                chi[var] = min(chi[var], new_hi)
            if clo[var] > chi[var]:
                continue
            csol = solve_lp(problem.copy_with_bounds(clo, chi), max_iter=max_iter)
            nodes += 1
            if csol.status == ITERATION_LIMIT:
                limit_hit = True
                break
            if csol.status != OPTIMAL:
                continue
            if inc_x is not None and not is_better(csol.objective,
                                                   inc_obj + (abs_gap if maximize else -abs_gap)):
                continue
            counter += 1
            heapq.heappush(heap, (prio(csol.objective), counter, csol, clo, chi))
        if limit_hit:
            break

    if limit_hit:
        return LpSolution(ITERATION_LIMIT, x=inc_x,
                          objective=inc_obj if inc_x is not None else None,
                          nodes=nodes)
    if inc_x is None:
        return LpSolution(INFEASIBLE, nodes=nodes)
    return LpSolution(OPTIMAL, x=inc_x, objective=inc_obj, nodes=nodes)


# ---------------------------------------------------------------------------
# debugging aid


def dump_lp(problem: LpProblem) -> str:
    """Human-readable text form of a problem, one constraint per line."""

    def term(coef, name, first):
        if coef == 0:
            return ""
        sign = "-" if coef < 0 else ("" if first else "+")
        mag = abs(coef)
        body = name if mag == 1 else f"{mag:g} {name}"
        return f"{sign} {body} " if not first else f"{sign}{body} "

    names = [f"x{j}" for j in range(problem.n_variables)]
    out = [problem.sense + " " + "".join(
        term(problem.c[j], names[j], j == int(np.nonzero(problem.c)[0][0]) if problem.c.any() else j == 0)
        for j in range(problem.n_variables)).strip()]
    out.append("s.t.")
    for i in range(problem.n_rows):
        row = problem.a[i]
        nz = np.nonzero(row)[0]
        lhs = "".join(term(row[j], names[j], j == (nz[0] if nz.size else 0))
                      for j in nz).strip() or "0"
        out.append(f"  r{i}: {lhs} {problem.row_senses[i]} {problem.b[i]:g}")
    bounds = []
    for j in range(problem.n_variables):
        lo, hi = problem.lower[j], problem.upper[j]
        tag = " integer" if problem.integer[j] else ""
        if lo == 0 and np.isposinf(hi) and not tag:
            continue
        lo_s = "-inf" if np.isneginf(lo) else f"{lo:g}"
        hi_s = "+inf" if np.isposinf(hi) else f"{hi:g}"
        bounds.append(f"  {lo_s} <= {names[j]} <= {hi_s}{tag}")
    if bounds:
        out.append("bounds:")
        out.extend(bounds)
    return "\n".join(out)
