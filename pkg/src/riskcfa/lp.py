"""Small linear-programming layer.

Models are built incrementally with :class:`LpModel` and solved by
:func:`solve`.  The default backend is a dense two-phase primal simplex
written here; ``backend="highs"`` routes the same model through
``scipy.optimize.linprog`` for larger experiment runs.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

FEAS_TOL = 1e-6
PIVOT_TOL = 1e-9
COST_TOL = 1e-9
BOUND_TOL = 1e-7

# consecutive degenerate pivots before pricing switches to Bland's rule
DEGENERATE_STREAK = 20


class LpValidationError(ValueError):
    """Raised for malformed models (bad index, NaN data, crossed bounds)."""


class Sense(str, enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class Variable:
    lb: float
    ub: float
    name: str


@dataclass(frozen=True)
class Constraint:
    coeffs: Mapping[int, float]
    sense: Sense
    rhs: float
    name: str = ""


@dataclass(frozen=True)
class LpSolution:
    status: Status
    objective: float
    primal: Optional[np.ndarray]
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class LpModel:
    """Minimisation LP over bounded continuous variables.

    Constraint coefficients are stored sparsely as ``{var_index: coeff}``.
    """

    def __init__(self, name: str = "lp"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def add_variable(self, lb: float = 0.0, ub: float = math.inf, name: str = "") -> int:
        self.variables.append(Variable(float(lb), float(ub), name or f"x{len(self.variables)}"))
        return len(self.variables) - 1

    def add_constraint(self, coeffs: Mapping[int, float], sense, rhs: float, name: str = "") -> int:
        self.constraints.append(Constraint(dict(coeffs), Sense(sense), float(rhs), name))
        return len(self.constraints) - 1

    def add_objective(self, coeffs: Mapping[int, float]) -> None:
        for j, c in coeffs.items():
            self.objective[j] = self.objective.get(j, 0.0) + c

    def set_objective(self, coeffs: Mapping[int, float]) -> None:
        self.objective = dict(coeffs)

    def validate(self) -> None:
        """Raise :class:`LpValidationError` on malformed data."""
        self._arrays()

    def _arrays(self):
        n, m = self.n_vars, len(self.constraints)
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        if np.isnan(lb).any() or np.isnan(ub).any():
            j = int(np.flatnonzero(np.isnan(lb) | np.isnan(ub))[0])
            raise LpValidationError(f"variable {self.variables[j].name!r} has a NaN bound")
        bad = (lb > ub) | (lb == math.inf) | (ub == -math.inf)
        if bad.any():
            v = self.variables[int(np.flatnonzero(bad)[0])]
            raise LpValidationError(f"variable {v.name!r} has an empty domain [{v.lb}, {v.ub}]")
        rows, cols, vals = [], [], []
        b = np.empty(m)
        senses = []
        for i, con in enumerate(self.constraints):
            rows.extend([i] * len(con.coeffs))
            cols.extend(con.coeffs.keys())
            vals.extend(con.coeffs.values())
            b[i] = con.rhs
            senses.append(con.sense)
        if cols and not all(isinstance(j, (int, np.integer)) for j in cols):
            k = next(k for k, j in enumerate(cols) if not isinstance(j, (int, np.integer)))
            raise LpValidationError(f"{self._row_label(rows[k])}: coefficient index {cols[k]!r} is not an integer")
        cols_a = np.array(cols, dtype=np.int64)
        rows_a = np.array(rows, dtype=np.int64)
        vals_a = np.array(vals, dtype=float)
        out = (cols_a < 0) | (cols_a >= n)
        if out.any():
            k = int(np.flatnonzero(out)[0])
            raise LpValidationError(f"{self._row_label(rows[k])}: coefficient index {cols[k]} out of range (n={n})")
        if not np.isfinite(vals_a).all():
            k = int(np.flatnonzero(~np.isfinite(vals_a))[0])
            raise LpValidationError(f"{self._row_label(rows[k])}: non-finite coefficient {vals[k]} on variable {cols[k]}")
        if not np.isfinite(b).all():
            i = int(np.flatnonzero(~np.isfinite(b))[0])
            raise LpValidationError(f"{self._row_label(i)}: non-finite right-hand side {b[i]}")
        c = np.zeros(n)
        for j, v in self.objective.items():
            if not (isinstance(j, (int, np.integer)) and 0 <= j < n):
                raise LpValidationError(f"objective index {j!r} out of range (n={n})")
            if not math.isfinite(v):
                raise LpValidationError(f"objective coefficient on variable {j} is not finite")
            c[j] += v
        return c, (rows_a, cols_a, vals_a), senses, b, lb, ub

    def _row_label(self, i: int) -> str:
        return self.constraints[i].name or f"row {i}"

    def dense(self):
        """Return ``(c, A, senses, b, lb, ub)`` as numpy arrays."""
        c, (r, k, v), senses, b, lb, ub = self._arrays()
        A = np.zeros((len(self.constraints), self.n_vars))
        np.add.at(A, (r, k), v)
        return c, A, senses, b, lb, ub

    def evaluate(self, x: Sequence[float]) -> float:
        return float(sum(c * x[j] for j, c in self.objective.items()))

    def max_violation(self, x: Sequence[float]) -> float:
        """Largest bound or row violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        for j, v in enumerate(self.variables):
            worst = max(worst, v.lb - x[j], x[j] - v.ub)
        for con in self.constraints:
            lhs = sum(a * x[j] for j, a in con.coeffs.items())
            if con.sense is Sense.LE:
                worst = max(worst, lhs - con.rhs)
            elif con.sense is Sense.GE:
                worst = max(worst, con.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - con.rhs))
        return worst


class Affine:
    """Affine expression ``sum(coef[j] * x_j) + const`` over model variables."""

    __slots__ = ("coef", "const")

    def __init__(self, coef: Optional[Mapping[int, float]] = None, const: float = 0.0):
        self.coef = dict(coef) if coef else {}
        self.const = float(const)

    @classmethod
    def var(cls, j: int, a: float = 1.0) -> "Affine":
        return cls({j: a})

    def __add__(self, other):
        if not isinstance(other, Affine):
            return Affine(self.coef, self.const + float(other))
        out = dict(self.coef)
        for j, a in other.coef.items():
            out[j] = out.get(j, 0.0) + a
        return Affine(out, self.const + other.const)

    __radd__ = __add__

    def iadd(self, other: "Affine", k: float = 1.0) -> "Affine":
        """In-place ``self += k * other``; only for unshared accumulators."""
        coef = self.coef
        for j, a in other.coef.items():
            coef[j] = coef.get(j, 0.0) + k * a
        self.const += k * other.const
        return self

    def __neg__(self):
        return Affine({j: -a for j, a in self.coef.items()}, -self.const)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, k: float):
        k = float(k)
        return Affine({j: a * k for j, a in self.coef.items()}, self.const * k)

    __rmul__ = __mul__

    def value(self, x: Sequence[float]) -> float:
        return float(sum(a * x[j] for j, a in self.coef.items()) + self.const)

    def __repr__(self):
        return f"Affine({self.coef!r}, {self.const!r})"


def add_row(model: LpModel, expr: Affine, sense, rhs: float = 0.0, name: str = "") -> int:
    """Add ``expr <sense> rhs``, folding the expression constant into the rhs."""
    return model.add_constraint(expr.coef, sense, rhs - expr.const, name)


def to_lp_text(model: LpModel) -> str:
    """Dump ``model`` in CPLEX LP format, for cross-checking with external solvers."""

    def expr(coeffs: Mapping[int, float]) -> str:
        terms = [f"{'-' if a < 0 else '+'} {abs(a):.12g} {model.variables[j].name}"
                 for j, a in sorted(coeffs.items()) if a != 0.0]
        if not terms:
            return "0 " + (model.variables[0].name if model.variables else "")
        out = " ".join(terms)
        return out[2:] if out.startswith("+ ") else out

    lines = [f"\\ {model.name}", "Minimize", f" obj: {expr(model.objective)}", "Subject To"]
    for i, con in enumerate(model.constraints):
        lines.append(f" {con.name or f'c{i}'}: {expr(con.coeffs)} {con.sense.value} {con.rhs:.12g}")
    lines.append("Bounds")
    for v in model.variables:
        if v.lb == -math.inf and v.ub == math.inf:
            lines.append(f" {v.name} free")
        else:
            lo = "-inf" if v.lb == -math.inf else f"{v.lb:.12g}"
            hi = "+inf" if v.ub == math.inf else f"{v.ub:.12g}"
            lines.append(f" {lo} <= {v.name} <= {hi}")
    lines.append("End")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# dense simplex
# ---------------------------------------------------------------------------

class _Tableau:
    """Standard-form tableau ``min c.x, A x = b, x >= 0, b >= 0``."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int]):
        m, n = A.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.basis = list(basis)
        self.iterations = 0

    def price(self, cost: np.ndarray) -> None:
        m = len(self.basis)
        n = self.T.shape[1] - 1
        self.T[m, :n] = cost
        self.T[m, n] = 0.0
        for i, j in enumerate(self.basis):
            if cost[j] != 0.0:
                self.T[m] -= cost[j] * self.T[i]

    def pivot(self, r: int, c: int) -> None:
        T = self.T
        T[r] /= T[r, c]
        col = T[:, c].copy()
        col[r] = 0.0
        nz = np.flatnonzero(col)
        if nz.size:
            T[nz] -= col[nz, None] * T[r]
        T[:, c] = 0.0
        T[r, c] = 1.0
        self.basis[r] = c
        self.iterations += 1

    def run(self, allowed: np.ndarray, max_iter: int) -> Status:
        """Primal simplex: Dantzig pricing, Bland's rule under degeneracy."""
        T = self.T
        m = len(self.basis)
        streak = 0
        while self.iterations < max_iter:
            d = T[m, :-1]
            candidates = np.flatnonzero((d < -COST_TOL) & allowed)
            if candidates.size == 0:
                return Status.OPTIMAL
            bland = streak >= DEGENERATE_STREAK
            c = int(candidates[0]) if bland else int(candidates[np.argmin(d[candidates])])
            col = T[:m, c]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                return Status.UNBOUNDED
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            if ties.size > 1:
                # Bland tie-break: leave the smallest basic index
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                r = int(ties[0])
            streak = streak + 1 if T[r, -1] <= FEAS_TOL * 1e-3 else 0
            self.pivot(r, c)
        raise RuntimeError(f"simplex iteration cap {max_iter} reached")


def _standard_form(c, A, senses, b, lb, ub):
    """Map bounded variables and mixed rows to ``A' y = b', y >= 0``.

    Returns the standard-form data plus a recovery map ``x = x0 + M y``.
    """
    m, n = A.shape
    cols = []        # (orig index, sign) per standard column
    x0 = np.zeros(n)
    extra_rows = []  # (col index in standard form, upper)
    for j in range(n):
        lo, hi = lb[j], ub[j]
        if lo == hi:
            x0[j] = lo
        elif math.isfinite(lo):
            x0[j] = lo
            cols.append((j, 1.0))
            if math.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif math.isfinite(hi):
            x0[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    k = len(cols)
    M = np.zeros((n, k))
    for s, (j, sign) in enumerate(cols):
        M[j, s] = sign
    A_s = A @ M
    b_s = b - A @ x0
    c_s = c @ M
    const = float(c @ x0)

    rows = [A_s[i] for i in range(m)]
    rhs = list(b_s)
    sns = list(senses)
    for s, u in extra_rows:
        e = np.zeros(k)
        e[s] = 1.0
        rows.append(e)
        rhs.append(u)
        sns.append(Sense.LE)
    mm = len(rows)
    n_slack = sum(1 for s in sns if s is not Sense.EQ)
    A_std = np.zeros((mm, k + n_slack))
    b_std = np.array(rhs, dtype=float)
    slack_of = [-1] * mm
    p = k
    for i, row in enumerate(rows):
        A_std[i, :k] = row
        if sns[i] is Sense.LE:
            A_std[i, p] = 1.0
            slack_of[i] = p
            p += 1
        elif sns[i] is Sense.GE:
            A_std[i, p] = -1.0
            slack_of[i] = p
            p += 1
    neg = b_std < 0
    A_std[neg] *= -1.0
    b_std[neg] *= -1.0
    c_std = np.concatenate([c_s, np.zeros(n_slack)])
    return A_std, b_std, c_std, slack_of, M, x0, const


def _simplex(c, A, senses, b, lb, ub, max_iter: Optional[int] = None) -> LpSolution:
    n = A.shape[1]
    A_std, b_std, c_std, slack_of, M, x0, const = _standard_form(c, A, senses, b, lb, ub)
    mm, nn = A_std.shape
    if max_iter is None:
        max_iter = 50 * (mm + nn) + 1000

    basis = []
    art_rows = []
    for i in range(mm):
        s = slack_of[i]
        if s >= 0 and A_std[i, s] > 0:
            basis.append(s)
        else:
            basis.append(-1)
            art_rows.append(i)
    n_art = len(art_rows)
    A_full = np.hstack([A_std, np.zeros((mm, n_art))])
    for a, i in enumerate(art_rows):
        A_full[i, nn + a] = 1.0
        basis[i] = nn + a
    tab = _Tableau(A_full, b_std, basis)
    allowed = np.ones(nn + n_art, dtype=bool)

    if n_art:
        phase1 = np.zeros(nn + n_art)
        phase1[nn:] = 1.0
        tab.price(phase1)
        tab.run(allowed, max_iter)
        infeas = -tab.T[mm, -1]
        if infeas > FEAS_TOL * max(1.0, float(np.abs(b_std).max(initial=0.0))):
            return LpSolution(Status.INFEASIBLE, math.inf, None, tab.iterations)
        # drive remaining artificials out of the basis
        keep = []
        for i in range(mm):
            if tab.basis[i] >= nn:
                row = tab.T[i, :nn]
                nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if nz.size:
                    tab.pivot(i, int(nz[np.argmax(np.abs(row[nz]))]))
                    keep.append(i)
                # else: redundant row, dropped below
            else:
                keep.append(i)
        if len(keep) < mm:
            rows = keep + [mm]
            tab.T = tab.T[rows]
            tab.basis = [tab.basis[i] for i in keep]
            mm = len(keep)
        allowed[nn:] = False

    tab.price(np.concatenate([c_std, np.zeros(n_art)]))
    status = tab.run(allowed, max_iter)
    if status is Status.UNBOUNDED:
        return LpSolution(Status.UNBOUNDED, -math.inf, None, tab.iterations)

    y = _refine(A_std, b_std, tab.basis, tab.T[:mm, -1], nn)
    x = x0 + M @ y[: M.shape[1]]
    x = np.clip(x, lb, ub)
    return LpSolution(Status.OPTIMAL, float(c @ x), x, tab.iterations)


def _refine(A_std, b_std, basis, values, nn):
    """Recompute basic values from the original data to shed pivot drift."""
    y = np.zeros(nn)
    cols = [j for j in basis if j < nn]
    rows_ok = [i for i, j in enumerate(basis) if j < nn]
    if cols:
        B = A_std[:, cols]
        try:
            if B.shape[0] == B.shape[1]:
                sol = np.linalg.solve(B, b_std)
            else:
                sol, *_ = np.linalg.lstsq(B, b_std, rcond=None)
        except np.linalg.LinAlgError:
            sol = values[rows_ok]
        if np.abs(B @ sol - b_std).max(initial=0.0) > 1e-9 * max(1.0, np.abs(b_std).max(initial=0.0)):
            sol = values[rows_ok]
        y[cols] = sol
    return np.maximum(y, 0.0)


def _highs(c, A, senses, b, lb, ub) -> LpSolution:
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix

    senses = np.array([s.value for s in senses])
    le, ge, eq = senses == "<=", senses == ">=", senses == "="
    sign = np.where(ge, -1.0, 1.0)
    ineq = le | ge
    A = csr_matrix(A) if not hasattr(A, "tocsr") else A.tocsr()
    A_ub = A[ineq].multiply(sign[ineq][:, None]).tocsr() if ineq.any() else None
    b_ub = (b * sign)[ineq] if ineq.any() else None
    bounds = np.column_stack([np.where(np.isfinite(lb), lb, -np.inf), np.where(np.isfinite(ub), ub, np.inf)])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub,
                  A_eq=A[eq] if eq.any() else None, b_eq=b[eq] if eq.any() else None,
                  bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9})
    if res.status == 0:
        x = np.clip(np.asarray(res.x, dtype=float), lb, ub)
        return LpSolution(Status.OPTIMAL, float(c @ x), x, int(getattr(res, "nit", 0)))
    if res.status == 2:
        return LpSolution(Status.INFEASIBLE, math.inf, None)
    if res.status == 3:
        return LpSolution(Status.UNBOUNDED, -math.inf, None)
    raise RuntimeError(f"HiGHS failed: {res.message}")


BACKENDS = ("simplex", "highs")


def solve(model: LpModel, backend: str = "simplex") -> LpSolution:
    """Solve ``model``; ``backend`` is ``"simplex"`` (built in) or ``"highs"``."""
    if backend not in BACKENDS:
        raise LpValidationError(f"unknown LP backend {backend!r}; choose from {BACKENDS}")
    if model.n_vars == 0:
        model.validate()
        for con in model.constraints:
            ok = {Sense.LE: 0.0 <= con.rhs + FEAS_TOL, Sense.GE: 0.0 >= con.rhs - FEAS_TOL,
                  Sense.EQ: abs(con.rhs) <= FEAS_TOL}[con.sense]
            if not ok:
                return LpSolution(Status.INFEASIBLE, math.inf, None)
        return LpSolution(Status.OPTIMAL, 0.0, np.zeros(0))
    if backend == "highs":
        from scipy.sparse import coo_matrix

        c, (r, k, v), senses, b, lb, ub = model._arrays()
        A = coo_matrix((v, (r, k)), shape=(len(senses), model.n_vars))
        return _highs(c, A, senses, b, lb, ub)
    return _simplex(*model.dense())


def solve_arrays(c: Iterable[float], A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                 bounds=None, backend: str = "simplex") -> LpSolution:
    """Convenience wrapper taking linprog-style arrays."""
    c = np.asarray(list(c), dtype=float)
    model = LpModel()
    n = c.size
    bounds = bounds or [(0.0, math.inf)] * n
    for lo, hi in bounds:
        model.add_variable(-math.inf if lo is None else lo, math.inf if hi is None else hi)
    if A_ub is not None:
        for row, rhs in zip(np.atleast_2d(A_ub), b_ub):
            model.add_constraint({j: a for j, a in enumerate(row) if a != 0.0}, Sense.LE, rhs)
    if A_eq is not None:
        for row, rhs in zip(np.atleast_2d(A_eq), b_eq):
            model.add_constraint({j: a for j, a in enumerate(row) if a != 0.0}, Sense.EQ, rhs)
    model.set_objective({j: v for j, v in enumerate(c) if v != 0.0})
    return solve(model, backend)
