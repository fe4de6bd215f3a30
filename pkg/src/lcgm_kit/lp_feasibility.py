"""Exact feasibility decisions for equality systems with nonnegativity bounds.

Decides whether {A x = b, x_j >= 0 for j in a chosen index set} has a
solution, entirely in rational arithmetic, via a phase-1 simplex
(minimize the sum of artificial variables) with Bland's anti-cycling
rule.  Free variables are split into differences of nonnegative pairs.

A presolve pass runs first and is equivalence-preserving:

* empty rows are dropped (or declared infeasible if their rhs is nonzero);
* a zero-rhs row whose surviving variables are all sign-constrained and
  whose coefficients share a strict sign forces those variables to zero;
* singleton rows fix their variable outright.

On the deterministic-kernel systems produced by the Blackwell witness
search, presolve typically decides the instance outright, which is what
keeps large randomized suites inside their time budgets.

Infeasible verdicts carry a Farkas certificate y when available: y.A <= 0
on the nonnegative coordinates, y.A = 0 on the free ones, and y.b > 0.
The certificate is recomputed on the original row set (without presolve),
so it is exact and independently checkable.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral
from typing import Sequence

from .errors import InvalidSystem, InvariantViolation


def _as_fraction(x, what: str) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, Integral):
        return Fraction(int(x))
    raise InvalidSystem(f"{what}: entries must be exact rationals, got {x!r}")


@dataclass(frozen=True)
class FeasibilitySystem:
    """Equalities A x = b with x_j >= 0 for j in ``nonneg``; other vars free."""

    num_vars: int
    equalities: tuple[tuple[tuple[Fraction, ...], Fraction], ...]
    nonneg: frozenset[int]

    @staticmethod
    def build(num_vars: int, equalities, nonneg) -> "FeasibilitySystem":
        if num_vars < 0:
            raise InvalidSystem("num_vars must be nonnegative")
        rows = []
        for k, (coeffs, rhs) in enumerate(equalities):
            coeffs = tuple(_as_fraction(c, f"equality {k}") for c in coeffs)
            if len(coeffs) != num_vars:
                raise InvalidSystem(
                    f"equality {k}: row has {len(coeffs)} coefficients, expected {num_vars}"
                )
            rows.append((coeffs, _as_fraction(rhs, f"equality {k} rhs")))
        nonneg = frozenset(int(j) for j in nonneg)
        if any(j < 0 or j >= num_vars for j in nonneg):
            raise InvalidSystem("nonneg indices out of range")
        return FeasibilitySystem(num_vars, tuple(rows), nonneg)


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    witness: tuple[Fraction, ...] | None = None
    certificate: tuple[Fraction, ...] | None = None
    pivots: int = 0


def _check_witness(sys: FeasibilitySystem, x: Sequence[Fraction]) -> None:
    for k, (coeffs, rhs) in enumerate(sys.equalities):
        if sum(c * v for c, v in zip(coeffs, x)) != rhs:
            raise InvariantViolation(f"witness violates equality {k}")
    for j in sys.nonneg:
        if x[j] < 0:
            raise InvariantViolation(f"witness violates nonnegativity of x_{j}")


def _check_certificate(sys: FeasibilitySystem, y: Sequence[Fraction]) -> None:
    yb = sum(yi * rhs for yi, (_, rhs) in zip(y, sys.equalities))
    if not yb > 0:
        raise InvariantViolation("Farkas certificate has y.b <= 0")
    for j in range(sys.num_vars):
        yaj = sum(yi * coeffs[j] for yi, (coeffs, _) in zip(y, sys.equalities))
        if j in sys.nonneg:
            if yaj > 0:
                raise InvariantViolation(f"Farkas certificate has (y.A)_{j} > 0")
        elif yaj != 0:
            raise InvariantViolation(f"Farkas certificate has (y.A)_{j} != 0 on a free var")


def _presolve(sys: FeasibilitySystem):
    """Returns (status, fixed, rows); status is 'ok' or 'infeasible'.

    rows is the reduced system as (dict var->coeff, rhs) pairs over the
    variables not yet fixed.
    """
    fixed: dict[int, Fraction] = {}
    rows = [
        ({j: c for j, c in enumerate(coeffs) if c != 0}, rhs)
        for coeffs, rhs in sys.equalities
    ]
    changed = True
    while changed:
        changed = False
        next_rows = []
        for coeffs, rhs in rows:
            if fixed:
                kept = {}
                for j, c in coeffs.items():
                    if j in fixed:
                        rhs = rhs - c * fixed[j]
                    else:
                        kept[j] = c
                coeffs = kept
            if not coeffs:
                if rhs != 0:
                    return "infeasible", fixed, []
                changed = True
                continue
            if len(coeffs) == 1:
                ((j, c),) = coeffs.items()
                value = rhs / c
                if j in sys.nonneg and value < 0:
                    return "infeasible", fixed, []
                fixed[j] = value
                changed = True
                continue
            if rhs == 0 and all(j in sys.nonneg for j in coeffs):
                signs = {c > 0 for c in coeffs.values()}
                if len(signs) == 1:
                    for j in coeffs:
                        fixed[j] = Fraction(0)
                    changed = True
                    continue
            next_rows.append((coeffs, rhs))
        rows = next_rows
    return "ok", fixed, rows


def _phase1_simplex(columns, rows_rhs, pivot_cap):
    """Phase-1 tableau simplex.  columns: var index -> dense column list.

    Returns (feasible, values_by_column, y_duals, pivots) where y_duals are
    the phase-1 duals of the (sign-normalized) rows.
    """
    m = len(rows_rhs)
    n = len(columns)
    signs = [1 if rhs >= 0 else -1 for rhs in rows_rhs]
    T = [
        [signs[i] * columns[j][i] for j in range(n)]
        + [Fraction(1) if k == i else Fraction(0) for k in range(m)]
        + [signs[i] * rows_rhs[i]]
        for i in range(m)
    ]
    basis = [n + i for i in range(m)]
    width = n + m + 1
    red = [Fraction(0)] * n + [Fraction(1)] * m + [Fraction(0)]
    for i in range(m):
        for k in range(width):
            red[k] -= T[i][k]

    pivots = 0
    while True:
        enter = next((j for j in range(n + m) if red[j] < 0), None)
        if enter is None:
            break
        best = None
        for i in range(m):
            if T[i][enter] > 0:
                ratio = T[i][width - 1] / T[i][enter]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            raise InvariantViolation("phase-1 objective unbounded below; system is malformed")
        leave = best[1]
        piv = T[leave][enter]
        T[leave] = [v / piv for v in T[leave]]
        for i in range(m):
            if i != leave and T[i][enter] != 0:
                f = T[i][enter]
                T[i] = [a - f * b for a, b in zip(T[i], T[leave])]
        f = red[enter]
        if f != 0:
            red = [a - f * b for a, b in zip(red, T[leave])]
        basis[leave] = enter
        pivots += 1
        if pivots > pivot_cap:
            raise InvariantViolation("simplex pivot cap exceeded despite Bland's rule")

    objective = -red[width - 1]
    if objective > 0:
        y = [signs[i] * (Fraction(1) - red[n + i]) for i in range(m)]
        return False, None, y, pivots
    values = [Fraction(0)] * (n + m)
    for i in range(m):
        values[basis[i]] = T[i][width - 1]
    return True, values[:n], None, pivots


def _simplex_on(sys_vars, nonneg, rows, pivot_cap):
    """Solve {rows, nonneg} by free-variable splitting; rows over sparse dicts."""
    var_order = sorted(sys_vars)
    col_of: dict[int, tuple[int, int | None]] = {}
    ncols = 0
    for v in var_order:
        if v in nonneg:
            col_of[v] = (ncols, None)
            ncols += 1
        else:
            col_of[v] = (ncols, ncols + 1)
            ncols += 2
    m = len(rows)
    columns = [[Fraction(0)] * m for _ in range(ncols)]
    rhs = []
    for i, (coeffs, b) in enumerate(rows):
        rhs.append(b)
        for v, c in coeffs.items():
            pos, neg = col_of[v]
            columns[pos][i] = c
            if neg is not None:
                columns[neg][i] = -c
    feasible, vals, y, pivots = _phase1_simplex(columns, rhs, pivot_cap)
    if not feasible:
        return False, None, y, pivots
    out = {}
    for v in var_order:
        pos, neg = col_of[v]
        out[v] = vals[pos] if neg is None else vals[pos] - vals[neg]
    return True, out, None, pivots


def solve_feasibility(sys: FeasibilitySystem) -> FeasibilityResult:
    """Decide the system exactly; any witness is re-checked before returning."""
    if not isinstance(sys, FeasibilitySystem):
        raise InvalidSystem("expected a FeasibilitySystem")
    pivot_cap = 50 * (sys.num_vars + len(sys.equalities)) + 100

    status, fixed, rows = _presolve(sys)
    used_presolve = bool(fixed) or len(rows) != len(sys.equalities)
    pivots = 0
    y = None
    if status == "ok":
        remaining = set()
        for coeffs, _ in rows:
            remaining.update(coeffs)
        if remaining:
            ok, values, y1, pivots = _simplex_on(remaining, sys.nonneg, rows, pivot_cap)
        else:
            ok, values, y1 = True, {}, None
        if ok:
            x = []
            for j in range(sys.num_vars):
                if j in fixed:
                    x.append(fixed[j])
                elif j in remaining:
                    x.append(values[j])
                else:
                    x.append(Fraction(0))
            x = tuple(x)
            _check_witness(sys, x)
            return FeasibilityResult(True, witness=x, pivots=pivots)
        if not used_presolve:
            y = y1  # simplex already ran on the original rows

    if y is None:
        # Recover a Farkas certificate on the original rows by running the
        # plain simplex without presolve: presolve substitutions do not
        # preserve row identity, so duals from the reduced system would not
        # certify the original one.
        all_vars = set(range(sys.num_vars))
        plain_rows = [
            ({j: c for j, c in enumerate(coeffs) if c != 0}, rhs)
            for coeffs, rhs in sys.equalities
        ]
        ok, _, y, pivots2 = _simplex_on(all_vars, sys.nonneg, plain_rows, pivot_cap)
        pivots += pivots2
        if ok:
            raise InvariantViolation("presolve and plain simplex disagree on feasibility")
    y = tuple(y)
    _check_certificate(sys, y)
    return FeasibilityResult(False, certificate=y, pivots=pivots)


@dataclass(frozen=True)
class LinearSolveResult:
    status: str  # "unique" | "underdetermined" | "infeasible"
    solution: tuple[Fraction, ...] | None = None


def solve_linear_system(equalities, num_vars: int) -> LinearSolveResult:
    """Exact Gauss-Jordan on A x = b with no sign constraints."""
    aug = []
    for coeffs, rhs in equalities:
        row = [_as_fraction(c, "linear system") for c in coeffs]
        if len(row) != num_vars:
            raise InvalidSystem("linear system row length mismatch")
        aug.append(row + [_as_fraction(rhs, "linear system rhs")])
    pivot_cols = []
    r = 0
    for c in range(num_vars):
        pr = next((i for i in range(r, len(aug)) if aug[i][c] != 0), None)
        if pr is None:
            continue
        aug[r], aug[pr] = aug[pr], aug[r]
        piv = aug[r][c]
        aug[r] = [v / piv for v in aug[r]]
        for i in range(len(aug)):
            if i != r and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[r])]
        pivot_cols.append(c)
        r += 1
    for i in range(r, len(aug)):
        if aug[i][num_vars] != 0:
            return LinearSolveResult("infeasible")
    if len(pivot_cols) < num_vars:
        return LinearSolveResult("underdetermined")
    x = [Fraction(0)] * num_vars
    for i, c in enumerate(pivot_cols):
        x[c] = aug[i][num_vars]
    return LinearSolveResult("unique", tuple(x))


def exact_rank(matrix) -> int:
    """Rank of a matrix with exact rational entries, by Gaussian elimination."""
    rows = [[_as_fraction(x, "rank") for x in row] for row in matrix]
    if not rows:
        return 0
    ncols = len(rows[0])
    rank = 0
    for c in range(ncols):
        pr = next((i for i in range(rank, len(rows)) if rows[i][c] != 0), None)
        if pr is None:
            continue
        rows[rank], rows[pr] = rows[pr], rows[rank]
        piv = rows[rank][c]
        rows[rank] = [v / piv for v in rows[rank]]
        for i in range(len(rows)):
            if i != rank and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[rank])]
        rank += 1
        if rank == len(rows):
            break
    return rank
