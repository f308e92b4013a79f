"""Density-dependent Markov population models with polynomial jump rates.

A model describes a continuous-time Markov chain on non-negative integer
d-vectors: from state X, the chain jumps to X + J at rate N*g_J(X/N), where
each g_J is a polynomial in the density vector x = X/N.  The coordinates are
split into a first block (indices 0..d1-1, populations of order N) and a
second block (indices d1..d-1, populations that are small near the boundary
equilibrium x0).  Jumps that change the second block must factor through a
distinguished second-block coordinate s, which is what makes the small-count
phase a branching process.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ModelError",
    "Monomial",
    "PolynomialRate",
    "JumpSpec",
    "PopulationModel",
    "StructureDecomposition",
    "StructureEvaluator",
    "Violation",
    "ModelValidationReport",
    "validate_model",
    "drift",
    "jacobian",
    "structure_at",
    "barebones",
    "linear_birth_death",
    "two_type_symmetric",
    "stochastic_logistic",
    "load_model",
    "save_model",
    "model_from_dict",
    "model_to_dict",
]

EQUILIBRIUM_TOL = 1e-12
STRICT_POS_TOL = 1e-14
ADJACENCY_TOL = 1e-14


class ModelError(ValueError):
    """Structurally invalid model data (wrong dimensions, bad JSON, ...)."""


@dataclass(frozen=True)
class Monomial:
    """coeff * prod_i x_i**powers[i]."""

    coeff: float
    powers: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "powers", tuple(int(p) for p in self.powers))
        object.__setattr__(self, "coeff", float(self.coeff))
        if not np.isfinite(self.coeff):
            raise ModelError(f"monomial coefficient {self.coeff!r} is not finite")
        if any(p < 0 for p in self.powers):
            raise ModelError(f"negative exponent in monomial powers {self.powers}")

    @property
    def degree(self) -> int:
        return sum(self.powers)

    def __call__(self, x: Sequence[float]) -> float:
        term = self.coeff
        for xi, p in zip(x, self.powers):
            for _ in range(p):
                term *= xi
        return term


@dataclass(frozen=True)
class PolynomialRate:
    """Sum of monomials; exact evaluation and exact calculus on the exponents."""

    monomials: tuple[Monomial, ...]

    def __post_init__(self):
        monos = tuple(
            m if isinstance(m, Monomial) else Monomial(**m) for m in self.monomials
        )
        object.__setattr__(self, "monomials", monos)
        dims = {len(m.powers) for m in monos}
        if len(dims) > 1:
            raise ModelError(f"inconsistent monomial dimensions {sorted(dims)}")

    @property
    def dim(self) -> int:
        return len(self.monomials[0].powers) if self.monomials else 0

    def __call__(self, x: Sequence[float]) -> float:
        return sum(m(x) for m in self.monomials) if self.monomials else 0.0

    def partial(self, i: int) -> "PolynomialRate":
        """Exact derivative with respect to coordinate i."""
        out = []
        for m in self.monomials:
            p = m.powers[i]
            if p == 0:
                continue
            powers = list(m.powers)
            powers[i] = p - 1
            out.append(Monomial(m.coeff * p, tuple(powers)))
        return PolynomialRate(tuple(out))

    def divide_by(self, i: int) -> "PolynomialRate":
        """Exact division by x_i; raises ModelError if any monomial lacks the factor."""
        out = []
        for m in self.monomials:
            if m.powers[i] < 1:
                raise ModelError(
                    f"rate is not divisible by coordinate {i}: monomial {m.powers}"
                )
            powers = list(m.powers)
            powers[i] -= 1
            out.append(Monomial(m.coeff, tuple(powers)))
        return PolynomialRate(tuple(out))

    def zero_on(self, coords: Iterable[int]) -> "PolynomialRate":
        """Substitute x_i = 0 for every i in coords (drops those monomials)."""
        coords = set(coords)
        keep = tuple(
            m for m in self.monomials if all(m.powers[i] == 0 for i in coords)
        )
        return PolynomialRate(keep)

    def remainder_on(self, coords: Iterable[int]) -> "PolynomialRate":
        """The part that vanishes when all x_i, i in coords, are set to zero."""
        coords = set(coords)
        keep = tuple(
            m for m in self.monomials if any(m.powers[i] > 0 for i in coords)
        )
        return PolynomialRate(keep)

    @staticmethod
    def from_terms(terms: Sequence[tuple[float, Sequence[int]]]) -> "PolynomialRate":
        return PolynomialRate(tuple(Monomial(c, tuple(p)) for c, p in terms))


@dataclass(frozen=True)
class JumpSpec:
    """One transition X -> X + J at rate N*rate(X/N).

    s is the distinguished second-block coordinate (0-based, d1 <= s < d) and
    must be present whenever J changes the second block; the rate then has to
    factor as gbar(x) * x_s.
    """

    J: tuple[int, ...]
    rate: PolynomialRate
    s: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "J", tuple(int(j) for j in self.J))
        if self.s is not None:
            object.__setattr__(self, "s", int(self.s))

    def gbar(self) -> PolynomialRate:
        if self.s is None:
            raise ModelError("gbar requested for a jump without a distinguished s")
        return self.rate.divide_by(self.s)


@dataclass(frozen=True)
class PopulationModel:
    """Immutable model definition; shareable across concurrent replicas."""

    name: str
    d1: int
    N: int
    x0: tuple[float, ...]
    jumps: tuple[JumpSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        object.__setattr__(self, "jumps", tuple(self.jumps))
        d = len(self.x0)
        if not (0 <= self.d1 <= d):
            raise ModelError(f"d1={self.d1} outside [0, d={d}]")
        if self.N < 1:
            raise ModelError(f"population scale N={self.N} must be a positive integer")
        for k, j in enumerate(self.jumps):
            if len(j.J) != d:
                raise ModelError(f"jump {k} has dimension {len(j.J)}, expected {d}")
            if j.rate.dim not in (0, d):
                raise ModelError(f"jump {k} rate has dimension {j.rate.dim}, expected {d}")

    @property
    def d(self) -> int:
        return len(self.x0)

    @property
    def d2(self) -> int:
        return self.d - self.d1

    @property
    def second_block(self) -> range:
        return range(self.d1, self.d)

    def is_j2(self, jump: JumpSpec) -> bool:
        return any(jump.J[i] != 0 for i in self.second_block)

    @property
    def j2_jumps(self) -> tuple[JumpSpec, ...]:
        return tuple(j for j in self.jumps if self.is_j2(j))

    def with_scale(self, N: int) -> "PopulationModel":
        """Same model at a different population scale."""
        return PopulationModel(self.name, self.d1, int(N), self.x0, self.jumps)

    def drift(self, x: Sequence[float]) -> np.ndarray:
        return drift(self, x)

    def jacobian(self, x: Sequence[float]) -> np.ndarray:
        return jacobian(self, x)


def drift(model: PopulationModel, x: Sequence[float]) -> np.ndarray:
    """Infinitesimal drift F(x) = sum_J J * g_J(x), evaluated exactly."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("drift requested at a non-finite point")
    F = np.zeros(model.d)
    for jump in model.jumps:
        g = jump.rate(x)
        for i, ji in enumerate(jump.J):
            if ji != 0:
                F[i] += ji * g
    return F


def jacobian(model: PopulationModel, x: Sequence[float]) -> np.ndarray:
    """Exact Jacobian dF_i/dx_j by monomial differentiation."""
    x = np.asarray(x, dtype=float)
    Jm = np.zeros((model.d, model.d))
    for jump in model.jumps:
        for k in range(model.d):
            dg = jump.rate.partial(k)(x)
            if dg != 0.0:
                for i, ji in enumerate(jump.J):
                    if ji != 0:
                        Jm[i, k] += ji * dg
    return Jm


@dataclass(frozen=True)
class StructureDecomposition:
    """Block form F(x) = [A(x); B(x)] x_2 + [c(x_1); 0] with constants C, B0.

    A cross term of a second-block-preserving jump (a monomial containing
    second-block factors) is assigned to the column of its lowest-index
    second-block variable; the split is exact in all cases.
    """

    A: np.ndarray  # d1 x d2, evaluated at x
    B: np.ndarray  # d2 x d2, evaluated at x
    c: np.ndarray  # d1 vector, evaluated at (x_1, 0)
    C: np.ndarray  # d1 x d1, Jacobian of c at x0_1
    B0: np.ndarray  # d2 x d2, B evaluated at x0

    def reconstruct(self, x2: Sequence[float]) -> np.ndarray:
        x2 = np.asarray(x2, dtype=float)
        top = self.A @ x2 + self.c if self.A.size or self.c.size else np.empty(0)
        bot = self.B @ x2
        return np.concatenate([top, bot])


def _column_polynomials(model: PopulationModel):
    """Per-jump contributions to the columns of [A; B] and to c, as polynomials.

    Returns (col_polys, c_polys) where col_polys[j] is a list of
    (row_index, column_index, PolynomialRate) over the full d rows, and
    c_polys is a list of (row_index, PolynomialRate) for the first block.
    """
    d1, d = model.d1, model.d
    col_terms: list[tuple[int, int, PolynomialRate]] = []
    c_terms: list[tuple[int, PolynomialRate]] = []
    for jump in model.jumps:
        if model.is_j2(jump):
            gbar = jump.gbar()
            col = jump.s - d1
            for i, ji in enumerate(jump.J):
                if ji != 0:
                    col_terms.append((i, col, _scale(gbar, ji)))
        else:
            base = jump.rate.zero_on(model.second_block)
            rem = jump.rate.remainder_on(model.second_block)
            for i, ji in enumerate(jump.J):
                if ji == 0:
                    continue
                if base.monomials:
                    c_terms.append((i, _scale(base, ji)))
                for m in rem.monomials:
                    s = next(k for k in model.second_block if m.powers[k] > 0)
                    reduced = PolynomialRate((m,)).divide_by(s)
                    col_terms.append((i, s - d1, _scale(reduced, ji)))
    return col_terms, c_terms


def _scale(poly: PolynomialRate, factor: float) -> PolynomialRate:
    return PolynomialRate(tuple(Monomial(m.coeff * factor, m.powers) for m in poly.monomials))


class StructureEvaluator:
    """Precompiled block decomposition, for repeated evaluation along a flow.

    Validates the model once at construction; A(x), B(x) and c(x) are then
    plain vectorized monomial sums.
    """

    def __init__(self, model: PopulationModel):
        report = validate_model(model)
        if not report.passed:
            raise ModelError(
                "structure decomposition requires a valid model; violations: "
                + "; ".join(v.assumption for v in report.violations)
            )
        self.model = model
        d1, d2, d = model.d1, model.d2, model.d
        col_terms, c_terms = _column_polynomials(model)

        rows, cols, coeffs, expos = [], [], [], []
        for i, col, poly in col_terms:
            for m in poly.monomials:
                rows.append(i)
                cols.append(col)
                coeffs.append(m.coeff)
                expos.append(m.powers)
        self._ab_row = np.asarray(rows, dtype=np.int64)
        self._ab_col = np.asarray(cols, dtype=np.int64)
        self._ab_coeff = np.asarray(coeffs, dtype=float)
        self._ab_expo = (np.asarray(expos, dtype=np.int64)
                         if expos else np.empty((0, d), dtype=np.int64))

        rows, coeffs, expos = [], [], []
        for i, poly in c_terms:
            for m in poly.monomials:
                rows.append(i)
                coeffs.append(m.coeff)
                expos.append(m.powers)
        self._c_row = np.asarray(rows, dtype=np.int64)
        self._c_coeff = np.asarray(coeffs, dtype=float)
        self._c_expo = (np.asarray(expos, dtype=np.int64)
                        if expos else np.empty((0, d), dtype=np.int64))

        x0 = np.asarray(model.x0)
        AB0 = self.ab(x0)
        self.B0 = AB0[d1:, :]
        self.A0 = AB0[:d1, :]
        C = np.zeros((d1, d1))
        for i, poly in c_terms:
            for k in range(d1):
                C[i, k] += poly.partial(k)(x0)
        self.C = C
        self.x0 = x0

    def ab(self, x: np.ndarray) -> np.ndarray:
        """Stacked [A(x); B(x)], shape (d, d2)."""
        model = self.model
        AB = np.zeros((model.d, model.d2))
        if self._ab_coeff.size:
            vals = self._ab_coeff * np.prod(x[None, :] ** self._ab_expo, axis=1)
            np.add.at(AB, (self._ab_row, self._ab_col), vals)
        return AB

    def c(self, x: np.ndarray) -> np.ndarray:
        model = self.model
        out = np.zeros(model.d1)
        if self._c_coeff.size:
            vals = self._c_coeff * np.prod(x[None, :] ** self._c_expo, axis=1)
            np.add.at(out, self._c_row, vals)
        return out

    def c_tilde(self, x: np.ndarray) -> np.ndarray:
        """Nonlinear part of c: c(x) - C (x_1 - x0_1)."""
        d1 = self.model.d1
        return self.c(x) - self.C @ (x[:d1] - self.x0[:d1])

    def at(self, x) -> StructureDecomposition:
        x = np.asarray(x, dtype=float)
        AB = self.ab(x)
        d1 = self.model.d1
        return StructureDecomposition(
            A=AB[:d1, :], B=AB[d1:, :], c=self.c(x), C=self.C, B0=self.B0,
        )


def structure_at(model: PopulationModel, x: Sequence[float]) -> StructureDecomposition:
    """Evaluate the block decomposition at x; requires a valid model."""
    return StructureEvaluator(model).at(x)


@dataclass(frozen=True)
class Violation:
    assumption: str
    where: str
    message: str


@dataclass(frozen=True)
class ModelValidationReport:
    passed: bool
    violations: tuple[Violation, ...]

    def __post_init__(self):
        if self.passed != (len(self.violations) == 0):
            raise ModelError("passed flag inconsistent with violation list")


def _strongly_connected(adj: np.ndarray) -> bool:
    """Irreducibility of a boolean adjacency matrix via reachability closure."""
    n = adj.shape[0]
    if n <= 1:
        return True
    reach = adj.copy()
    np.fill_diagonal(reach, True)
    for _ in range(n):
        new = reach @ reach
        if np.array_equal(new, reach):
            break
        reach = new
    return bool(np.all(reach))


def validate_model(model: PopulationModel) -> ModelValidationReport:
    """Check every structural assumption; returns all violations found.

    Checked conditions: presence and range of s for second-block jumps, the
    factorization g_J = gbar_J * x_s, the sign constraints on second-block
    jump components, strict positivity of gbar_J(x0), F(x0) = 0, and B0
    Metzler and irreducible.  Dimension mismatches raise ModelError instead
    of being reported.
    """
    violations: list[Violation] = []
    d1, d = model.d1, model.d

    gbar_by_jump: dict[int, PolynomialRate] = {}
    for k, jump in enumerate(model.jumps):
        where = f"jump[{k}] J={jump.J}"
        if not model.is_j2(jump):
            continue
        if jump.s is None:
            violations.append(
                Violation("missing_s", where, "second-block jump without distinguished coordinate s")
            )
            continue
        if not (d1 <= jump.s < d):
            violations.append(
                Violation("s_range", where, f"s={jump.s} outside second block [{d1}, {d})")
            )
            continue
        for i in model.second_block:
            if i != jump.s and jump.J[i] < 0:
                violations.append(
                    Violation("jump_sign", where, f"J_{i} = {jump.J[i]} < 0 for i != s in the second block")
                )
        if jump.J[jump.s] < -1:
            violations.append(
                Violation("jump_s_min", where, f"J_s = {jump.J[jump.s]} < -1")
            )
        try:
            gbar = jump.gbar()
        except ModelError as exc:
            violations.append(Violation("factorization", where, str(exc)))
            continue
        gbar_by_jump[k] = gbar
        g0 = gbar(np.asarray(model.x0))
        if g0 <= STRICT_POS_TOL:
            violations.append(
                Violation("gbar_positive", where, f"gbar(x0) = {g0:g} is not strictly positive")
            )

    F0 = drift(model, model.x0)
    if np.max(np.abs(F0)) > EQUILIBRIUM_TOL:
        violations.append(
            Violation("equilibrium", "x0", f"F(x0) = {F0.tolist()} is not zero within {EQUILIBRIUM_TOL:g}")
        )

    # Matrix checks presuppose structurally well-formed jumps; a single broken
    # jump must not also trigger derived matrix violations.
    jump_structure_ids = ("missing_s", "s_range", "factorization", "jump_sign", "jump_s_min")
    d2 = model.d2
    if d2 > 0 and not any(v.assumption in jump_structure_ids for v in violations):
        B0 = np.zeros((d2, d2))
        x0 = np.asarray(model.x0)
        for k, jump in enumerate(model.jumps):
            if k in gbar_by_jump:
                col = jump.s - d1
                g0 = gbar_by_jump[k](x0)
                for i in model.second_block:
                    B0[i - d1, col] += jump.J[i] * g0
        off = B0 - np.diag(np.diag(B0))
        if np.min(off) < -STRICT_POS_TOL:
            i, j = np.unravel_index(np.argmin(off), off.shape)
            violations.append(
                Violation("metzler", f"B0[{i},{j}]", f"off-diagonal entry {off[i, j]:g} is negative")
            )
        elif not _strongly_connected(np.abs(off) > ADJACENCY_TOL):
            violations.append(
                Violation("irreducible", "B0", "adjacency graph of B0 is not strongly connected")
            )

    return ModelValidationReport(passed=not violations, violations=tuple(violations))


# ---------------------------------------------------------------------------
# Built-in models
# ---------------------------------------------------------------------------

def barebones(a1: float, a2: float, gamma: float, phase: str = "invasion",
              N: int = 10_000) -> PopulationModel:
    """Two-species competition model with cross-mortality coefficient gamma.

    Per-capita birth rates a1 (resident) and a2 (invader); per-capita death
    rate of each species is its own density plus gamma times the other's.
    phase="invasion": coordinate 0 is the resident at carrying capacity a1,
    coordinate 1 the rare invader; requires a2 > gamma*a1.
    phase="extinction": coordinates swapped, the model is started near the
    invader's carrying capacity a2 and the resident dies out; requires
    a1 < gamma*a2.
    """
    if min(a1, a2, gamma) <= 0:
        raise ValueError("a1, a2, gamma must all be positive")
    if phase == "invasion":
        if not a2 > gamma * a1:
            raise ValueError(
                f"invasion phase requires a2 > gamma*a1, got {a2} <= {gamma * a1}"
            )
        b_first, b_second, x_eq = a1, a2, a1
        name = f"barebones-invasion(a1={a1:g},a2={a2:g},gamma={gamma:g})"
    elif phase == "extinction":
        if not a1 < gamma * a2:
            raise ValueError(
                f"extinction phase requires a1 < gamma*a2, got {a1} >= {gamma * a2}"
            )
        b_first, b_second, x_eq = a2, a1, a2
        name = f"barebones-extinction(a1={a1:g},a2={a2:g},gamma={gamma:g})"
    else:
        raise ValueError(f"unknown phase {phase!r}")

    jumps = (
        JumpSpec((1, 0), PolynomialRate.from_terms([(b_first, (1, 0))])),
        JumpSpec((-1, 0), PolynomialRate.from_terms([(1.0, (2, 0)), (gamma, (1, 1))])),
        JumpSpec((0, 1), PolynomialRate.from_terms([(b_second, (0, 1))]), s=1),
        JumpSpec((0, -1), PolynomialRate.from_terms([(gamma, (1, 1)), (1.0, (0, 2))]), s=1),
    )
    return PopulationModel(name=name, d1=1, N=N, x0=(x_eq, 0.0), jumps=jumps)


def linear_birth_death(lam: float, mu: float, N: int = 10_000) -> PopulationModel:
    """Single-type linear birth-death population process (constant gbar)."""
    if min(lam, mu) <= 0:
        raise ValueError("lam and mu must be positive")
    jumps = (
        JumpSpec((1,), PolynomialRate.from_terms([(lam, (1,))]), s=0),
        JumpSpec((-1,), PolynomialRate.from_terms([(mu, (1,))]), s=0),
    )
    return PopulationModel(
        name=f"linear-bd(lam={lam:g},mu={mu:g})", d1=0, N=N, x0=(0.0,), jumps=jumps,
    )


def two_type_symmetric(eta: float, N: int = 10_000) -> PopulationModel:
    """Two-type pure-birth model with type-mixing rate eta in (0, 1/2).

    Type-1 individuals produce type-1 offspring at per-capita rate 1-eta and
    type-2 offspring at rate eta, and symmetrically for type 2.  The growth
    matrix has eigenvalues 1 and 1-2*eta, so the gap between the coordinate
    sum and difference martingales is controlled by eta.
    """
    if not 0 < eta < 0.5:
        raise ValueError("eta must lie strictly between 0 and 1/2")
    jumps = (
        JumpSpec((1, 0), PolynomialRate.from_terms([(1 - eta, (1, 0))]), s=0),
        JumpSpec((1, 0), PolynomialRate.from_terms([(eta, (0, 1))]), s=1),
        JumpSpec((0, 1), PolynomialRate.from_terms([(eta, (1, 0))]), s=0),
        JumpSpec((0, 1), PolynomialRate.from_terms([(1 - eta, (0, 1))]), s=1),
    )
    return PopulationModel(
        name=f"two-type-symmetric(eta={eta:g})", d1=0, N=N, x0=(0.0, 0.0), jumps=jumps,
    )


def stochastic_logistic(N: int = 10_000) -> PopulationModel:
    """Pure-birth logistic growth: X -> X+1 at rate X(1 - X/N)."""
    jumps = (
        JumpSpec((1,), PolynomialRate.from_terms([(1.0, (1,)), (-1.0, (2,))]), s=0),
    )
    return PopulationModel(
        name="stochastic-logistic", d1=0, N=N, x0=(0.0,), jumps=jumps,
    )


# ---------------------------------------------------------------------------
# JSON model files
# ---------------------------------------------------------------------------

def _require_keys(obj: dict, allowed: set[str], required: set[str], what: str):
    unknown = set(obj) - allowed
    if unknown:
        raise ModelError(f"unknown field(s) {sorted(unknown)} in {what}")
    missing = required - set(obj)
    if missing:
        raise ModelError(f"missing field(s) {sorted(missing)} in {what}")


def model_from_dict(obj: dict) -> PopulationModel:
    _require_keys(obj, {"name", "d", "d1", "N", "x0", "jumps"},
                  {"name", "d", "d1", "N", "x0", "jumps"}, "model")
    d = int(obj["d"])
    x0 = obj["x0"]
    if len(x0) != d:
        raise ModelError(f"x0 has length {len(x0)}, expected d={d}")
    jumps = []
    for k, j in enumerate(obj["jumps"]):
        _require_keys(j, {"J", "s", "rate"}, {"J", "rate"}, f"jumps[{k}]")
        rate = j["rate"]
        _require_keys(rate, {"monomials"}, {"monomials"}, f"jumps[{k}].rate")
        monos = []
        for im, m in enumerate(rate["monomials"]):
            _require_keys(m, {"coeff", "powers"}, {"coeff", "powers"},
                          f"jumps[{k}].rate.monomials[{im}]")
            monos.append(Monomial(float(m["coeff"]), tuple(m["powers"])))
        jumps.append(JumpSpec(tuple(j["J"]), PolynomialRate(tuple(monos)), j.get("s")))
    return PopulationModel(
        name=str(obj["name"]), d1=int(obj["d1"]), N=int(obj["N"]),
        x0=tuple(float(v) for v in x0), jumps=tuple(jumps),
    )


def model_to_dict(model: PopulationModel) -> dict:
    return {
        "name": model.name,
        "d": model.d,
        "d1": model.d1,
        "N": model.N,
        "x0": list(model.x0),
        "jumps": [
            {
                "J": list(j.J),
                "s": j.s,
                "rate": {
                    "monomials": [
                        {"coeff": m.coeff, "powers": list(m.powers)}
                        for m in j.rate.monomials
                    ]
                },
            }
            for j in model.jumps
        ],
    }


def load_model(path: str) -> PopulationModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ModelError(f"{path}: model file must contain a JSON object")
    return model_from_dict(obj)


def save_model(model: PopulationModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")
