"""Post-hoc numerical certification of conjugate-gradient identities.

Every check consumes a recorded :class:`~cgkit.cg.IterationTrace` and
reports *normalized* residuals: each raw identity violation is divided by
the natural scale of its participants (Euclidean or A-norm products), so a
single tolerance is meaningful across problems.

The identities certified here hold exactly in exact arithmetic for every
iterate that is not yet the minimizer.  Checks therefore run over the
recorded pre-termination iterations only; the final below-tolerance
gradient sits at the numerical minimizer, where the identities'
hypothesis fails and its direction is rounding noise.  Finite precision
degrades the far-pair identities as a run approaches full Krylov depth
(iterations close to the dimension); the default tolerance of 1e-8 is an
engineering choice for well-conditioned problems and is relaxed - and
flagged as relaxed - above condition 1e4, where the checks measure the
degradation rather than certify exactness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cg import (
    IterationTrace,
    QuadraticProblem,
    TerminationReason,
    beta,
    stepsize_exact,
    stepsize_orthogonal,
)
from .errors import BreakdownError, IncompleteTraceError
from .linalg import DENSIFY_CAP, MatrixSPD, dot, solve_direct

__all__ = [
    "IdentityResidual",
    "CheckResult",
    "VerificationReport",
    "check_classical_identities",
    "check_gradient_conjugacy",
    "check_stepsize_equivalence",
    "check_finite_termination",
    "check_beta_agreement",
    "run_all_checks",
    "estimate_condition",
    "DEFAULT_CHECK_TOLERANCE",
    "RELAXED_CHECK_TOLERANCE",
    "CONDITION_RELAX_THRESHOLD",
]

DEFAULT_CHECK_TOLERANCE = 1e-8
RELAXED_CHECK_TOLERANCE = 1e-5
CONDITION_RELAX_THRESHOLD = 1e4
STEPSIZE_TOLERANCE = 1e-12
SOLUTION_TOLERANCE = 1e-10

_FLOOR = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class IdentityResidual:
    """One evaluated identity instance.

    ``indices`` identifies the participating iteration(s); ``normalized``
    is ``raw`` divided by the check's natural scale and is what ``passed``
    compares against the tolerance.
    """

    identity: str
    indices: tuple[int, ...]
    raw: float
    normalized: float
    passed: bool


@dataclass(frozen=True)
class CheckResult:
    """All residuals of one identity family plus the verdict."""

    check: str
    tolerance: float
    worst: float
    passed: bool
    residuals: tuple[IdentityResidual, ...]
    note: str = ""


@dataclass(frozen=True)
class VerificationReport:
    """One or more check results with an overall verdict.

    ``tolerance_relaxed`` is True when the tolerance schedule loosened the
    normalized tolerance because of high estimated conditioning; such a
    report documents measured floating-point residuals and does not certify
    the exact-arithmetic identities.
    """

    checks: tuple[CheckResult, ...]
    passed: bool
    tolerance_relaxed: bool = False
    condition_estimate: float | None = None
    notes: tuple[str, ...] = ()

    @property
    def worst_violation(self) -> float:
        return max((c.worst for c in self.checks), default=0.0)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.check == name:
                return c
        raise KeyError(f"no check named {name!r}")

    @staticmethod
    def merge(*reports: "VerificationReport") -> "VerificationReport":
        checks = tuple(c for r in reports for c in r.checks)
        notes = tuple(dict.fromkeys(n for r in reports for n in r.notes))
        cond = max((r.condition_estimate for r in reports
                    if r.condition_estimate is not None), default=None)
        return VerificationReport(
            checks=checks,
            passed=all(c.passed for c in checks),
            tolerance_relaxed=any(r.tolerance_relaxed for r in reports),
            condition_estimate=cond,
            notes=notes,
        )

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            verdict = "PASS" if c.passed else "FAIL"
            line = (f"[{verdict}] {c.check}: worst normalized residual "
                    f"{c.worst:.3e} (tolerance {c.tolerance:.0e}, "
                    f"{len(c.residuals)} residuals)")
            if c.note:
                line += f" - {c.note}"
            lines.append(line)
        for n in self.notes:
            lines.append(f"note: {n}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def estimate_condition(a: MatrixSPD | np.ndarray) -> float | None:
    """Spectral condition estimate via a dense eigensolve.

    Returns None for sparse matrices too large to densify; ``inf`` when the
    smallest eigenvalue is not positive.
    """
    if isinstance(a, MatrixSPD):
        if a.n > DENSIFY_CAP:
            return None
        dense = a.to_dense()
    else:
        dense = np.asarray(a, dtype=np.float64)
        if dense.shape[0] > DENSIFY_CAP:
            return None
    vals = np.linalg.eigvalsh(dense)
    if vals[0] <= 0.0:
        return math.inf
    return float(vals[-1] / vals[0])


def _tolerance_schedule(a, tolerance: float | None) -> tuple[float, bool, float | None, tuple[str, ...]]:
    """Resolve (tolerance, relaxed, condition, notes) for identity checks."""
    if tolerance is not None:
        return tolerance, False, None, ()
    cond = estimate_condition(a) if a is not None else None
    if cond is not None and cond > CONDITION_RELAX_THRESHOLD:
        note = (f"normalized tolerance relaxed to {RELAXED_CHECK_TOLERANCE:.0e} "
                f"for estimated condition {cond:.2e}; residuals below are "
                "measured floating-point values, not an exact-arithmetic "
                "certification")
        return RELAXED_CHECK_TOLERANCE, True, cond, (note,)
    return DEFAULT_CHECK_TOLERANCE, False, cond, ()


def _normalized(raw: float, scale: float) -> float:
    return raw / max(scale, _FLOOR)


def _result(check: str, tolerance: float,
            residuals: list[IdentityResidual], note: str = "") -> CheckResult:
    worst = max((abs(r.normalized) for r in residuals), default=0.0)
    passed = all(r.passed for r in residuals)
    return CheckResult(check=check, tolerance=tolerance, worst=worst,
                       passed=passed, residuals=tuple(residuals), note=note)


def _require_records(trace: IterationTrace, what: str) -> None:
    if not trace.records:
        raise IncompleteTraceError(f"{what} needs at least one recorded iteration")
    for rec in trace.records:
        if rec.d is None or rec.Ad is None or rec.alpha is None:
            raise IncompleteTraceError(
                f"record {rec.k} lacks the direction or cached A d_k product")


def _matvec_any(a, v: np.ndarray) -> np.ndarray:
    if isinstance(a, MatrixSPD):
        return a.matvec(v)
    return np.asarray(a, dtype=np.float64) @ v


def check_classical_identities(trace: IterationTrace, a,
                               *, tolerance: float | None = None) -> VerificationReport:
    """The four classical identity families over all recorded iterations.

    For recorded iterations i > j:

    * descent:                g_i . d_i = -||g_i||^2   (normalized by ||g_i||^2)
    * direction conjugacy:    d_i . A d_j = 0          (by sqrt((d_i.Ad_i)(d_j.Ad_j)))
    * gradient/direction:     g_i . d_j = 0            (by ||g_i|| ||d_j||)
    * gradient orthogonality: g_i . g_j = 0            (by ||g_i|| ||g_j||)

    Uses the cached ``A d_k`` products; no extra matrix products are needed.
    """
    _require_records(trace, "classical-identity check")
    tol, relaxed, cond, notes = _tolerance_schedule(a, tolerance)
    recs = trace.records
    K = len(recs)
    gnorm = [rec.grad_norm() for rec in recs]
    dnorm = [float(np.linalg.norm(rec.d)) for rec in recs]
    dAd = [dot(recs[i].d, recs[i].Ad) for i in range(K)]

    descent: list[IdentityResidual] = []
    conjugacy: list[IdentityResidual] = []
    grad_dir: list[IdentityResidual] = []
    grad_orth: list[IdentityResidual] = []
    for i in range(K):
        raw = dot(recs[i].g, recs[i].d) + gnorm[i] ** 2
        norm = _normalized(raw, gnorm[i] ** 2)
        descent.append(IdentityResidual("descent", (i,), raw, norm,
                                        abs(norm) <= tol))
        for j in range(i):
            raw = dot(recs[i].d, recs[j].Ad)
            norm = _normalized(raw, math.sqrt(dAd[i] * dAd[j]))
            conjugacy.append(IdentityResidual("direction_conjugacy", (i, j),
                                              raw, norm, abs(norm) <= tol))
            raw = dot(recs[i].g, recs[j].d)
            norm = _normalized(raw, gnorm[i] * dnorm[j])
            grad_dir.append(IdentityResidual("gradient_direction_orthogonality",
                                             (i, j), raw, norm, abs(norm) <= tol))
            raw = dot(recs[i].g, recs[j].g)
            norm = _normalized(raw, gnorm[i] * gnorm[j])
            grad_orth.append(IdentityResidual("gradient_orthogonality", (i, j),
                                              raw, norm, abs(norm) <= tol))

    checks = (
        _result("descent", tol, descent),
        _result("direction_conjugacy", tol, conjugacy),
        _result("gradient_direction_orthogonality", tol, grad_dir),
        _result("gradient_orthogonality", tol, grad_orth),
    )
    return VerificationReport(checks=checks, passed=all(c.passed for c in checks),
                              tolerance_relaxed=relaxed, condition_estimate=cond,
                              notes=notes)


def check_gradient_conjugacy(trace: IterationTrace, a,
                             *, tolerance: float | None = None) -> VerificationReport:
    """A-conjugacy structure of the recorded gradients.

    Adjacent pairs satisfy ``g_{k+1} . A g_k = -||g_{k+1}||^2 / alpha_k``;
    all farther pairs (i <= k-1) satisfy ``g_{k+1} . A g_i = 0``.  Residuals
    are normalized by the A-norm product of the participating gradients.
    One product ``A g_k`` is computed and cached per recorded gradient.
    """
    _require_records(trace, "gradient-conjugacy check")
    tol, relaxed, cond, notes = _tolerance_schedule(a, tolerance)
    recs = trace.records
    K = len(recs)
    Ag = [_matvec_any(a, rec.g) for rec in recs]
    anorm = [math.sqrt(max(dot(recs[i].g, Ag[i]), 0.0)) for i in range(K)]

    adjacent: list[IdentityResidual] = []
    far: list[IdentityResidual] = []
    note = ""
    if K == 1:
        note = "single recorded iteration: no gradient pairs to check"
    for k in range(K - 1):
        g_next = recs[k + 1].g
        raw = dot(g_next, Ag[k]) + dot(g_next, g_next) / recs[k].alpha
        norm = _normalized(raw, anorm[k + 1] * anorm[k])
        adjacent.append(IdentityResidual("gradient_conjugacy_adjacent",
                                         (k + 1, k), raw, norm, abs(norm) <= tol))
        for i in range(k):
            raw = dot(g_next, Ag[i])
            norm = _normalized(raw, anorm[k + 1] * anorm[i])
            far.append(IdentityResidual("gradient_conjugacy_far", (k + 1, i),
                                        raw, norm, abs(norm) <= tol))

    checks = (
        _result("gradient_conjugacy_adjacent", tol, adjacent, note),
        _result("gradient_conjugacy_far", tol, far, note),
    )
    return VerificationReport(checks=checks, passed=all(c.passed for c in checks),
                              tolerance_relaxed=relaxed, condition_estimate=cond,
                              notes=notes)


def check_stepsize_equivalence(trace: IterationTrace,
                               *, tolerance: float = STEPSIZE_TOLERANCE) -> VerificationReport:
    """Recompute both stepsize formulas from each record and compare.

    Reports ``|alpha_exact - alpha_orthogonal| / alpha_exact`` per
    iteration.  A formula breaking down on its recorded vectors is reported
    as an infinite residual for that iteration rather than raising.
    """
    _require_records(trace, "stepsize-equivalence check")
    residuals: list[IdentityResidual] = []
    notes: list[str] = []
    for rec in trace.records:
        try:
            a_exact = stepsize_exact(rec.g, rec.d, rec.Ad)
            a_orth = stepsize_orthogonal(rec.g, rec.Ad)
        except BreakdownError as err:
            notes.append(f"iteration {rec.k}: {err}")
            residuals.append(IdentityResidual("stepsize_equivalence", (rec.k,),
                                              math.inf, math.inf, False))
            continue
        raw = a_exact - a_orth
        norm = _normalized(raw, abs(a_exact))
        residuals.append(IdentityResidual("stepsize_equivalence", (rec.k,),
                                          raw, norm, abs(norm) <= tolerance))
    result = _result("stepsize_equivalence", tolerance, residuals,
                     note="; ".join(notes))
    return VerificationReport(checks=(result,), passed=result.passed)


def check_finite_termination(trace: IterationTrace, problem: QuadraticProblem,
                             *, tolerance_x: float = SOLUTION_TOLERANCE) -> VerificationReport:
    """Termination within the dimension, against the direct-solve oracle.

    Asserts the run stopped by gradient tolerance in at most ``n``
    iterations, and that the final iterate matches the minimizer from a
    dense Cholesky solve of ``A x = -b`` to relative tolerance
    ``tolerance_x``.
    """
    n = problem.n
    within = (trace.terminated_at <= n
              and trace.termination_reason == TerminationReason.GRADIENT_BELOW_TOLERANCE)
    over = max(0, trace.terminated_at - n)
    residuals = [IdentityResidual("terminates_within_dimension",
                                  (trace.terminated_at,), float(over),
                                  float(over), within)]
    note = ""
    if trace.termination_reason != TerminationReason.GRADIENT_BELOW_TOLERANCE:
        note = (f"run stopped by {trace.termination_reason.value} after "
                f"{trace.terminated_at} iterations")
    try:
        x_oracle = problem.direct_solution()
    except Exception as err:  # factorization failure is reported, not raised
        residuals.append(IdentityResidual("solution_matches_direct_solve", (),
                                          math.inf, math.inf, False))
        note = (note + "; " if note else "") + f"direct-solve oracle failed: {err}"
        result = _result("finite_termination", tolerance_x, residuals, note)
        return VerificationReport(checks=(result,), passed=result.passed)
    err_abs = float(np.linalg.norm(trace.final_x - x_oracle))
    scale = float(np.linalg.norm(x_oracle))
    rel = _normalized(err_abs, scale)
    residuals.append(IdentityResidual("solution_matches_direct_solve", (),
                                      err_abs, rel, rel <= tolerance_x))
    result = _result("finite_termination", tolerance_x, residuals, note)
    return VerificationReport(checks=(result,), passed=result.passed)


def check_beta_agreement(trace: IterationTrace,
                         *, tolerance: float | None = None) -> VerificationReport:
    """Recompute all four direction-coupling formulas per iteration.

    With exact line search on a quadratic FR, HS, PRP and DY coincide; the
    residual per iteration k >= 1 is the pairwise spread
    ``(max - min) / max|value|`` of the four recomputed values (zero when
    all four vanish).  A formula with a vanishing denominator is reported
    for its iteration as an infinite residual.
    """
    _require_records(trace, "beta-agreement check")
    tol = tolerance if tolerance is not None else DEFAULT_CHECK_TOLERANCE
    recs = trace.records
    residuals: list[IdentityResidual] = []
    notes: list[str] = []
    note = ""
    if len(recs) == 1:
        note = "single recorded iteration: no coupling step to compare"
    for k in range(1, len(recs)):
        g_k, g_prev, d_prev = recs[k].g, recs[k - 1].g, recs[k - 1].d
        values = []
        failed = []
        for rule in ("fr", "hs", "prp", "dy"):
            try:
                values.append(beta(rule, g_k, g_prev, d_prev))
            except BreakdownError as err:
                failed.append(f"iteration {k}: {err}")
        if failed:
            notes.extend(failed)
            residuals.append(IdentityResidual("beta_agreement", (k,),
                                              math.inf, math.inf, False))
            continue
        peak = max(abs(v) for v in values)
        raw = max(values) - min(values)
        norm = raw / peak if peak > 0.0 else 0.0
        residuals.append(IdentityResidual("beta_agreement", (k,), raw, norm,
                                          abs(norm) <= tol))
    if notes:
        note = (note + "; " if note else "") + "; ".join(notes)
    result = _result("beta_agreement", tol, residuals, note)
    return VerificationReport(checks=(result,), passed=result.passed)


def run_all_checks(trace: IterationTrace, problem: QuadraticProblem,
                   *, tolerance: float | None = None,
                   tolerance_x: float = SOLUTION_TOLERANCE) -> VerificationReport:
    """All five checks merged into one report.

    Identity checks need recorded iterations; when the trace has none (the
    start point was already optimal, or recording was off) they are skipped
    with a note and only the termination check runs.
    """
    reports = []
    if trace.records:
        reports.append(check_classical_identities(trace, problem.A, tolerance=tolerance))
        reports.append(check_gradient_conjugacy(trace, problem.A, tolerance=tolerance))
        reports.append(check_stepsize_equivalence(trace))
        reports.append(check_beta_agreement(
            trace, tolerance=reports[0].checks[0].tolerance))
    reports.append(check_finite_termination(trace, problem, tolerance_x=tolerance_x))
    merged = VerificationReport.merge(*reports)
    if not trace.records:
        merged = VerificationReport(
            checks=merged.checks, passed=merged.passed,
            tolerance_relaxed=merged.tolerance_relaxed,
            condition_estimate=merged.condition_estimate,
            notes=merged.notes + (
                "no iterations recorded; identity checks skipped",))
    return merged
