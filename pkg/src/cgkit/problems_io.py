"""Test-problem factory, MatrixMarket input/output, trace and report files.

Scalar serialization contract: every float is written so it round-trips to
the identical 64-bit value (``%.17g`` in text columns, shortest-exact repr
in JSON documents).
"""

from __future__ import annotations

import io
import json
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Any, Iterable

import numpy as np
import scipy.sparse as _sparse

from .cg import IterationTrace, QuadraticProblem, SolverConfig
from .errors import CgKitError, MatrixMarketError, ProblemSpecError
from .linalg import MatrixSPD, SpectrumSpec, as_vector, generate_spd
from .verify import CheckResult, IdentityResidual, VerificationReport

__all__ = [
    "BuiltinProblemSpec",
    "builtin_problem",
    "read_matrix_market",
    "write_matrix_market",
    "read_vector_file",
    "write_vector_file",
    "TraceDocument",
    "write_trace",
    "read_trace",
    "report_to_dict",
    "report_from_dict",
    "BUILTIN_FAMILIES",
]

BUILTIN_FAMILIES = ("laplacian1d", "hilbert", "diagonal", "random_spd")
B_MODES = ("ones", "random", "from_known_solution")
HILBERT_MAX_ORDER = 12

_FMT = "%.17g"


# ---------------------------------------------------------------------------
# builtin problems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BuiltinProblemSpec:
    """Recipe for a generated test problem.

    Families:

    * ``laplacian1d`` - tridiagonal (2 on the diagonal, -1 off), CSR storage;
    * ``hilbert``     - H_ij = 1/(i+j-1), dense; n is capped at 12 because
      the conditioning grows past float64 usefulness beyond that;
    * ``diagonal``    - diag(eigenvalues), CSR storage;
    * ``random_spd``  - dense matrix from :func:`~cgkit.linalg.generate_spd`
      with the given spectrum and seed.

    The linear term is selected by ``b_mode``: a vector of ones, a seeded
    standard-normal draw, or ``b = -A x*`` so that ``known_solution`` is the
    exact minimizer.
    """

    family: str
    n: int
    eigenvalues: tuple[float, ...] | None = None
    spectrum: SpectrumSpec | None = None
    seed: int = 0
    b_mode: str = "ones"
    b_seed: int = 0
    known_solution: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.family not in BUILTIN_FAMILIES:
            raise ProblemSpecError(
                f"unknown family {self.family!r}; expected one of {BUILTIN_FAMILIES}")
        if self.n < 1:
            raise ProblemSpecError("n must be at least 1")
        if self.family == "hilbert" and self.n > HILBERT_MAX_ORDER:
            raise ProblemSpecError(
                f"hilbert problems are restricted to n <= {HILBERT_MAX_ORDER}")
        if self.family == "diagonal":
            if self.eigenvalues is None:
                raise ProblemSpecError("diagonal problems need an eigenvalue list")
            vals = tuple(float(v) for v in self.eigenvalues)
            if len(vals) != self.n:
                raise ProblemSpecError(
                    f"diagonal problem of order {self.n} got {len(vals)} eigenvalues")
            if any(v <= 0.0 for v in vals):
                raise ProblemSpecError("diagonal entries must be strictly positive")
            object.__setattr__(self, "eigenvalues", vals)
        if self.family == "random_spd" and self.spectrum is None:
            raise ProblemSpecError("random_spd problems need a SpectrumSpec")
        if self.b_mode not in B_MODES:
            raise ProblemSpecError(
                f"unknown b_mode {self.b_mode!r}; expected one of {B_MODES}")
        if self.b_mode == "from_known_solution":
            if self.known_solution is None:
                raise ProblemSpecError("b_mode=from_known_solution needs known_solution")
            sol = tuple(float(v) for v in self.known_solution)
            if len(sol) != self.n:
                raise ProblemSpecError("known_solution length must equal n")
            object.__setattr__(self, "known_solution", sol)

    def describe(self) -> dict[str, Any]:
        """JSON-ready description for trace metadata."""
        out: dict[str, Any] = {"family": self.family, "n": self.n}
        if self.eigenvalues is not None:
            out["eigenvalues"] = list(self.eigenvalues)
        if self.spectrum is not None:
            s = self.spectrum
            out["spectrum"] = {
                "eigenvalues": list(s.eigenvalues) if s.eigenvalues else None,
                "lam_min": s.lam_min, "lam_max": s.lam_max,
                "distribution": s.distribution, "clusters": s.clusters,
            }
            out["seed"] = self.seed
        out["b_mode"] = self.b_mode
        if self.b_mode == "random":
            out["b_seed"] = self.b_seed
        if self.known_solution is not None:
            out["known_solution"] = list(self.known_solution)
        return out


def _laplacian1d(n: int) -> MatrixSPD:
    if n == 1:
        return MatrixSPD.from_csr([0, 1], [0], [2.0], 1)
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    m = _sparse.diags([off, main, off], offsets=(-1, 0, 1), format="csr")
    return MatrixSPD.from_csr(m.indptr, m.indices, m.data, n)


def _hilbert(n: int) -> MatrixSPD:
    i = np.arange(1, n + 1)
    h = 1.0 / (i[:, None] + i[None, :] - 1.0)
    return MatrixSPD.from_dense(h)


def _diagonal(values: Iterable[float]) -> MatrixSPD:
    vals = np.asarray(tuple(values), dtype=np.float64)
    n = vals.size
    indptr = np.arange(n + 1, dtype=np.int64)
    indices = np.arange(n, dtype=np.int64)
    return MatrixSPD.from_csr(indptr, indices, vals, n)


def builtin_problem(spec: BuiltinProblemSpec) -> QuadraticProblem:
    """Materialize a builtin problem family into a validated problem."""
    if spec.family == "laplacian1d":
        a = _laplacian1d(spec.n)
    elif spec.family == "hilbert":
        a = _hilbert(spec.n)
    elif spec.family == "diagonal":
        a = _diagonal(spec.eigenvalues)
    else:
        a = generate_spd(spec.n, spec.spectrum, spec.seed)

    if spec.b_mode == "ones":
        b = np.ones(spec.n)
    elif spec.b_mode == "random":
        b = np.random.default_rng(spec.b_seed).standard_normal(spec.n)
    else:
        x_star = np.asarray(spec.known_solution, dtype=np.float64)
        b = -a.matvec(x_star)
    return QuadraticProblem(a, b)


# ---------------------------------------------------------------------------
# MatrixMarket
# ---------------------------------------------------------------------------

@contextmanager
def _open_text(source, mode: str):
    """Yield a text stream for a path, text stream, or binary stream.

    Paths are opened and closed here; caller-owned streams are left open
    (binary ones are wrapped for the duration and detached afterwards so
    the caller's handle survives).
    """
    if isinstance(source, (str, Path)):
        with open(source, mode, encoding="ascii") as stream:
            yield stream
    elif isinstance(source, io.TextIOBase):
        yield source
    else:
        wrapper = io.TextIOWrapper(source, encoding="ascii", write_through=True)
        try:
            yield wrapper
        finally:
            wrapper.detach()


def read_matrix_market(source) -> MatrixSPD:
    """Parse a real MatrixMarket file into a validated SPD matrix.

    Accepts coordinate and array formats.  Files declared ``symmetric`` may
    store one triangle; off-diagonal entries are mirrored.  Files declared
    ``general`` must turn out symmetric (checked at construction).  The
    result additionally passes :func:`~cgkit.linalg.spd_validate`.

    Malformed content raises :class:`MatrixMarketError` with the 1-based
    line number; unsupported fields (complex, pattern) and symmetries
    (skew-symmetric, hermitian) are rejected the same way.
    """
    from .linalg import spd_validate

    with _open_text(source, "r") as stream:
        matrix = _parse_matrix_market(stream)
    spd_validate(matrix)
    return matrix


def _parse_matrix_market(stream) -> MatrixSPD:
    header = stream.readline()
    if not header:
        raise MatrixMarketError("empty input", line=1)
    parts = header.strip().split()
    if len(parts) != 5 or parts[0] != "%%MatrixMarket" or parts[1].lower() != "matrix":
        raise MatrixMarketError(
            "header must read '%%MatrixMarket matrix <format> <field> <symmetry>'",
            line=1)
    fmt, fieldspec, symmetry = (p.lower() for p in parts[2:5])
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketError(f"unsupported format {fmt!r}", line=1)
    if fieldspec not in ("real", "integer"):
        raise MatrixMarketError(
            f"unsupported field {fieldspec!r}; only real-valued matrices are accepted",
            line=1)
    if symmetry not in ("general", "symmetric"):
        raise MatrixMarketError(f"unsupported symmetry {symmetry!r}", line=1)

    lineno = 1
    size_parts = None
    while True:
        line = stream.readline()
        if not line:
            raise MatrixMarketError("missing size line", line=lineno)
        lineno += 1
        text = line.strip()
        if not text or text.startswith("%"):
            continue
        size_parts = text.split()
        break

    if fmt == "coordinate":
        return _parse_coordinate(stream, size_parts, symmetry, lineno)
    return _parse_array(stream, size_parts, symmetry, lineno)


def _parse_coordinate(stream, size_parts, symmetry, lineno) -> MatrixSPD:
    if len(size_parts) != 3:
        raise MatrixMarketError("coordinate size line must be 'rows cols nnz'",
                                line=lineno)
    try:
        rows, cols, nnz = (int(p) for p in size_parts)
    except ValueError as err:
        raise MatrixMarketError(f"bad size line: {err}", line=lineno) from None
    if rows != cols:
        raise MatrixMarketError(f"matrix must be square, got {rows}x{cols}",
                                line=lineno)
    ii = np.empty(nnz, dtype=np.int64)
    jj = np.empty(nnz, dtype=np.int64)
    vv = np.empty(nnz, dtype=np.float64)
    seen = 0
    while seen < nnz:
        line = stream.readline()
        if not line:
            raise MatrixMarketError(
                f"expected {nnz} entries, found {seen}", line=lineno)
        lineno += 1
        text = line.strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if len(parts) != 3:
            raise MatrixMarketError(
                f"entry must be 'row col value', got {text!r}", line=lineno)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as err:
            raise MatrixMarketError(f"bad entry: {err}", line=lineno) from None
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise MatrixMarketError(
                f"index ({i}, {j}) outside 1..{rows}", line=lineno)
        ii[seen], jj[seen], vv[seen] = i - 1, j - 1, v
        seen += 1
    if symmetry == "symmetric":
        off = ii != jj  # mirror off-diagonal entries into the other triangle
        ii, jj, vv = (np.concatenate([ii, jj[off]]),
                      np.concatenate([jj, ii[off]]),
                      np.concatenate([vv, vv[off]]))
    coo = _sparse.coo_matrix((vv, (ii, jj)), shape=(rows, rows)).tocsr()
    return MatrixSPD.from_csr(coo.indptr, coo.indices, coo.data, rows)


def _parse_array(stream, size_parts, symmetry, lineno) -> MatrixSPD:
    if len(size_parts) != 2:
        raise MatrixMarketError("array size line must be 'rows cols'", line=lineno)
    try:
        rows, cols = (int(p) for p in size_parts)
    except ValueError as err:
        raise MatrixMarketError(f"bad size line: {err}", line=lineno) from None
    if rows != cols:
        raise MatrixMarketError(f"matrix must be square, got {rows}x{cols}",
                                line=lineno)
    # array format lists values column-major; symmetric files store the
    # lower triangle of each column only
    if symmetry == "symmetric":
        expected = rows * (rows + 1) // 2
    else:
        expected = rows * cols
    values = np.empty(expected, dtype=np.float64)
    seen = 0
    while seen < expected:
        line = stream.readline()
        if not line:
            raise MatrixMarketError(
                f"expected {expected} values, found {seen}", line=lineno)
        lineno += 1
        text = line.strip()
        if not text or text.startswith("%"):
            continue
        for token in text.split():
            if seen >= expected:
                raise MatrixMarketError("more values than the size line declares",
                                        line=lineno)
            try:
                values[seen] = float(token)
            except ValueError as err:
                raise MatrixMarketError(f"bad value: {err}", line=lineno) from None
            seen += 1
    if symmetry == "symmetric":
        a = np.empty((rows, rows), dtype=np.float64)
        pos = 0
        for j in range(rows):
            count = rows - j
            a[j:, j] = values[pos:pos + count]
            a[j, j:] = values[pos:pos + count]
            pos += count
    else:
        a = values.reshape((rows, rows), order="F")
    return MatrixSPD.from_dense(a)


def write_matrix_market(a: MatrixSPD, target, *, fmt: str | None = None) -> None:
    """Write ``a`` as a MatrixMarket file.

    Default format follows storage: coordinate-symmetric (lower triangle)
    for CSR, array-general for dense.  Values use 17 significant digits so
    they round-trip exactly.
    """
    if fmt is None:
        fmt = "coordinate" if a.storage == "csr" else "array"
    if fmt not in ("coordinate", "array"):
        raise ValueError(f"unknown MatrixMarket format {fmt!r}")
    with _open_text(target, "w") as stream:
        if fmt == "coordinate":
            dense = a.to_dense()
            ii, jj = np.nonzero(dense)
            keep = ii >= jj  # lower triangle, symmetric storage
            ii, jj = ii[keep], jj[keep]
            stream.write("%%MatrixMarket matrix coordinate real symmetric\n")
            stream.write(f"{a.n} {a.n} {ii.size}\n")
            for i, j in zip(ii, jj):
                stream.write(f"{i + 1} {j + 1} {_FMT % dense[i, j]}\n")
        else:
            dense = a.to_dense()
            stream.write("%%MatrixMarket matrix array real general\n")
            stream.write(f"{a.n} {a.n}\n")
            for j in range(a.n):
                for i in range(a.n):
                    stream.write(f"{_FMT % dense[i, j]}\n")


def write_vector_file(v, target) -> None:
    """One decimal per line, 17 significant digits (exact round-trip)."""
    v = as_vector(v, name="vector")
    with _open_text(target, "w") as stream:
        for value in v:
            stream.write(f"{_FMT % value}\n")


def read_vector_file(source) -> np.ndarray:
    """Read a one-number-per-line vector file ('#'/'%' lines are comments)."""
    values = []
    with _open_text(source, "r") as stream:
        for lineno, line in enumerate(stream, start=1):
            text = line.strip()
            if not text or text.startswith(("#", "%")):
                continue
            try:
                values.append(float(text))
            except ValueError as err:
                raise MatrixMarketError(f"bad vector entry: {err}",
                                        line=lineno) from None
    return np.asarray(values, dtype=np.float64)


# ---------------------------------------------------------------------------
# trace and report documents
# ---------------------------------------------------------------------------

TRACE_FORMAT = "cg-trace"
TRACE_VERSION = 1


@dataclass(frozen=True)
class TraceDocument:
    """Self-describing solve record ready for serialization.

    ``iterations`` holds per-iteration scalars (always); ``vectors`` holds
    the per-iteration vectors only when requested, since they dominate file
    size for large problems.  The final iterate is always included: it is
    the answer.
    """

    metadata: dict[str, Any]
    iterations: list[dict[str, Any]]
    final: dict[str, Any]
    vectors: list[dict[str, Any]] | None = None
    verification: dict[str, Any] | None = None

    @classmethod
    def from_solve(cls, problem: QuadraticProblem, config: SolverConfig,
                   trace: IterationTrace, *,
                   problem_description: dict[str, Any] | None = None,
                   report: VerificationReport | None = None,
                   include_vectors: bool = False,
                   timestamp: bool = True) -> "TraceDocument":
        metadata: dict[str, Any] = {
            "problem": problem_description or {"n": problem.n,
                                               "storage": problem.A.storage},
            "config": {
                "stepsize_rule": config.stepsize_rule.value,
                "beta_rule": config.beta_rule.value,
                "gradient_update": config.gradient_update.value,
                "max_iterations": config.max_iterations,
            },
            "grad_tolerance": trace.grad_tolerance,
            "package_version": _package_version(),
        }
        if timestamp:
            metadata["created"] = datetime.now(timezone.utc).isoformat()
        iterations = []
        for rec in trace.records:
            iterations.append({
                "k": rec.k,
                "alpha": rec.alpha,
                "beta": rec.beta,
                "grad_norm": rec.grad_norm(),
                "objective": problem.objective(rec.x),
            })
        final = {
            "iterations": trace.terminated_at,
            "termination_reason": trace.termination_reason.value,
            "grad_norm": trace.final_grad_norm(),
            "objective": problem.objective(trace.final_x),
            "x": [float(v) for v in trace.final_x],
        }
        if trace.breakdown:
            final["breakdown"] = trace.breakdown
        vectors = None
        if include_vectors:
            vectors = [{
                "k": rec.k,
                "x": [float(v) for v in rec.x],
                "g": [float(v) for v in rec.g],
                "d": [float(v) for v in rec.d] if rec.d is not None else None,
            } for rec in trace.records]
        verification = report_to_dict(report) if report is not None else None
        return cls(metadata=metadata, iterations=iterations, final=final,
                   vectors=vectors, verification=verification)

    def to_json(self) -> str:
        doc = {
            "format": TRACE_FORMAT,
            "version": TRACE_VERSION,
            "metadata": self.metadata,
            "iterations": self.iterations,
            "final": self.final,
        }
        if self.vectors is not None:
            doc["vectors"] = self.vectors
        if self.verification is not None:
            doc["verification"] = self.verification
        return json.dumps(doc, indent=2)

    def to_tabular(self) -> str:
        """CSV: metadata as '#' comments, then one row per iteration."""
        lines = []
        for key in ("problem", "config"):
            lines.append(f"# {key}: {json.dumps(self.metadata.get(key))}")
        if "created" in self.metadata:
            lines.append(f"# created: {self.metadata['created']}")
        lines.append(f"# termination: {self.final['termination_reason']} "
                     f"after {self.final['iterations']} iterations")
        lines.append("k,alpha,beta,grad_norm,objective")
        for row in self.iterations:
            beta_txt = "" if row["beta"] is None else _FMT % row["beta"]
            lines.append(",".join([
                str(row["k"]),
                _FMT % row["alpha"],
                beta_txt,
                _FMT % row["grad_norm"],
                _FMT % row["objective"],
            ]))
        return "\n".join(lines) + "\n"


def _package_version() -> str:
    from . import __version__
    return __version__


def write_trace(doc: TraceDocument, target, *, fmt: str = "structured") -> None:
    """Serialize a trace document (``structured`` JSON or ``tabular`` CSV)."""
    if fmt not in ("structured", "tabular"):
        raise ValueError(f"unknown trace format {fmt!r}")
    payload = doc.to_json() + "\n" if fmt == "structured" else doc.to_tabular()
    with _open_text(target, "w") as stream:
        stream.write(payload)


def read_trace(source) -> TraceDocument:
    """Parse a structured trace document written by :func:`write_trace`."""
    with _open_text(source, "r") as stream:
        doc = json.load(stream)
    if doc.get("format") != TRACE_FORMAT:
        raise CgKitError(
            f"not a {TRACE_FORMAT} document (format={doc.get('format')!r})")
    return TraceDocument(metadata=doc["metadata"], iterations=doc["iterations"],
                         final=doc["final"], vectors=doc.get("vectors"),
                         verification=doc.get("verification"))


def report_to_dict(report: VerificationReport, *,
                   include_residuals: bool = True) -> dict[str, Any]:
    """JSON-ready form of a verification report."""
    checks = []
    for c in report.checks:
        entry: dict[str, Any] = {
            "check": c.check,
            "tolerance": c.tolerance,
            "worst": c.worst,
            "passed": c.passed,
            "residual_count": len(c.residuals),
        }
        if c.note:
            entry["note"] = c.note
        if include_residuals:
            entry["residuals"] = [{
                "identity": r.identity,
                "indices": list(r.indices),
                "raw": r.raw,
                "normalized": r.normalized,
                "passed": r.passed,
            } for r in c.residuals]
        checks.append(entry)
    return {
        "passed": report.passed,
        "tolerance_relaxed": report.tolerance_relaxed,
        "condition_estimate": report.condition_estimate,
        "notes": list(report.notes),
        "checks": checks,
    }


def report_from_dict(data: dict[str, Any]) -> VerificationReport:
    """Inverse of :func:`report_to_dict` (residual lists required)."""
    checks = []
    for entry in data["checks"]:
        residuals = tuple(
            IdentityResidual(identity=r["identity"], indices=tuple(r["indices"]),
                             raw=r["raw"], normalized=r["normalized"],
                             passed=r["passed"])
            for r in entry.get("residuals", []))
        checks.append(CheckResult(check=entry["check"], tolerance=entry["tolerance"],
                                  worst=entry["worst"], passed=entry["passed"],
                                  residuals=residuals, note=entry.get("note", "")))
    return VerificationReport(
        checks=tuple(checks), passed=data["passed"],
        tolerance_relaxed=data.get("tolerance_relaxed", False),
        condition_estimate=data.get("condition_estimate"),
        notes=tuple(data.get("notes", ())))
