import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgkit import (
    MatrixMarketError,
    MatrixSPD,
    NotPositiveDefiniteError,
    ProblemSpecError,
    SolverConfig,
    SpectrumSpec,
    SymmetryError,
    solve,
)
from cgkit.problems_io import (
    BuiltinProblemSpec,
    TraceDocument,
    builtin_problem,
    read_matrix_market,
    read_trace,
    read_vector_file,
    report_from_dict,
    report_to_dict,
    write_matrix_market,
    write_trace,
    write_vector_file,
)
from cgkit.verify import run_all_checks

DIAG21_COORD = ("%%MatrixMarket matrix coordinate real symmetric\n"
                "2 2 2\n"
                "1 1 2.0\n"
                "2 2 1.0\n")

DIAG21_ARRAY = ("%%MatrixMarket matrix array real general\n"
                "2 2\n"
                "2.0\n0.0\n0.0\n1.0\n")


class TestBuiltinProblems:
    def test_laplacian1d_matrix(self):
        problem = builtin_problem(BuiltinProblemSpec(family="laplacian1d", n=3))
        expected = [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]]
        np.testing.assert_array_equal(problem.A.to_dense(), expected)
        assert problem.A.storage == "csr"

    def test_hilbert_matrix(self):
        problem = builtin_problem(BuiltinProblemSpec(family="hilbert", n=2))
        np.testing.assert_array_equal(problem.A.to_dense(),
                                      [[1.0, 0.5], [0.5, 1 / 3]])

    def test_hilbert_order_cap(self):
        with pytest.raises(ProblemSpecError):
            BuiltinProblemSpec(family="hilbert", n=13)

    def test_diagonal_known_solution_reproduces_worked_instance(self):
        spec = BuiltinProblemSpec(family="diagonal", n=2,
                                  eigenvalues=(2.0, 1.0),
                                  b_mode="from_known_solution",
                                  known_solution=(1.0, 1.0))
        problem = builtin_problem(spec)
        np.testing.assert_array_equal(problem.b, [-2.0, -1.0])

    def test_diagonal_requires_eigenvalues(self):
        with pytest.raises(ProblemSpecError):
            BuiltinProblemSpec(family="diagonal", n=2)

    def test_random_spd_uses_spectrum(self):
        spec = BuiltinProblemSpec(
            family="random_spd", n=12,
            spectrum=SpectrumSpec(lam_min=1.0, lam_max=9.0, distribution="linear"),
            seed=5, b_mode="random", b_seed=2)
        problem = builtin_problem(spec)
        vals = np.linalg.eigvalsh(problem.A.to_dense())
        assert vals[0] == pytest.approx(1.0, rel=1e-10)
        assert vals[-1] == pytest.approx(9.0, rel=1e-10)

    def test_unknown_family(self):
        with pytest.raises(ProblemSpecError):
            BuiltinProblemSpec(family="toeplitz", n=4)

    def test_hilbert_condition_grows_monotonically(self):
        # direct-eigensolve oracle across the supported orders
        conds = []
        for n in range(2, 13):
            problem = builtin_problem(BuiltinProblemSpec(family="hilbert", n=n))
            vals = np.linalg.eigvalsh(problem.A.to_dense())
            conds.append(vals[-1] / vals[0])
        assert all(b > a for a, b in zip(conds, conds[1:]))

    @pytest.mark.parametrize("family,kw", [
        ("diagonal", dict(n=5, eigenvalues=(2.0, 3.0, 5.0, 8.0, 13.0))),
        ("random_spd", dict(n=20, spectrum=SpectrumSpec(
            lam_min=1.0, lam_max=100.0, distribution="linear"), seed=3)),
    ])
    def test_planted_solution_recovered(self, family, kw):
        x_star = np.linspace(-1.0, 1.0, kw["n"])
        spec = BuiltinProblemSpec(family=family, b_mode="from_known_solution",
                                  known_solution=tuple(x_star), **kw)
        problem = builtin_problem(spec)
        x, trace = solve(problem)
        assert np.linalg.norm(x - x_star) <= 1e-8 * np.linalg.norm(x_star)


class TestMatrixMarketRead:
    def test_coordinate_symmetric(self):
        m = read_matrix_market(io.StringIO(DIAG21_COORD))
        np.testing.assert_array_equal(m.to_dense(), [[2.0, 0.0], [0.0, 1.0]])
        assert m.storage == "csr"

    def test_array_general_equivalent(self):
        m = read_matrix_market(io.StringIO(DIAG21_ARRAY))
        np.testing.assert_array_equal(m.to_dense(), [[2.0, 0.0], [0.0, 1.0]])
        assert m.storage == "dense"

    def test_symmetric_file_mirrors_one_triangle(self):
        text = ("%%MatrixMarket matrix coordinate real symmetric\n"
                "2 2 3\n"
                "1 1 2.0\n"
                "2 1 -0.5\n"
                "2 2 2.0\n")
        m = read_matrix_market(io.StringIO(text))
        np.testing.assert_array_equal(m.to_dense(),
                                      [[2.0, -0.5], [-0.5, 2.0]])

    def test_array_symmetric_lower_triangle(self):
        text = ("%%MatrixMarket matrix array real symmetric\n"
                "2 2\n"
                "2.0\n-0.5\n2.0\n")
        m = read_matrix_market(io.StringIO(text))
        np.testing.assert_array_equal(m.to_dense(),
                                      [[2.0, -0.5], [-0.5, 2.0]])

    def test_integer_field_accepted(self):
        text = ("%%MatrixMarket matrix coordinate integer symmetric\n"
                "2 2 2\n1 1 2\n2 2 1\n")
        m = read_matrix_market(io.StringIO(text))
        np.testing.assert_array_equal(m.to_dense(), [[2.0, 0.0], [0.0, 1.0]])

    def test_complex_field_rejected(self):
        text = DIAG21_COORD.replace("real", "complex")
        with pytest.raises(MatrixMarketError) as info:
            read_matrix_market(io.StringIO(text))
        assert "complex" in str(info.value)
        assert info.value.line == 1

    def test_malformed_header(self):
        with pytest.raises(MatrixMarketError) as info:
            read_matrix_market(io.StringIO("%%NotMatrixMarket nonsense\n"))
        assert info.value.line == 1

    def test_bad_entry_reports_line_number(self):
        text = ("%%MatrixMarket matrix coordinate real symmetric\n"
                "2 2 2\n"
                "1 1 2.0\n"
                "2 Q 1.0\n")
        with pytest.raises(MatrixMarketError) as info:
            read_matrix_market(io.StringIO(text))
        assert info.value.line == 4

    def test_truncated_file_rejected(self):
        text = ("%%MatrixMarket matrix coordinate real symmetric\n"
                "2 2 2\n"
                "1 1 2.0\n")
        with pytest.raises(MatrixMarketError):
            read_matrix_market(io.StringIO(text))

    def test_out_of_range_index(self):
        text = ("%%MatrixMarket matrix coordinate real symmetric\n"
                "2 2 1\n"
                "3 1 2.0\n")
        with pytest.raises(MatrixMarketError) as info:
            read_matrix_market(io.StringIO(text))
        assert info.value.line == 3

    def test_general_file_must_be_symmetric(self):
        text = ("%%MatrixMarket matrix coordinate real general\n"
                "2 2 3\n"
                "1 1 1.0\n"
                "2 1 1.0\n"
                "2 2 1.0\n")
        with pytest.raises(SymmetryError):
            read_matrix_market(io.StringIO(text))

    def test_indefinite_matrix_rejected(self):
        text = ("%%MatrixMarket matrix coordinate real symmetric\n"
                "2 2 3\n"
                "1 1 1.0\n"
                "2 1 2.0\n"
                "2 2 1.0\n")
        with pytest.raises(NotPositiveDefiniteError):
            read_matrix_market(io.StringIO(text))

    def test_rectangular_rejected(self):
        text = ("%%MatrixMarket matrix coordinate real general\n"
                "2 3 1\n"
                "1 1 1.0\n")
        with pytest.raises(MatrixMarketError):
            read_matrix_market(io.StringIO(text))

    def test_binary_stream_accepted_and_left_open(self):
        buf = io.BytesIO(DIAG21_COORD.encode("ascii"))
        m = read_matrix_market(buf)
        np.testing.assert_array_equal(m.to_dense(), [[2.0, 0.0], [0.0, 1.0]])
        assert not buf.closed  # caller's handle survives

    def test_binary_file_handle(self, tmp_path):
        path = tmp_path / "diag.mtx"
        path.write_text(DIAG21_COORD)
        with open(path, "rb") as handle:
            m = read_matrix_market(handle)
        np.testing.assert_array_equal(m.to_dense(), [[2.0, 0.0], [0.0, 1.0]])

    def test_comments_and_blank_lines_skipped(self):
        text = ("%%MatrixMarket matrix coordinate real symmetric\n"
                "% a comment\n"
                "\n"
                "2 2 2\n"
                "% another\n"
                "1 1 2.0\n"
                "2 2 1.0\n")
        m = read_matrix_market(io.StringIO(text))
        np.testing.assert_array_equal(m.to_dense(), [[2.0, 0.0], [0.0, 1.0]])


class TestMatrixMarketRoundTrip:
    def test_csr_roundtrip(self, tmp_path):
        from cgkit.problems_io import _laplacian1d
        a = _laplacian1d(7)
        path = tmp_path / "lap.mtx"
        write_matrix_market(a, path)
        back = read_matrix_market(path)
        np.testing.assert_array_equal(back.to_dense(), a.to_dense())

    def test_dense_roundtrip(self, tmp_path):
        from cgkit import generate_spd
        a = generate_spd(9, SpectrumSpec(lam_min=1.0, lam_max=20.0), seed=4)
        path = tmp_path / "rand.mtx"
        write_matrix_market(a, path)
        back = read_matrix_market(path)
        np.testing.assert_array_equal(back.to_dense(), a.to_dense())

    def test_forced_array_format(self, tmp_path):
        a = MatrixSPD.from_dense(np.diag([2.0, 1.0]))
        path = tmp_path / "diag.mtx"
        write_matrix_market(a, path, fmt="coordinate")
        assert "coordinate" in path.read_text().splitlines()[0]
        back = read_matrix_market(path)
        np.testing.assert_array_equal(back.to_dense(), a.to_dense())


class TestVectorFiles:
    def test_roundtrip(self, tmp_path):
        v = np.array([1.5, -2.25, 1e-17, 3.0])
        path = tmp_path / "b.txt"
        write_vector_file(v, path)
        np.testing.assert_array_equal(read_vector_file(path), v)

    def test_comments_skipped(self):
        got = read_vector_file(io.StringIO("# header\n1.5\n% note\n-2.0\n"))
        np.testing.assert_array_equal(got, [1.5, -2.0])

    def test_bad_entry_reports_line(self):
        with pytest.raises(MatrixMarketError) as info:
            read_vector_file(io.StringIO("1.0\nxyz\n"))
        assert info.value.line == 2

    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False),
                    min_size=1, max_size=20))
    @settings(max_examples=50, deadline=None)
    def test_any_finite_float_roundtrips_exactly(self, values):
        buf = io.StringIO()
        write_vector_file(np.asarray(values), buf)
        buf.seek(0)
        got = read_vector_file(buf)
        np.testing.assert_array_equal(got, np.asarray(values))


class TestTraceDocuments:
    @pytest.fixture
    def solved(self, worked_problem):
        config = SolverConfig()
        x, trace = solve(worked_problem, config=config)
        return worked_problem, config, trace

    def test_structured_roundtrip_is_exact(self, solved, tmp_path):
        problem, config, trace = solved
        doc = TraceDocument.from_solve(problem, config, trace,
                                       include_vectors=True)
        path = tmp_path / "trace.json"
        write_trace(doc, path)
        back = read_trace(path)
        assert back.iterations == doc.iterations
        assert back.final == doc.final
        assert back.vectors == doc.vectors
        assert back.metadata["grad_tolerance"] == doc.metadata["grad_tolerance"]

    def test_tabular_rows_match_hand_values(self, solved):
        problem, config, trace = solved
        doc = TraceDocument.from_solve(problem, config, trace, timestamp=False)
        text = doc.to_tabular()
        lines = text.strip().splitlines()
        header_at = lines.index("k,alpha,beta,grad_norm,objective")
        rows = lines[header_at + 1:]
        assert len(rows) == 2
        k0 = rows[0].split(",")
        assert k0[0] == "0"
        assert k0[1] == "%.17g" % (5 / 9)
        assert k0[2] == ""  # beta undefined at k=0
        assert k0[3] == "%.17g" % math.sqrt(5.0)
        k1 = rows[1].split(",")
        assert k1[1] == "%.17g" % 0.9
        # 17 significant digits reproduce the recorded scalar exactly; the
        # recorded beta itself sits within one ulp of the hand value 4/81
        assert float(k1[2]) == trace.records[1].beta
        assert float(k1[2]) == pytest.approx(4 / 81, rel=1e-15)

    def test_empty_trace_gives_header_only(self, worked_problem):
        config = SolverConfig()
        _, trace = solve(worked_problem, x_0=[1.0, 1.0], config=config)
        doc = TraceDocument.from_solve(worked_problem, config, trace)
        lines = doc.to_tabular().strip().splitlines()
        assert lines[-1] == "k,alpha,beta,grad_norm,objective"
        assert any(line.startswith("#") for line in lines)

    def test_timestamp_suppression(self, solved):
        problem, config, trace = solved
        with_ts = TraceDocument.from_solve(problem, config, trace)
        without = TraceDocument.from_solve(problem, config, trace,
                                           timestamp=False)
        assert "created" in with_ts.metadata
        assert "created" not in without.metadata

    def test_vectors_excluded_by_default(self, solved):
        problem, config, trace = solved
        doc = TraceDocument.from_solve(problem, config, trace)
        assert doc.vectors is None
        assert "x" in doc.final  # the answer itself is always present

    def test_final_solution_recoverable(self, solved):
        problem, config, trace = solved
        doc = TraceDocument.from_solve(problem, config, trace)
        np.testing.assert_allclose(doc.final["x"], [1.0, 1.0], rtol=1e-15)

    def test_verification_section_roundtrip(self, solved, tmp_path):
        problem, config, trace = solved
        report = run_all_checks(trace, problem)
        doc = TraceDocument.from_solve(problem, config, trace, report=report)
        path = tmp_path / "report.json"
        write_trace(doc, path)
        data = json.loads(path.read_text())
        assert data["verification"]["passed"] is True
        restored = report_from_dict(data["verification"])
        assert restored == report

    def test_report_dict_roundtrip(self, solved):
        problem, config, trace = solved
        report = run_all_checks(trace, problem)
        assert report_from_dict(report_to_dict(report)) == report

    def test_unknown_format_rejected(self, solved):
        problem, config, trace = solved
        doc = TraceDocument.from_solve(problem, config, trace)
        with pytest.raises(ValueError):
            write_trace(doc, io.StringIO(), fmt="yaml")
