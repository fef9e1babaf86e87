import math

import numpy as np
import pytest

from rtmg import cli, harness, reference
from rtmg import multigrid as mg
from rtmg.errors import ConfigurationError, ConvergenceError
from rtmg.harness import ExperimentSpec, TableRow


def conv_spec(**kw):
    base = dict(kind="convergence", domain_tag="square", problem="darcy", levels=(2, 3, 4))
    base.update(kw)
    return ExperimentSpec(**base)


@pytest.fixture(scope="module")
def darcy_rows():
    return harness.run_convergence(conv_spec())


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        ExperimentSpec(kind="timing")
    with pytest.raises(ConfigurationError):
        ExperimentSpec(levels=(0, 1))
    with pytest.raises(ConfigurationError):
        ExperimentSpec(levels=(8,))
    with pytest.raises(ConfigurationError):
        ExperimentSpec(m_values=(0,))
    assert ExperimentSpec(domain_tag="lshape").expected_alpha == pytest.approx(2 / 3)
    cfg = ExperimentSpec(cycle="v", seed=7).config(m=5)
    assert (cfg.cycle, cfg.m1, cfg.m2, cfg.power_iter.seed) == ("V", 5, 5, 7)


def test_rates_recomputable(darcy_rows):
    assert darcy_rows[0].rate_u is None and darcy_rows[0].rate_p is None
    for prev, cur in zip(darcy_rows, darcy_rows[1:]):
        assert abs(cur.rate_u - math.log2(prev.e_u / cur.e_u)) <= 1e-12
        assert abs(cur.rate_p - math.log2(prev.e_p / cur.e_p)) <= 1e-12
    assert harness.rate(0.3, 0.3) == 0.0


def test_darcy_square_rates(darcy_rows):
    row = darcy_rows[2]
    assert row.h == 1 / 16
    assert row.rate_u == pytest.approx(2.0, abs=0.05)
    assert row.rate_p == pytest.approx(1.0, abs=0.02)


def test_darcy_square_first_row_values(darcy_rows):
    # published row h = 1/4: (4.213e-2, 3.462e-1)
    row = darcy_rows[0]
    assert row.e_u == pytest.approx(4.213e-2, rel=0.02)
    assert row.e_p == pytest.approx(3.462e-1, rel=0.02)


def test_cd_square_row_values():
    # published row h = 1/16: (5.904e-3, 1.990, 8.600e-2, 1.006)
    row = harness.run_convergence(conv_spec(problem="cd", levels=(3, 4)))[-1]
    assert row.rate_u == pytest.approx(1.990, abs=0.05)
    assert row.rate_p == pytest.approx(1.006, abs=0.02)
    assert row.e_u == pytest.approx(5.904e-3, rel=0.02)
    assert row.e_p == pytest.approx(8.600e-2, rel=0.02)


def test_mg_solver_matches_direct(darcy_rows):
    rows = harness.run_convergence(conv_spec(solver="mg", levels=(2, 3),
                                             mg_config=mg.MGConfig(m1=20, m2=20)))
    for a, b in zip(rows, darcy_rows):
        assert a.e_u == pytest.approx(b.e_u, rel=1e-8)
        assert a.e_p == pytest.approx(b.e_p, rel=1e-8)
        assert a.cycles == len(a.history) > 0


def test_csv_output(darcy_rows, tmp_path):
    text = harness.emit(darcy_rows[:1], "csv", tmp_path / "one.csv")
    lines = text.splitlines()
    assert lines[0] == "h,e_u,rate_u,e_p,rate_p"
    assert lines[1].startswith("2.500e-01,")
    assert (tmp_path / "one.csv").read_text() == text
    fields = harness.format_csv(darcy_rows).splitlines()[2].split(",")
    assert all("e" in f for f in fields)
    assert float(fields[1]) == pytest.approx(darcy_rows[1].e_u, rel=1e-3)


def test_markdown_convergence(darcy_rows):
    md = harness.format_markdown(darcy_rows)
    assert md.splitlines()[2].startswith("| 1/4 |")
    assert len(md.splitlines()) == 2 + len(darcy_rows)


def contraction_rows():
    return [TableRow(m=m, values=[0.9 / m * 10, 0.91 / m * 10], levels=[1, 2]) for m in (10, 20, 40, 80)]


def test_markdown_contraction_columns():
    md = harness.format_markdown(contraction_rows()).splitlines()
    assert md[0] == "| m | k=1 | k=2 |"
    assert md[2] == "| 10 | 0.90 | 0.91 |"


def test_plot_data_shape():
    data = harness.plot_data(contraction_rows())
    assert set(data) == {1, 2}
    assert all(len(v) == 4 for v in data.values())
    assert harness.loglog_slope(data[1]) == pytest.approx(-1.0)
    with pytest.raises(ConfigurationError):
        harness.plot_data([TableRow(h=0.5, e_u=1, e_p=1)])


def test_emit_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        harness.emit([], "csv")
    with pytest.raises(ConfigurationError):
        harness.emit(contraction_rows(), "xml")


@pytest.fixture(scope="module")
def w_square_rows():
    spec = ExperimentSpec(kind="contraction", levels=(1, 2), m_values=(10, 20, 40, 80))
    return harness.run_contraction(spec)


def test_contraction_table_layout(w_square_rows):
    assert [r.m for r in w_square_rows] == [10, 20, 40, 80]
    assert all(len(r.values) == 2 and len(r.history) == 2 for r in w_square_rows)
    text = harness.format_plot_data(w_square_rows)
    assert text.count("# k=") == 2


def test_contraction_values_w_square(w_square_rows):
    for r in w_square_rows:
        for k, v in zip(r.levels, r.values):
            assert v == pytest.approx(reference.contraction_reference("unit_square", "darcy", "W", r.m, k),
                                      abs=0.08)


def test_plot_slope_at_large_m(w_square_rows):
    # decay ~ (m1 m2)^(-1/2) = 1/m for full regularity
    pts = harness.plot_data(w_square_rows)[2][-2:]
    assert harness.loglog_slope(pts) == pytest.approx(-1.0, abs=0.25)


def test_vcycle_m80():
    spec = ExperimentSpec(kind="contraction", cycle="V", levels=(2,), m_values=(80,))
    rows = harness.run_contraction(spec)
    assert rows[0].values[0] == pytest.approx(0.25, abs=0.08)


def test_single_level_and_failed_cells(monkeypatch):
    spec = ExperimentSpec(kind="contraction", levels=(1,), m_values=(10, 20))
    calls = []

    def flaky(state, level, return_history=False):
        calls.append(state.config.m1)
        if state.config.m1 == 20:
            raise ConvergenceError("oscillating", [0.5, 0.6])
        return (0.5, [0.5]) if return_history else 0.5

    monkeypatch.setattr(mg, "contraction_number", flaky)
    rows = harness.run_contraction(spec)
    assert [r.values for r in rows] == [[0.5], [None]]
    assert rows[1].history == [[0.5, 0.6]]
    assert harness.format_markdown(rows).splitlines()[0] == "| m | k=1 |"
    assert "fail" in harness.format_markdown(rows)


def test_reruns_are_identical():
    spec = ExperimentSpec(kind="contraction", levels=(1, 2), m_values=(10,), seed=3)
    a = harness.format_csv(harness.run_contraction(spec))
    b = harness.format_csv(harness.run_contraction(spec))
    assert a == b


def test_wrong_kind():
    with pytest.raises(ConfigurationError):
        harness.run_convergence(ExperimentSpec(kind="contraction"))
    with pytest.raises(ConfigurationError):
        harness.run_contraction(ExperimentSpec(kind="convergence"))


# --- command line ------------------------------------------------------------

def test_parse_levels():
    assert cli.parse_levels("2..5") == [2, 3, 4, 5]
    assert cli.parse_levels("3,1") == [3, 1]
    import argparse
    with pytest.raises(argparse.ArgumentTypeError):
        cli.parse_levels("5..2")


def test_cli_convergence(tmp_path):
    out = tmp_path / "t.csv"
    code = cli.main(["convergence", "--levels", "2..3", "--format", "csv", "--out", str(out), "--quiet",
                     "--dump-mesh", str(tmp_path / "mesh"), "--dump-matrices", str(tmp_path / "mat")])
    assert code == 0
    assert out.read_text().splitlines()[0] == "h,e_u,rate_u,e_p,rate_p"
    assert (tmp_path / "mesh" / "mesh_level3.txt").exists()
    assert (tmp_path / "mat" / "K_level2.txt").exists()


def test_cli_contraction_history(tmp_path, capsys):
    hist = tmp_path / "h.csv"
    plot = tmp_path / "p.txt"
    code = cli.main(["contraction", "--levels", "1", "--m", "10", "--quiet", "--history", str(hist),
                     "--plot-data", str(plot)])
    assert code == 0
    assert "| 10 |" in capsys.readouterr().out
    assert hist.read_text().splitlines()[0] == "experiment,cycle,value"
    assert plot.read_text().startswith("# k=1")


def test_cli_mg_history(tmp_path):
    hist = tmp_path / "h.csv"
    code = cli.main(["convergence", "--levels", "2", "--solver", "mg", "--m", "20", "--quiet",
                     "--history", str(hist), "--out", str(tmp_path / "o.md")])
    assert code == 0
    assert hist.read_text().splitlines()[1].startswith("level2,1,")


def test_check_logic():
    spec = conv_spec(levels=(2, 3))
    exact = [TableRow(h=h, e_u=u, e_p=p, level=i + 2)
             for i, (h, u, p) in enumerate(reference.CONVERGENCE[("unit_square", "darcy")][:2])]
    assert cli.check_convergence(spec, exact) == []
    exact[1].e_p *= 1.05
    assert len(cli.check_convergence(spec, exact)) == 1
    cspec = ExperimentSpec(kind="contraction", levels=(1, 2), m_values=(10,))
    rows = [TableRow(m=10, values=[0.80, None], levels=[1, 2])]
    assert cli.check_contraction(cspec, rows) == ["m=10 k=2: no estimate"]
    rows[0].values = [0.95, 0.81]
    assert len(cli.check_contraction(cspec, rows)) == 1


def test_cli_check_exit_code(monkeypatch):
    monkeypatch.setattr(cli, "check_convergence", lambda spec, rows: ["mismatch"])
    assert cli.main(["convergence", "--levels", "2", "--check", "--quiet", "--out", "/dev/null"]) == 1
    monkeypatch.setattr(cli, "check_convergence", lambda spec, rows: [])
    assert cli.main(["convergence", "--levels", "2", "--check", "--quiet", "--out", "/dev/null"]) == 0


def test_cli_bad_arguments():
    with pytest.raises(SystemExit):
        cli.main(["convergence", "--levels", "x..y"])
    assert cli.main(["convergence", "--levels", "0..2", "--quiet"]) == 2
