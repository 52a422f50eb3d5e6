import csv
import io
import json

import numpy as np
import pytest

from ldpcsdp.baseline_lp import (GRID_FEASIBLE, DiscretizationGrid, discretized_optimize, grid_sweep,
                                 max_violation, write_sweep_csv)
from ldpcsdp.ensemble import InvalidInput
from ldpcsdp.sosrep import optimize_design

from conftest import check_monomial

SLACK = 1e-7  # solver gap tolerance


def test_grid_construction():
    g = DiscretizationGrid.build(0.5, 4)
    assert g.points == (0.125, 0.25, 0.375, 0.5)
    c = DiscretizationGrid.build(0.5, 8, "clustered")
    assert c.points[-1] == 0.5 and all(b > a for a, b in zip(c.points, c.points[1:]))
    assert c.points[0] < g.points[0]
    with pytest.raises(InvalidInput):
        DiscretizationGrid(())
    with pytest.raises(InvalidInput):
        DiscretizationGrid((0.2, 0.1))
    with pytest.raises(InvalidInput):
        DiscretizationGrid((0.0, 0.1))
    with pytest.raises(InvalidInput):
        DiscretizationGrid.build(0.5, 0)


def test_grid_beyond_eps_rejected():
    with pytest.raises(InvalidInput):
        discretized_optimize(check_monomial(5), 0.3, 7, DiscretizationGrid((0.1, 0.4)))


def test_x5_n1000_close_to_exact():
    rho = check_monomial(5)
    exact = optimize_design(rho, 0.49, 7, with_threshold=False)
    lp = discretized_optimize(rho, 0.49, 7, DiscretizationGrid.build(0.49, 1000))
    assert lp.exactness == GRID_FEASIBLE
    assert exact.objective - SLACK <= lp.objective <= exact.objective + 1e-3


def test_single_point_grid_is_loose():
    rho = check_monomial(5)
    exact = optimize_design(rho, 0.49, 7, with_threshold=False)
    lp = discretized_optimize(rho, 0.49, 7, DiscretizationGrid((0.49,)))
    assert lp.objective > exact.objective + 0.05
    assert lp.extras["max_violation"] > 0


def test_sweep_monotone_and_violation():
    rows = grid_sweep(check_monomial(5), 0.49, 7, [10, 100, 1000])
    objs = [r.objective for r in rows]
    assert all(b <= a + SLACK for a, b in zip(objs, objs[1:]))
    assert rows[0].max_violation > 0


def test_nested_grids_monotone():
    rho = check_monomial(4)
    coarse = DiscretizationGrid.build(0.56, 10)
    fine = DiscretizationGrid.build(0.56, 40)  # contains every coarse point
    assert set(np.round(coarse.points, 12)) <= set(np.round(fine.points, 12))
    a = discretized_optimize(rho, 0.56, 7, coarse).objective
    b = discretized_optimize(rho, 0.56, 7, fine).objective
    assert b <= a + SLACK


def test_large_n_lambda_approaches_exact():
    rho = check_monomial(5)
    exact = optimize_design(rho, 0.49, 7, with_threshold=False)
    lp = discretized_optimize(rho, 0.49, 7, DiscretizationGrid.build(0.49, 2000))
    assert max(abs(exact.lam[d] - lp.lam[d]) for d in range(2, 8)) <= 1e-2


def test_exact_design_has_no_violation():
    exact = optimize_design(check_monomial(5), 0.49, 7, with_threshold=False)
    assert max_violation(exact.lam, exact.rho, exact.epsilon) <= 1e-6


def test_sweep_csv_export():
    rows = grid_sweep(check_monomial(3), 0.69, 7, [10, 50], workers=2)
    buf = io.StringIO()
    write_sweep_csv(rows, buf)
    parsed = list(csv.reader(io.StringIO(buf.getvalue())))
    assert parsed[0] == ["N", "objective", "rate", "max_violation", "lambda_json"]
    assert [int(r[0]) for r in parsed[1:]] == [10, 50]
    assert abs(sum(json.loads(parsed[1][4]).values()) - 1) < 1e-12
    with pytest.raises(InvalidInput):
        grid_sweep(check_monomial(3), 0.69, 7, [])
