import csv
import io

import numpy as np
import pytest

from lgdecay import DomainError, Exponential, Toy, k3, scan_grid, scan_line
from lgdecay.cli import main


def test_exponential_line_is_flat():
    line = scan_line(Exponential(gamma=1.0), 0.2, 2.0, (0.3, 5.0), 200)
    assert line.max_deviation < 1e-12
    assert len(line.points) == 200
    assert (np.diff(line.t2) > 0).all()


def test_toy_line_violates_from_above():
    line = scan_line(Toy(), 0.0, 2.0, (0.01, 3.0), 300)
    assert line.k3.max() > 1.0
    # short-time end of the line sits above the bound
    assert (line.k3[:10] > 1.0).all()


def test_power_tail_line_below_one(polyfluorene):
    tau = polyfluorene.tau
    line = scan_line(polyfluorene, 0.0, 2.0, (0.05 * tau, 20 * tau), 2000)
    assert (line.k3 <= 1.0 + 1e-12).all()
    assert 1e-6 <= line.max_deviation <= 1e-4


def test_line_errors():
    with pytest.raises(DomainError):
        scan_line(Toy(), 0.0, 1.0, (0.1, 1.0), 10)
    with pytest.raises(DomainError):
        scan_line(Toy(), 0.5, 2.0, (0.1, 1.0), 10)
    with pytest.raises(DomainError):
        scan_line(Toy(), 0.0, 2.0, (0.1, 1.0), 1)


def test_exponential_grid_zero():
    axis = np.linspace(0.1, 6.0, 60)
    grid = scan_grid(Exponential(gamma=1.0), 0.05, axis, axis)
    assert np.nanmax(np.abs(grid.values)) < 1e-12
    assert abs(grid.max_point[2]) < 1e-12 and abs(grid.min_point[2]) < 1e-12


def test_grid_mask_extremes_and_direct_calls():
    m = Toy()
    t2 = np.linspace(0.2, 4.0, 40)
    t3 = np.linspace(0.2, 4.0, 45)
    grid = scan_grid(m, 0.1, t2, t3)
    for i, a in enumerate(t2):
        for j, b in enumerate(t3):
            v = grid.values[i, j]
            if b <= a:
                assert np.isnan(v)
            else:
                # bit-identical with a direct evaluation
                assert v == k3(m, 0.1, a, b).k3 - 1.0
    defined = grid.values[grid.defined]
    assert grid.max_point[2] == defined.max() and grid.min_point[2] == defined.min()


def test_grid_tie_break_smallest_t2_then_t3():
    axis = np.linspace(0.1, 2.0, 20)
    grid = scan_grid(Exponential(gamma=1.0), 0.0, axis, axis)
    # exponential values are all (numerically) equal: check tie handling directly
    flat = np.where(np.isnan(grid.values), np.nan, 0.0)
    from lgdecay.scanner import _extreme

    assert _extreme(flat, axis, axis, 1.0)[:2] == (axis[0], axis[1])
    assert _extreme(flat, axis, axis, -1.0)[:2] == (axis[0], axis[1])


def test_grid_parallel_fill_identical(tunneling_interp):
    axis = np.linspace(0.3, 12.0, 80)
    a = scan_grid(tunneling_interp, 0.2, axis, axis, workers=1)
    b = scan_grid(tunneling_interp, 0.2, axis, axis, workers=4)
    assert np.array_equal(a.values, b.values, equal_nan=True)
    assert a.max_point == b.max_point and a.min_point == b.min_point


def test_grid_masks_failing_rows(tunneling_interp):
    # the interpolant stops at its t_max: rows reaching beyond it are masked
    t_max = tunneling_interp.t_max
    t2 = np.array([1.0, 2.0])
    t3 = np.array([3.0, t_max + 5.0])
    grid = scan_grid(tunneling_interp, 0.5, t2, t3)
    assert grid.errors and np.isnan(grid.values).all()


def test_grid_errors():
    with pytest.raises(DomainError):
        scan_grid(Toy(), 0.5, [0.4, 1.0], [1.0, 2.0])
    with pytest.raises(DomainError):
        scan_grid(Toy(), 0.0, [1.0, 0.5], [1.0, 2.0])


def test_extremes_match_csv_rescan(tmp_path):
    out = tmp_path / "grid.csv"
    code = main(["scan-grid", "--model.kind", "toy", "--t1", "0.1", "--n_t2", "50", "--n_t3", "50",
                 "-o", str(out)])
    assert code == 0
    summary = tmp_path / "grid.json"
    main(["scan-grid", "--model.kind", "toy", "--t1", "0.1", "--n_t2", "50", "--n_t3", "50",
          "--format", "json", "-o", str(summary)])
    import json

    doc = json.loads(summary.read_text())
    rows = [r for r in out.read_text().splitlines() if not r.startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(rows)))
    cells = [(float(r["t2"]), float(r["t3"]), float(r["k3m1"])) for r in reader]
    assert all(t3 > t2 for t2, t3, _ in cells)
    best = max(cells, key=lambda c: (c[2], -c[0], -c[1]))
    worst = min(cells, key=lambda c: (c[2], c[0], c[1]))
    assert doc["extremes"]["max"] == {"t2": best[0], "t3": best[1], "value": best[2]}
    assert doc["extremes"]["min"] == {"t2": worst[0], "t3": worst[1], "value": worst[2]}
