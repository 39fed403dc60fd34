import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steercomp.errors import ContractError, DataError, SchemaError
from steercomp.telemetry import COLUMNS, TelemetryLog, export_csv, ingest_csv

from conftest import make_log

HEADER = ",".join(COLUMNS)


def write_csv(path, header, rows):
    path.write_text(header + "\n" + "\n".join(",".join(str(v) for v in r) for r in rows) + "\n")


def row(t, base=0.0):
    vals = [t] + [base + 0.1 * j for j in range(1, len(COLUMNS))]
    return vals


def test_three_rows_on_grid_are_kept(tmp_path):
    p = tmp_path / "log.csv"
    rows = [row(0.0), row(0.05, 1.0), row(0.1, 2.0)]
    write_csv(p, HEADER, rows)
    log = ingest_csv(p, 0.05)
    assert len(log) == 3
    np.testing.assert_array_equal(log.data, np.array(rows, dtype=float))


def test_irregular_rows_are_interpolated(tmp_path):
    p = tmp_path / "log.csv"
    write_csv(p, HEADER, [row(0.0, 0.0), row(0.07, 0.7), row(0.12, 2.0)])
    log = ingest_csv(p, 0.05)
    np.testing.assert_allclose(log.t, [0.0, 0.05, 0.10], atol=1e-12)
    # steer_cmd column: 0.1 + base
    a, b, c = 0.1, 0.8, 2.1
    expected_05 = a + (b - a) * (0.05 / 0.07)
    expected_10 = b + (c - b) * (0.03 / 0.05)
    assert log.column("steer_cmd")[1] == pytest.approx(expected_05, abs=1e-12)
    assert log.column("steer_cmd")[2] == pytest.approx(expected_10, abs=1e-12)


def test_missing_required_column_is_named(tmp_path):
    p = tmp_path / "log.csv"
    cols = [c for c in COLUMNS if c != "steer_meas"]
    write_csv(p, ",".join(cols), [[0.0] * len(cols), [0.05] + [0.0] * (len(cols) - 1)])
    with pytest.raises(SchemaError, match="steer_meas"):
        ingest_csv(p)


def test_turning_radius_may_be_absent(tmp_path):
    p = tmp_path / "log.csv"
    cols = [c for c in COLUMNS if c != "turning_radius"]
    write_csv(p, ",".join(cols), [[0.0] + [1.0] * (len(cols) - 1), [0.05] + [1.0] * (len(cols) - 1)])
    log = ingest_csv(p)
    assert np.all(np.isnan(log.column("turning_radius")))


def test_non_monotone_time_reports_row(tmp_path):
    p = tmp_path / "log.csv"
    write_csv(p, HEADER, [row(0.0), row(0.1), row(0.05)])
    with pytest.raises(DataError, match="row 3"):
        ingest_csv(p)


def test_unparseable_cell_reports_row_and_column(tmp_path):
    p = tmp_path / "log.csv"
    bad = row(0.05)
    bad[2] = "abc"
    write_csv(p, HEADER, [row(0.0), bad])
    with pytest.raises(DataError, match=r"row 2.*steer_meas"):
        ingest_csv(p)


def test_degree_columns_are_converted(tmp_path):
    p = tmp_path / "log.csv"
    header = HEADER.replace("steer_cmd", "steer_cmd_deg")
    r0, r1 = row(0.0), row(0.05)
    r0[1], r1[1] = 180.0, 90.0
    write_csv(p, header, [r0, r1])
    log = ingest_csv(p)
    np.testing.assert_allclose(log.column("steer_cmd"), [math.pi, math.pi / 2])


def test_export_header_is_canonical(tmp_path, synthetic_log):
    p = tmp_path / "out.csv"
    export_csv(synthetic_log, p)
    assert p.read_text().splitlines()[0] == HEADER


def test_export_empty_log_fails(tmp_path):
    empty = TelemetryLog(0.05, np.empty((0, len(COLUMNS))))
    with pytest.raises(ContractError):
        export_csv(empty, tmp_path / "x.csv")


def test_round_trip_100_frames(tmp_path):
    log = make_log(100)
    p = tmp_path / "rt.csv"
    export_csv(log, p)
    back = ingest_csv(p, log.sample_period)
    diff = np.abs(np.nan_to_num(back.data, nan=0.0) - np.nan_to_num(log.data, nan=0.0))
    assert diff.max() < 1e-9
    np.testing.assert_array_equal(np.isnan(back.data), np.isnan(log.data))


def test_round_trip_of_simulated_log(tmp_path):
    from steercomp.plant import ScenarioConfig, simulate_training_log

    log = simulate_training_log(ScenarioConfig(seed=4), "dlc")
    p = tmp_path / "sim.csv"
    export_csv(log, p)
    back = ingest_csv(p)
    mask = ~np.isnan(log.data)
    assert np.max(np.abs(back.data[mask] - log.data[mask])) < 1e-9


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(0.01, 0.09), min_size=2, max_size=30),
    st.floats(0.0, 5.0),
)
def test_resampled_times_stay_within_recorded_span(tmp_path_factory, gaps, t0):
    times = t0 + np.concatenate([[0.0], np.cumsum(gaps)])
    p = tmp_path_factory.mktemp("rs") / "log.csv"
    write_csv(p, HEADER, [row(t) for t in times])
    try:
        log = ingest_csv(p, 0.05)
    except Exception as exc:  # span shorter than one period
        assert "span" in str(exc)
        return
    assert log.t[0] >= times[0] - 1e-12
    assert log.t[-1] <= times[-1] + 1e-12
    assert np.all(np.abs(np.diff(log.t) - 0.05) <= 1e-6)
