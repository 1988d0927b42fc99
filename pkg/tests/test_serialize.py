"""CSV / JSON round-trips and the versioned table format."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from srmra.em import EMResult
from srmra.errors import ConfigError
from srmra.invariants import fourier_invariants
from srmra.serialize import (
    SCHEMAS,
    batch_from_json,
    batch_to_csv,
    batch_to_json,
    em_result_to_json,
    format_float,
    load_container,
    parse_float,
    prior_from_json,
    prior_to_json,
    read_table,
    schema_line,
    signal_from_json,
    signal_to_csv,
    signal_to_json,
    triple_from_json,
    triple_to_json,
    vectors_from_csv,
    write_json,
    write_table,
)
from srmra.signal import (
    HighResSignal,
    ModelParams,
    ObservationBatch,
    PriorSpec,
    generate_batch,
    one_over_f_profile,
    project_bandlimit,
)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips_positionally(v):
    s = format_float(v)
    assert "e" not in s and "E" not in s
    assert parse_float(s) == v


def test_format_float_specials():
    assert format_float(float("nan")) == "nan"
    assert format_float(float("inf")) == "inf"
    assert format_float(float("-inf")) == "-inf"
    assert format_float(1e-7) == "0.0000001"
    assert format_float(2.0) == "2.0"


def test_signal_csv_round_trip(tmp_path):
    path = tmp_path / "sig.csv"
    values = np.random.default_rng(0).standard_normal(9)
    signal_to_csv(HighResSignal(values=values), path)
    back = vectors_from_csv(path)
    assert back.shape == (1, 9)
    assert np.array_equal(back[0], values)


def test_batch_csv_round_trip(tmp_path):
    path = tmp_path / "batch.csv"
    x = HighResSignal(values=np.random.default_rng(1).standard_normal(12))
    batch = generate_batch(x, ModelParams(M=12, L=4, sigma=0.7, N=8, seed=3))
    batch_to_csv(batch, path)
    back = vectors_from_csv(path)
    assert np.array_equal(back, batch.samples)


def test_vectors_from_csv_rejects_ragged(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1.0,2.0\n3.0\n")
    with pytest.raises(ConfigError):
        vectors_from_csv(path)


def test_vectors_from_csv_rejects_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("\n")
    with pytest.raises(ConfigError):
        vectors_from_csv(path)


def test_signal_json_round_trip():
    raw = np.random.default_rng(2).standard_normal(8)
    for bl in (None, 3):
        values = raw if bl is None else project_bandlimit(raw, bl)
        sig = HighResSignal(values=values, bandlimit=bl)
        back = signal_from_json(signal_to_json(sig))
        assert np.array_equal(back.values, values)
        assert back.bandlimit == bl


def test_batch_json_round_trip():
    x = HighResSignal(values=np.random.default_rng(3).standard_normal(8))
    batch = generate_batch(x, ModelParams(M=8, L=2, sigma=0.4, N=5, seed=9))
    back = batch_from_json(batch_to_json(batch))
    assert np.array_equal(back.samples, batch.samples)
    assert back.params == batch.params
    assert np.array_equal(back.true_shifts, batch.true_shifts)

    stripped = ObservationBatch(samples=batch.samples, params=batch.params)
    back = batch_from_json(batch_to_json(stripped))
    assert back.true_shifts is None


def test_load_container_discriminates(tmp_path):
    x = HighResSignal(values=np.arange(6.0))
    write_json(signal_to_json(x), tmp_path / "sig.json")
    assert isinstance(load_container(tmp_path / "sig.json"), HighResSignal)

    batch = generate_batch(x, ModelParams(M=6, L=3, sigma=0.1, N=2, seed=0))
    write_json(batch_to_json(batch), tmp_path / "batch.json")
    assert isinstance(load_container(tmp_path / "batch.json"), ObservationBatch)

    write_json({"nope": 1}, tmp_path / "other.json")
    with pytest.raises(ConfigError):
        load_container(tmp_path / "other.json")


def test_prior_json_round_trip():
    circ = PriorSpec.circulant(one_over_f_profile(8))
    assert prior_from_json(prior_to_json(circ)) == circ

    a = np.random.default_rng(4).standard_normal((5, 5))
    dense = PriorSpec.dense(a @ a.T + 5 * np.eye(5))
    assert prior_from_json(prior_to_json(dense)) == dense

    with pytest.raises(ConfigError):
        prior_from_json({"form": "sparse"})


def test_triple_json_round_trip():
    triple = fourier_invariants(np.random.default_rng(5).standard_normal(6))
    back = triple_from_json(triple_to_json(triple))
    assert back.mean == triple.mean
    assert np.array_equal(back.power_spectrum, triple.power_spectrum)
    assert np.array_equal(back.bispectrum, triple.bispectrum)


def test_em_result_json_fields():
    est = project_bandlimit(np.arange(4.0), 1)
    res = EMResult(
        estimate=HighResSignal(values=est, bandlimit=1),
        log_posterior_trace=np.array([-5.0, -4.0, -3.9]),
        iterations=2,
        converged=True,
        restart_index=1,
    )
    d = em_result_to_json(res)
    assert d["estimate"] == [float(v) for v in est]
    assert d["bandlimit"] == 1
    assert d["log_posterior_trace"] == [-5.0, -4.0, -3.9]
    assert d["iterations"] == 2 and d["converged"] is True and d["restart_index"] == 1


def test_write_json_stable_layout(tmp_path):
    path = tmp_path / "x.json"
    write_json({"b": 1, "a": 2}, path)
    text = path.read_text()
    assert text == '{\n  "a": 2,\n  "b": 1\n}\n'


# --- versioned tables ---------------------------------------------------------


def test_schema_line():
    assert schema_line("results") == "# schema: srmra/results/v1"
    with pytest.raises(ConfigError):
        schema_line("mystery")


SAMPLE_ROWS = {
    "results": [("exp1", 0, 1.5, 120, 15, 10000, 0.125, 42, True, 3.25)],
    "per_frequency": [(0, 0.001, 0.002), (1, float("nan"), 1.0)],
    "overlay": [(0, 1.0, 0.5, 0.25)],
    "snr_curve": [(10.0, 0.05, 5)],
    "error_vs_L": [(60, 12, 0.3, 5)],
    "identifiability": [(12, 2, 3.0769230769230770906, 24, True)],
}


def test_write_read_table_every_kind(tmp_path):
    for kind, rows in SAMPLE_ROWS.items():
        path = tmp_path / f"{kind}.csv"
        write_table(path, kind, rows)
        got_kind, cols, got_rows = read_table(path)
        assert got_kind == kind
        assert cols == SCHEMAS[kind]
        assert len(got_rows) == len(rows)
        for want, got in zip(rows, got_rows):
            assert all(isinstance(c, str) for c in got)
            for w, g in zip(want, got):
                if isinstance(w, bool):
                    assert g == ("true" if w else "false")
                elif isinstance(w, float):
                    assert (parse_float(g) == w
                            or (np.isnan(w) and np.isnan(parse_float(g))))
                elif isinstance(w, int):
                    assert int(g) == w
                else:
                    assert g == w


def test_write_table_accepts_dict_rows(tmp_path):
    path = tmp_path / "t.csv"
    write_table(path, "snr_curve",
                [{"snr": 2.0, "median_relative_error": 0.5, "n_trials": 3}])
    _, _, rows = read_table(path)
    assert rows == [["2.0", "0.5", "3"]]


def test_write_table_rejects_short_row(tmp_path):
    with pytest.raises(ConfigError):
        write_table(tmp_path / "t.csv", "overlay", [(1.0, 2.0)])


def test_read_table_diagnostics(tmp_path):
    p = tmp_path / "t.csv"

    p.write_text("position,truth,baseline,estimate\n")
    with pytest.raises(ConfigError, match="missing schema header"):
        read_table(p)

    p.write_text("# schema: srmra/overlay/v2\nposition,truth,baseline,estimate\n")
    with pytest.raises(ConfigError, match="unsupported schema version"):
        read_table(p)

    p.write_text("# schema: srmra/mystery/v1\na,b\n")
    with pytest.raises(ConfigError, match="unknown table kind"):
        read_table(p)

    p.write_text("# schema: srmra/overlay/v1\nposition,truth\n")
    with pytest.raises(ConfigError, match="do not match"):
        read_table(p)

    p.write_text("# schema: srmra/overlay/v1\nposition,truth,baseline,estimate\n"
                 "0,1.0,2.0,3.0\n0,1.0\n")
    with pytest.raises(ConfigError, match=r":4: expected 4 cells"):
        read_table(p)


def test_read_table_skips_blank_lines(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("# schema: srmra/overlay/v1\nposition,truth,baseline,estimate\n"
                 "0,1.0,2.0,3.0\n\n1,1.5,2.5,3.5\n\n")
    _, _, rows = read_table(p)
    assert len(rows) == 2
