"""On-disk formats: parsing, round trips, canonical serialization."""

import json
import math

import numpy as np
import pytest

from dpcp import fileio
from dpcp.calibrate import CalibConfig, Threshold
from dpcp.errors import InputFormatError
from dpcp.predict import PredictionSet


def make_threshold(cutoff=0.5):
    return Threshold(
        cutoff=cutoff,
        config=CalibConfig(alpha=0.1, epsilon=1.0, gamma=0.05, m=100, adjusted_level=0.93),
        n=200,
        seed=7,
    )


class TestReadScores:
    def test_csv_one_per_line(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("0.1\n0.25\n0.9\n")
        assert fileio.read_scores(p).tolist() == [0.1, 0.25, 0.9]

    def test_blank_lines_ignored(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("0.1\n\n0.9\n\n")
        assert fileio.read_scores(p).tolist() == [0.1, 0.9]

    def test_header_skipped_on_request(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("score\n0.4\n")
        assert fileio.read_scores(p, has_header=True).tolist() == [0.4]
        with pytest.raises(InputFormatError):
            fileio.read_scores(p)

    def test_bad_line_is_located(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("0.1\noops\n0.9\n")
        with pytest.raises(InputFormatError) as err:
            fileio.read_scores(p)
        assert err.value.line == 2
        assert err.value.path == str(p)
        assert "oops" in str(err.value)

    def test_json_array(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text("[0.1, 0.5, 1]")
        assert fileio.read_scores(p).tolist() == [0.1, 0.5, 1.0]

    def test_json_must_be_an_array_of_numbers(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text('{"scores": [0.1]}')
        with pytest.raises(InputFormatError):
            fileio.read_scores(p)
        p.write_text('[0.1, "x"]')
        with pytest.raises(InputFormatError):
            fileio.read_scores(p)
        p.write_text('[0.1, true]')
        with pytest.raises(InputFormatError):
            fileio.read_scores(p)

    def test_invalid_json_reports_location(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text("[0.1,\n 0.2,]")
        with pytest.raises(InputFormatError) as err:
            fileio.read_scores(p)
        assert err.value.path == str(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputFormatError):
            fileio.read_scores(tmp_path / "nope.csv")


class TestProbabilityTable:
    def test_with_labels(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("c0,c1,c2,label\n0.95,0.03,0.02,0\n0.2,0.5,0.3,1\n")
        probs, labels = fileio.read_probability_table(p)
        assert probs.tolist() == [[0.95, 0.03, 0.02], [0.2, 0.5, 0.3]]
        assert labels.tolist() == [0, 1]

    def test_label_column_position_is_free(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("label,c0,c1\n1,0.6,0.4\n")
        probs, labels = fileio.read_probability_table(p)
        assert probs.tolist() == [[0.6, 0.4]]
        assert labels.tolist() == [1]

    def test_without_labels(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("c0,c1\n0.7,0.3\n")
        probs, labels = fileio.read_probability_table(p)
        assert probs.tolist() == [[0.7, 0.3]]
        assert labels is None

    def test_ragged_row_is_located(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("c0,c1\n0.7,0.3\n0.5\n")
        with pytest.raises(InputFormatError) as err:
            fileio.read_probability_table(p)
        assert err.value.line == 3

    def test_numeric_header_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("0.7,0.3\n0.5,0.5\n")
        with pytest.raises(InputFormatError) as err:
            fileio.read_probability_table(p)
        assert "header" in str(err.value)

    def test_bad_cells_located(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("c0,c1,label\n0.7,x,0\n")
        with pytest.raises(InputFormatError) as err:
            fileio.read_probability_table(p)
        assert err.value.line == 2
        p.write_text("c0,c1,label\n0.7,0.3,zero\n")
        with pytest.raises(InputFormatError) as err:
            fileio.read_probability_table(p)
        assert "label" in str(err.value)

    def test_degenerate_tables_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("")
        with pytest.raises(InputFormatError):
            fileio.read_probability_table(p)
        p.write_text("c0,c1\n")
        with pytest.raises(InputFormatError):
            fileio.read_probability_table(p)
        p.write_text("label\n0\n")
        with pytest.raises(InputFormatError):
            fileio.read_probability_table(p)
        p.write_text("label,c0,label\n0,0.5,0\n")
        with pytest.raises(InputFormatError):
            fileio.read_probability_table(p)


class TestThresholdRoundTrip:
    def test_write_then_read(self, tmp_path):
        p = tmp_path / "thr.json"
        original = make_threshold()
        fileio.write_threshold(p, original)
        assert fileio.read_threshold(p) == original

    def test_file_is_canonical_json(self, tmp_path):
        p = tmp_path / "thr.json"
        fileio.write_threshold(p, make_threshold())
        text = p.read_text()
        assert text.endswith("\n")
        data = json.loads(text)
        assert set(data) == {"cutoff", "n", "seed", "config"}
        assert text == fileio.canonical_json(data)

    def test_missing_fields_rejected(self, tmp_path):
        p = tmp_path / "thr.json"
        p.write_text('{"cutoff": 0.5, "n": 10}')
        with pytest.raises(InputFormatError) as err:
            fileio.read_threshold(p)
        assert "missing" in str(err.value)

    def test_wrong_config_keys_rejected(self, tmp_path):
        p = tmp_path / "thr.json"
        data = fileio.threshold_to_dict(make_threshold())
        data["config"]["extra"] = 1
        p.write_text(json.dumps(data))
        with pytest.raises(InputFormatError):
            fileio.read_threshold(p)


class TestSetsCsv:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "sets.csv"
        sets = [
            PredictionSet((0, 1), 0.5),
            PredictionSet((), 0.5),
            PredictionSet((2,), 0.5),
        ]
        fileio.write_sets_csv(p, sets)
        assert p.read_text() == "0,2,0;1\n1,0,\n2,1,2\n"
        assert fileio.read_sets_csv(p) == [(0, 2, (0, 1)), (1, 0, ()), (2, 1, (2,))]

    def test_custom_ids(self, tmp_path):
        p = tmp_path / "sets.csv"
        fileio.write_sets_csv(p, [PredictionSet((1,), 0.5)], ids=[41])
        assert fileio.read_sets_csv(p) == [(41, 1, (1,))]

    def test_size_mismatch_detected(self, tmp_path):
        p = tmp_path / "sets.csv"
        p.write_text("0,2,1\n")
        with pytest.raises(InputFormatError) as err:
            fileio.read_sets_csv(p)
        assert err.value.line == 1


class TestConfigAndSpec:
    def test_config_accepts_documented_keys(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"alpha": 0.1, "epsilon": 1.0, "m": 100, "gamma": 0.05, "seed": 3, "bins_grid": [10, 100]}')
        assert fileio.read_config(p)["m"] == 100

    def test_config_rejects_unknown_keys(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"alpha": 0.1, "epsilom": 1.0}')
        with pytest.raises(InputFormatError) as err:
            fileio.read_config(p)
        assert "epsilom" in str(err.value)

    def test_config_checks_bins_grid(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"bins_grid": [10, "x"]}')
        with pytest.raises(InputFormatError):
            fileio.read_config(p)
        p.write_text('{"bins_grid": []}')
        with pytest.raises(InputFormatError):
            fileio.read_config(p)

    def test_spec_requires_core_fields(self, tmp_path):
        p = tmp_path / "e.json"
        p.write_text('{"law": "uniform", "n_calib": 10}')
        with pytest.raises(InputFormatError) as err:
            fileio.read_experiment_spec(p)
        assert "missing" in str(err.value)

    def test_spec_rejects_unknown_keys(self, tmp_path):
        p = tmp_path / "e.json"
        p.write_text(
            '{"law": "uniform", "n_calib": 10, "n_test": 10, "alpha": 0.1,'
            ' "epsilon": 1.0, "trials": 2, "threads": 4}'
        )
        with pytest.raises(InputFormatError) as err:
            fileio.read_experiment_spec(p)
        assert "threads" in str(err.value)


class TestCanonicalJson:
    def test_sorted_keys_and_trailing_newline(self):
        text = fileio.canonical_json({"b": 1, "a": 2})
        assert text == '{\n  "a": 2,\n  "b": 1\n}\n'

    def test_nonfinite_floats_become_null(self):
        text = fileio.canonical_json({"x": math.inf, "y": [math.nan, 1.0]})
        assert json.loads(text) == {"x": None, "y": [None, 1.0]}

    def test_equal_content_means_equal_bytes(self):
        a = fileio.canonical_json({"m": 100, "alpha": 0.1})
        b = fileio.canonical_json({"alpha": 0.1, "m": 100})
        assert a == b


class TestHistograms:
    def test_int_keys_sorted(self, tmp_path):
        p = tmp_path / "h.csv"
        fileio.write_histogram_csv(p, {3: 5, 1: 2, 2: 0}, "size")
        assert p.read_text() == "size,count\n1,2\n2,0\n3,5\n"

    def test_float_keys_round_trip(self, tmp_path):
        p = tmp_path / "h.csv"
        fileio.write_histogram_csv(p, {0.1: 1, 0.925: 3}, "coverage")
        lines = p.read_text().splitlines()
        assert lines[0] == "coverage,count"
        parsed = [float(ln.split(",")[0]) for ln in lines[1:]]
        assert parsed == [0.1, 0.925]

    def test_value_histogram_counts(self):
        hist = fileio.value_histogram(np.array([0.5, 0.5, 0.25]))
        assert hist == {0.5: 2, 0.25: 1}


class TestDigest:
    def test_known_sha256(self, tmp_path):
        p = tmp_path / "f.txt"
        p.write_bytes(b"hello\n")
        assert fileio.sha256_digest(p) == (
            "5891b5b522d5df086d0ff0b110fbd9d21bb4fc7163af34d08286a2e846f6be03"
        )

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputFormatError):
            fileio.sha256_digest(tmp_path / "nope")
