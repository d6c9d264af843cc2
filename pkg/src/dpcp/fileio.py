"""On-disk artifact formats: scores, probability tables, thresholds,
prediction sets, reports, histograms, manifests.

Everything is CSV or JSON so artifacts stay diffable. JSON is written
in one canonical form (sorted keys, two-space indent, trailing newline)
so that byte-identity of two files means equality of their contents.
Parse failures raise InputFormatError pointing at the file and, where
it makes sense, the 1-based line.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict

import numpy as np

from dpcp.calibrate import CalibConfig, Threshold
from dpcp.errors import InputFormatError

CONFIG_KEYS = {"alpha", "epsilon", "m", "gamma", "seed", "bins_grid"}
EXPERIMENT_KEYS = {"law", "n_calib", "n_test", "alpha", "epsilon", "m", "gamma", "trials", "seed"}
THRESHOLD_CONFIG_KEYS = {"alpha", "epsilon", "gamma", "m", "adjusted_level"}


def _read_text(path) -> str:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except OSError as exc:
        raise InputFormatError(exc.strerror or str(exc), path=str(path)) from exc


def _load_json(path):
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"invalid JSON: {exc.msg}", path=str(path), line=exc.lineno) from exc


def _require_number(value, what: str, path, line=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputFormatError(f"{what} must be a number, got {value!r}", path=str(path), line=line)
    return float(value)


def read_scores(path, has_header: bool = False) -> np.ndarray:
    """Load a score vector from a one-column CSV or a JSON array.

    Files ending in ``.json`` must contain a flat array of numbers.
    Anything else is read as text with one score per line; blank lines
    are ignored and ``has_header`` skips the first line unparsed.
    """
    if str(path).endswith(".json"):
        data = _load_json(path)
        if not isinstance(data, list):
            raise InputFormatError("expected a JSON array of scores", path=str(path))
        return np.array(
            [_require_number(v, f"score {i}", path) for i, v in enumerate(data)], dtype=float
        )
    values = []
    for lineno, raw in enumerate(_read_text(path).splitlines(), start=1):
        if has_header and lineno == 1:
            continue
        line = raw.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise InputFormatError(f"not a number: {line!r}", path=str(path), line=lineno) from None
    return np.array(values, dtype=float)


def read_probability_table(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Load per-example class probabilities, and labels when present.

    The file is a CSV with a header row naming one column per class,
    plus optionally a column named ``label`` holding integer labels.
    Returns (probabilities, labels) with labels None when the column
    is absent. Column order in the file fixes the class order.
    """
    lines = [ln for ln in _read_text(path).splitlines()]
    stripped = [(i + 1, ln.strip()) for i, ln in enumerate(lines) if ln.strip()]
    if not stripped:
        raise InputFormatError("empty probability table", path=str(path))
    header_line, header = stripped[0]
    columns = [c.strip() for c in header.split(",")]
    if any(_is_number(c) for c in columns):
        raise InputFormatError(
            "expected a header row naming the class columns", path=str(path), line=header_line
        )
    label_positions = [i for i, c in enumerate(columns) if c == "label"]
    if len(label_positions) > 1:
        raise InputFormatError("more than one label column", path=str(path), line=header_line)
    label_at = label_positions[0] if label_positions else None
    class_positions = [i for i in range(len(columns)) if i != label_at]
    if not class_positions:
        raise InputFormatError("no class columns", path=str(path), line=header_line)

    rows, labels = [], []
    for lineno, line in stripped[1:]:
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(columns):
            raise InputFormatError(
                f"expected {len(columns)} columns, got {len(cells)}", path=str(path), line=lineno
            )
        try:
            rows.append([float(cells[i]) for i in class_positions])
        except ValueError:
            raise InputFormatError("non-numeric probability", path=str(path), line=lineno) from None
        if label_at is not None:
            try:
                labels.append(int(cells[label_at]))
            except ValueError:
                raise InputFormatError(
                    f"label must be an integer, got {cells[label_at]!r}",
                    path=str(path),
                    line=lineno,
                ) from None
    if not rows:
        raise InputFormatError("probability table has no data rows", path=str(path))
    probs = np.array(rows, dtype=float)
    return probs, (np.array(labels, dtype=int) if label_at is not None else None)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def threshold_to_dict(threshold: Threshold) -> dict:
    return {
        "cutoff": threshold.cutoff,
        "n": threshold.n,
        "seed": threshold.seed,
        "config": asdict(threshold.config),
    }


def threshold_from_dict(data: dict, path=None) -> Threshold:
    def fail(msg):
        raise InputFormatError(msg, path=str(path) if path is not None else None)

    if not isinstance(data, dict):
        fail("threshold must be a JSON object")
    missing = {"cutoff", "n", "seed", "config"} - set(data)
    if missing:
        fail(f"threshold is missing fields: {sorted(missing)}")
    config = data["config"]
    if not isinstance(config, dict) or set(config) != THRESHOLD_CONFIG_KEYS:
        fail(f"threshold config must have exactly the fields {sorted(THRESHOLD_CONFIG_KEYS)}")
    try:
        return Threshold(
            cutoff=float(data["cutoff"]),
            config=CalibConfig(
                alpha=float(config["alpha"]),
                epsilon=float(config["epsilon"]),
                gamma=float(config["gamma"]),
                m=int(config["m"]),
                adjusted_level=float(config["adjusted_level"]),
            ),
            n=int(data["n"]),
            seed=int(data["seed"]),
        )
    except (TypeError, ValueError) as exc:
        fail(f"bad threshold field: {exc}")


def write_threshold(path, threshold: Threshold) -> None:
    write_json(path, threshold_to_dict(threshold))


def read_threshold(path) -> Threshold:
    return threshold_from_dict(_load_json(path), path=path)


def write_sets_csv(path, sets, ids=None) -> None:
    """Write prediction sets as rows of ``id,size,l1;l2;...`` without a header."""
    if ids is None:
        ids = range(len(sets))
    lines = []
    for i, s in zip(ids, sets):
        labels = ";".join(str(lab) for lab in s.included_labels)
        lines.append(f"{i},{s.size},{labels}")
    _write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_sets_csv(path) -> list[tuple[int, int, tuple[int, ...]]]:
    """Parse rows written by write_sets_csv, checking the size field."""
    out = []
    for lineno, raw in enumerate(_read_text(path).splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise InputFormatError(
                f"expected 'id,size,labels', got {line!r}", path=str(path), line=lineno
            )
        try:
            ident, size = int(parts[0]), int(parts[1])
            labels = tuple(int(x) for x in parts[2].split(";")) if parts[2] else ()
        except ValueError:
            raise InputFormatError(f"non-integer field in {line!r}", path=str(path), line=lineno) from None
        if size != len(labels):
            raise InputFormatError(
                f"size field says {size} but row lists {len(labels)} labels",
                path=str(path),
                line=lineno,
            )
        out.append((ident, size, labels))
    return out


def read_config(path) -> dict:
    """Load a calibration config JSON, allowing only the documented keys."""
    data = _load_json(path)
    if not isinstance(data, dict):
        raise InputFormatError("config must be a JSON object", path=str(path))
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise InputFormatError(f"unknown config keys: {sorted(unknown)}", path=str(path))
    if "bins_grid" in data:
        grid = data["bins_grid"]
        if not isinstance(grid, list) or not grid or any(
            isinstance(v, bool) or not isinstance(v, int) for v in grid
        ):
            raise InputFormatError("bins_grid must be a list of integers", path=str(path))
    return data


def read_experiment_spec(path) -> dict:
    """Load a simulation spec JSON, allowing only the documented keys."""
    data = _load_json(path)
    if not isinstance(data, dict):
        raise InputFormatError("experiment spec must be a JSON object", path=str(path))
    unknown = set(data) - EXPERIMENT_KEYS
    if unknown:
        raise InputFormatError(f"unknown experiment keys: {sorted(unknown)}", path=str(path))
    missing = {"law", "n_calib", "n_test", "alpha", "epsilon", "trials"} - set(data)
    if missing:
        raise InputFormatError(f"experiment spec is missing: {sorted(missing)}", path=str(path))
    return data


def _sanitize(obj):
    """Replace non-finite floats with None so the JSON stays standard."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def canonical_json(obj) -> str:
    """One fixed serialization so equal content means equal bytes."""
    return json.dumps(_sanitize(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    _write_text(path, canonical_json(obj))


def write_histogram_csv(path, mapping: dict, key_name: str) -> None:
    """Write a ``key,count`` CSV with keys in ascending order.

    Float keys are written with repr so re-reading them is lossless.
    """
    lines = [f"{key_name},count"]
    for key in sorted(mapping):
        text = repr(float(key)) if isinstance(key, float) else str(key)
        lines.append(f"{text},{mapping[key]}")
    _write_text(path, "\n".join(lines) + "\n")


def value_histogram(values) -> dict[float, int]:
    """Exact histogram of a value sequence: unique value -> count."""
    out: dict[float, int] = {}
    for v in values:
        key = float(v)
        out[key] = out.get(key, 0) + 1
    return out


def sha256_digest(path) -> str:
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as handle:
            for chunk in iter(lambda: handle.read(1 << 16), b""):
                digest.update(chunk)
    except OSError as exc:
        raise InputFormatError(exc.strerror or str(exc), path=str(path)) from exc
    return digest.hexdigest()


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)
