"""Command-line interface.

Each verb is a thin client of the HTTP service: files are parsed here,
turned into one request, and the response is written back to disk as
CSV/JSON artifacts plus a run manifest. By default the service runs in
process; ``--server URL`` points the same verbs at a remote instance.

Exit codes: 0 success, 2 unreadable or malformed input, 3 parameter
outside its domain, 4 internal invariant breach or service failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from pathlib import Path

from dpcp import __version__, fileio, rng
from dpcp.errors import InputFormatError, InternalCheckError, InvalidArgumentError
from dpcp.predict import PredictionSet


class ServiceClient:
    """POSTs requests either to an in-process app or a remote server."""

    def __init__(self, server: str | None = None):
        if server is None:
            from dpcp.service.app import create_app

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # test client warns about optional extras
                from starlette.testclient import TestClient

                self._client = TestClient(create_app(), raise_server_exceptions=False)
        else:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=600.0)

    def post(self, path: str, payload: dict) -> dict:
        return self._decode(self._client.post(path, json=payload))

    @staticmethod
    def _decode(response) -> dict:
        if response.status_code == 200:
            return response.json()
        detail = _response_detail(response)
        if response.status_code == 400:
            raise InvalidArgumentError(detail)
        if response.status_code == 422:
            raise InvalidArgumentError(f"bad request: {detail}")
        raise InternalCheckError(f"service error {response.status_code}: {detail}")


def _response_detail(response) -> str:
    try:
        body = response.json()
    except ValueError:
        return response.text
    detail = body.get("detail", body) if isinstance(body, dict) else body
    return detail if isinstance(detail, str) else json.dumps(detail)


def _parse_grid(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("grid must name at least one bin count")
    return values


def _add_common(sub, *, trials_help=None, default_trials=None):
    sub.add_argument("--seed", type=int, default=None,
                     help="root seed (fallback: DPCP_SEED, then OS entropy)")
    sub.add_argument("--strict", action="store_true",
                     help="fail instead of falling back to an entropy seed")
    sub.add_argument("--out", type=Path, default=Path("."),
                     help="directory for output artifacts (default: current)")
    sub.add_argument("--server", default=None,
                     help="base URL of a running service (default: in process)")
    if trials_help is not None:
        sub.add_argument("--trials", type=int, default=default_trials, help=trials_help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpcp",
        description="Differentially private prediction-set calibration.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbs = parser.add_subparsers(dest="command", required=True)

    cal = verbs.add_parser("calibrate", help="calibrate a private cutoff on a score file")
    cal.add_argument("--scores", type=Path, required=True, help="score file (CSV or JSON array)")
    cal.add_argument("--has-header", action="store_true", help="skip the first CSV line")
    cal.add_argument("--config", type=Path, default=None, help="JSON config file")
    cal.add_argument("--alpha", type=float, default=None, help="target miscoverage level")
    cal.add_argument("--epsilon", type=float, default=None, help="privacy budget")
    cal.add_argument("--m", type=int, default=None, help="number of bins (default: tuned)")
    cal.add_argument("--gamma", type=float, default=None, help="budget split (default: optimized)")
    cal.add_argument("--grid", type=_parse_grid, default=None,
                     help="comma-separated bin-count candidates for tuning")
    _add_common(cal, trials_help="tuning trials per candidate bin count", default_trials=None)

    pre = verbs.add_parser("predict", help="form prediction sets from a saved threshold")
    pre.add_argument("--threshold", type=Path, required=True, help="threshold JSON file")
    source = pre.add_mutually_exclusive_group(required=True)
    source.add_argument("--probs", type=Path, help="CSV of class probabilities (+ optional label column)")
    source.add_argument("--scores", type=Path, help="file of precomputed true-label scores")
    pre.add_argument("--has-header", action="store_true", help="skip the first line of --scores")
    _add_common(pre)

    tune = verbs.add_parser("tune", help="pick the bin count with the smallest simulated cutoff")
    tune.add_argument("--n", type=int, required=True, help="calibration set size")
    tune.add_argument("--alpha", type=float, required=True, help="target miscoverage level")
    tune.add_argument("--epsilon", type=float, required=True, help="privacy budget")
    tune.add_argument("--grid", type=_parse_grid, default=None,
                      help="comma-separated bin-count candidates")
    _add_common(tune, trials_help="simulated calibrations per candidate", default_trials=20)

    sim = verbs.add_parser("simulate", help="run a seeded coverage experiment")
    sim.add_argument("--spec", type=Path, required=True, help="experiment spec JSON file")
    sim.add_argument("--threads", type=int, default=1, help="worker threads (results identical)")
    _add_common(sim, trials_help="override the experiment file's trial count", default_trials=None)

    chk = verbs.add_parser("dp-check", help="measure worst-case privacy ratios on random neighbors")
    chk.add_argument("--instances", type=int, default=100, help="random neighbor pairs to test")
    _add_common(chk)

    srv = verbs.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)

    return parser


def _resolve_seed(flag_seed, file_seed, strict: bool) -> int:
    if flag_seed is not None:
        return rng.validate_seed(flag_seed)
    if file_seed is not None:
        return rng.validate_seed(file_seed)
    return rng.resolve_seed(None, strict)


def _require(value, name: str):
    if value is None:
        raise InvalidArgumentError(f"{name} is required (flag or config file)")
    return value


def _read_score_vector(path: Path, has_header: bool) -> list[float]:
    values = fileio.read_scores(path, has_header=has_header)
    if values.size == 0:
        raise InputFormatError("no scores", path=str(path))
    return [float(v) for v in values]


def _finish(out_dir: Path, command: str, config: dict, inputs: list[Path],
            seed, outputs: list[str], started: float) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {str(p): fileio.sha256_digest(p) for p in inputs},
        "seed": seed,
        "version": __version__,
        "outputs": sorted(outputs),
        "duration_seconds": time.perf_counter() - started,
    }
    fileio.write_json(out_dir / "manifest.json", manifest)


def cmd_calibrate(args, client: ServiceClient) -> int:
    started = time.perf_counter()
    config = fileio.read_config(args.config) if args.config is not None else {}
    alpha = args.alpha if args.alpha is not None else config.get("alpha")
    epsilon = args.epsilon if args.epsilon is not None else config.get("epsilon")
    m = args.m if args.m is not None else config.get("m")
    gamma = args.gamma if args.gamma is not None else config.get("gamma")
    bins_grid = args.grid if args.grid is not None else config.get("bins_grid")
    seed = _resolve_seed(args.seed, config.get("seed"), args.strict)
    scores = _read_score_vector(args.scores, args.has_header)

    payload = {
        "scores": scores,
        "alpha": _require(alpha, "alpha"),
        "epsilon": _require(epsilon, "epsilon"),
        "m": m,
        "gamma": gamma,
        "seed": seed,
        "bins_grid": bins_grid,
    }
    if args.trials is not None:
        payload["tune_trials"] = args.trials
    threshold = client.post("/calibrate", payload)

    args.out.mkdir(parents=True, exist_ok=True)
    fileio.write_json(args.out / "threshold.json", threshold)
    cfg = threshold["config"]
    print(f"cutoff: {threshold['cutoff']}")
    print(f"adjusted level: {cfg['adjusted_level']}")
    print(f"bins: {cfg['m']}")
    print(f"budget split: {cfg['gamma']}")
    print(f"scores: {threshold['n']}")
    inputs = [args.scores] + ([args.config] if args.config is not None else [])
    run_config = {k: v for k, v in payload.items() if k != "scores"}
    run_config["has_header"] = args.has_header
    _finish(args.out, "calibrate", run_config, inputs, seed, ["threshold.json"], started)
    return 0


def cmd_predict(args, client: ServiceClient) -> int:
    started = time.perf_counter()
    threshold = fileio.read_threshold(args.threshold)
    payload: dict = {"threshold": fileio.threshold_to_dict(threshold)}
    if args.probs is not None:
        probs, labels = fileio.read_probability_table(args.probs)
        payload["probabilities"] = probs.tolist()
        if labels is not None:
            payload["labels"] = [int(v) for v in labels]
        data_path = args.probs
    else:
        payload["scores"] = _read_score_vector(args.scores, args.has_header)
        data_path = args.scores
    response = client.post("/predict", payload)

    args.out.mkdir(parents=True, exist_ok=True)
    sets = [
        PredictionSet(tuple(row["labels"]), response["cutoff"]) for row in response["sets"]
    ]
    fileio.write_sets_csv(args.out / "sets.csv", sets, ids=[row["id"] for row in response["sets"]])
    summary = {
        "coverage": response["coverage"],
        "mean_size": response["mean_size"],
        "median_size": response["median_size"],
        "cutoff": response["cutoff"],
        "examples": len(sets),
    }
    fileio.write_json(args.out / "summary.json", summary)
    if response["coverage"] is not None:
        print(f"coverage: {response['coverage']}")
    print(f"mean set size: {response['mean_size']}")
    print(f"median set size: {response['median_size']}")
    _finish(
        args.out, "predict", {"threshold": str(args.threshold), "data": str(data_path)},
        [args.threshold, data_path], threshold.seed, ["sets.csv", "summary.json"], started,
    )
    return 0


def cmd_tune(args, client: ServiceClient) -> int:
    started = time.perf_counter()
    seed = _resolve_seed(args.seed, None, args.strict)
    payload = {
        "n": args.n,
        "alpha": args.alpha,
        "epsilon": args.epsilon,
        "trials": args.trials,
        "seed": seed,
        "grid": args.grid,
    }
    response = client.post("/tune", payload)
    args.out.mkdir(parents=True, exist_ok=True)
    fileio.write_json(args.out / "tuned.json", response)
    print(f"bins: {response['m_star']}")
    print(f"budget split: {response['gamma_star']}")
    print(f"adjusted level: {response['adjusted_level']}")
    _finish(args.out, "tune", payload, [], seed, ["tuned.json"], started)
    return 0


def cmd_simulate(args, client: ServiceClient) -> int:
    started = time.perf_counter()
    spec = fileio.read_experiment_spec(args.spec)
    seed = _resolve_seed(args.seed, spec.get("seed"), args.strict)
    payload = dict(spec)
    payload["seed"] = seed
    payload["threads"] = args.threads
    if args.trials is not None:
        payload["trials"] = args.trials
    response = client.post("/simulate", payload)

    args.out.mkdir(parents=True, exist_ok=True)
    fileio.write_json(args.out / "report.json", response)
    fileio.write_histogram_csv(
        args.out / "coverage_hist.csv",
        fileio.value_histogram(response["coverages"]),
        "coverage",
    )
    fileio.write_histogram_csv(
        args.out / "set_size_hist.csv",
        {int(k): v for k, v in response["set_sizes"].items()},
        "size",
    )
    print(f"mean coverage: {response['mean_coverage']} (std err {response['std_err']})")
    print(f"target: {1.0 - response['config']['alpha']}")
    bounds = response.get("bounds")
    if bounds is not None:
        upper = bounds["upper"] if bounds["upper"] is not None else "degenerate"
        print(f"coverage band: [{bounds['lower']}, {upper}]")
    print(f"trials: {response['trials']}")
    run_config = dict(payload)
    run_config.pop("seed", None)
    _finish(
        args.out, "simulate", run_config, [args.spec], seed,
        ["report.json", "coverage_hist.csv", "set_size_hist.csv"], started,
    )
    return 0


def cmd_dp_check(args, client: ServiceClient) -> int:
    started = time.perf_counter()
    seed = _resolve_seed(args.seed, None, args.strict)
    payload = {"instances": args.instances, "seed": seed}
    response = client.post("/dp-check", payload)
    args.out.mkdir(parents=True, exist_ok=True)
    fileio.write_json(args.out / "dp_check.json", response)
    print(f"instances: {len(response['cases'])}")
    print(f"worst ratio over bound: {response['worst_margin']}")
    verdict = "pass" if response["all_within_budget"] else "FAIL"
    print(f"privacy check: {verdict}")
    _finish(args.out, "dp-check", payload, [], seed, ["dp_check.json"], started)
    if not response["all_within_budget"]:
        raise InternalCheckError(
            f"privacy ratio exceeded its bound (worst margin {response['worst_margin']})"
        )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from dpcp.service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "serve":
            return cmd_serve(args)
        client = ServiceClient(args.server)
        handler = {
            "calibrate": cmd_calibrate,
            "predict": cmd_predict,
            "tune": cmd_tune,
            "simulate": cmd_simulate,
            "dp-check": cmd_dp_check,
        }[args.command]
        return handler(args, client)
    except InputFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InternalCheckError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
