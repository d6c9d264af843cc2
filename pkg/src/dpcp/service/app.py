"""HTTP surface over the calibration library.

Every command-line verb maps to one endpoint; the CLI is a thin client
of this app. Domain errors surface as 400 with a machine-readable
``error`` field, body-shape errors are FastAPI's usual 422, and a
violated internal invariant is a 500.
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from dpcp import __version__
from dpcp.calibrate import adjusted_quantile, calibrate, tune_m_star
from dpcp.errors import InternalCheckError, InvalidArgumentError
from dpcp.harness import bound_report, dp_ratio_sweep, max_bin_mass, run_coverage_experiment
from dpcp.laws import parse_law
from dpcp.predict import evaluate, form_set
from dpcp.scores import ScoreSet, true_label_scores, uniform_grid
from dpcp.service import schemas


def create_app() -> FastAPI:
    app = FastAPI(title="dpcp", version=__version__)

    @app.exception_handler(InvalidArgumentError)
    async def _domain_error(request, exc):
        return JSONResponse(
            status_code=400, content={"detail": str(exc), "error": "invalid-argument"}
        )

    @app.exception_handler(InternalCheckError)
    async def _internal_error(request, exc):
        return JSONResponse(
            status_code=500, content={"detail": str(exc), "error": "internal-check"}
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/calibrate", response_model=schemas.ThresholdModel)
    def calibrate_endpoint(req: schemas.CalibrateRequest):
        threshold = calibrate(
            ScoreSet(np.array(req.scores, dtype=float)),
            req.alpha,
            req.epsilon,
            m=req.m,
            gamma=req.gamma,
            seed=req.seed,
            tune_trials=req.tune_trials,
            tuning_grid=req.bins_grid,
        )
        return schemas.ThresholdModel.from_threshold(threshold)

    @app.post("/predict", response_model=schemas.PredictResponse)
    def predict_endpoint(req: schemas.PredictRequest):
        threshold = req.threshold.to_threshold()
        if req.probabilities is not None:
            rows = req.probabilities
            if not rows:
                raise InvalidArgumentError("no probability rows")
            width = len(rows[0])
            if any(len(r) != width for r in rows):
                raise InvalidArgumentError("probability rows must all have the same width")
            probs = np.array(rows, dtype=float)
            sets = [form_set(1.0 - row, threshold) for row in probs]
            coverage = None
            if req.labels is not None:
                scores = true_label_scores(probs, np.array(req.labels, dtype=int))
                coverage = evaluate(scores, threshold).coverage
        else:
            scores = np.array(req.scores, dtype=float)
            coverage = evaluate(scores, threshold).coverage
            # one pseudo-label per example: in the set iff its score passes
            sets = [form_set([s], threshold) for s in scores]
        sizes = np.array([s.size for s in sets], dtype=float)
        return schemas.PredictResponse(
            sets=[
                schemas.SetRow(id=i, size=s.size, labels=list(s.included_labels))
                for i, s in enumerate(sets)
            ],
            coverage=coverage,
            mean_size=float(np.mean(sizes)),
            median_size=float(np.median(sizes)),
            cutoff=threshold.cutoff,
        )

    @app.post("/tune", response_model=schemas.TuneResponse)
    def tune_endpoint(req: schemas.TuneRequest):
        m_star, g_star = tune_m_star(
            req.n, req.alpha, req.epsilon, grid=req.grid, trials=req.trials, seed=req.seed
        )
        return schemas.TuneResponse(
            m_star=m_star,
            gamma_star=g_star,
            adjusted_level=adjusted_quantile(req.n, req.alpha, req.epsilon, g_star, m_star),
        )

    @app.post("/simulate", response_model=schemas.CoverageReportModel)
    def simulate_endpoint(req: schemas.SimulateRequest):
        law = parse_law(req.law)
        report = run_coverage_experiment(
            law,
            n_calib=req.n_calib,
            n_test=req.n_test,
            alpha=req.alpha,
            epsilon=req.epsilon,
            m=req.m,
            gamma=req.gamma,
            trials=req.trials,
            seed=req.seed,
            threads=req.threads,
            tune_trials=req.tune_trials,
        )
        bounds = None
        if hasattr(law, "cdf"):
            band = bound_report(
                req.n_calib,
                req.alpha,
                req.epsilon,
                report.config.gamma,
                report.config.m,
                max_bin_mass(law, uniform_grid(report.config.m)),
            )
            bounds = schemas.BoundsModel(
                lower=band.lower,
                upper=band.upper if math.isfinite(band.upper) else None,
                upper_simplified=band.upper_simplified,
                bin_mass=band.bin_mass,
            )
        data = report.as_dict()
        return schemas.CoverageReportModel(
            law=data["law"],
            n_calib=data["n_calib"],
            n_test=data["n_test"],
            trials=data["trials"],
            seed=data["seed"],
            config=schemas.ThresholdConfigModel(**data["config"]),
            mean_coverage=data["mean_coverage"],
            std_err=data["std_err"],
            coverages=data["coverages"],
            cutoffs=data["cutoffs"],
            set_sizes=data["set_sizes"],
            bounds=bounds,
        )

    @app.post("/dp-check", response_model=schemas.DpCheckResponse)
    def dp_check_endpoint(req: schemas.DpCheckRequest):
        cases = dp_ratio_sweep(
            instances=req.instances,
            max_n=req.max_n,
            max_m=req.max_m,
            epsilons=req.epsilons,
            q_levels=req.q_levels,
            seed=req.seed,
        )
        margins = [c.ratio / c.bound for c in cases]
        return schemas.DpCheckResponse(
            cases=[schemas.RatioCaseModel(**c.as_dict()) for c in cases],
            max_ratio=max(c.ratio for c in cases),
            worst_margin=max(margins),
            all_within_budget=all(r <= 1.0 + 1e-9 for r in margins),
        )

    return app


app = create_app()
