"""Request and response bodies for the HTTP service.

The service speaks plain JSON; these models are the single source of
truth for its wire format. Thresholds cross the wire with the same
fields as their on-disk JSON form, so a saved threshold file is a valid
request fragment as-is.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

from dpcp.calibrate import CalibConfig, Threshold

MAX_SEED = 2**64 - 1


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ThresholdConfigModel(StrictModel):
    alpha: float
    epsilon: float
    gamma: float
    m: int
    adjusted_level: float


class ThresholdModel(StrictModel):
    cutoff: float
    n: int
    seed: int
    config: ThresholdConfigModel

    @classmethod
    def from_threshold(cls, threshold: Threshold) -> "ThresholdModel":
        return cls(
            cutoff=threshold.cutoff,
            n=threshold.n,
            seed=threshold.seed,
            config=ThresholdConfigModel(
                alpha=threshold.config.alpha,
                epsilon=threshold.config.epsilon,
                gamma=threshold.config.gamma,
                m=threshold.config.m,
                adjusted_level=threshold.config.adjusted_level,
            ),
        )

    def to_threshold(self) -> Threshold:
        return Threshold(
            cutoff=self.cutoff,
            config=CalibConfig(
                alpha=self.config.alpha,
                epsilon=self.config.epsilon,
                gamma=self.config.gamma,
                m=self.config.m,
                adjusted_level=self.config.adjusted_level,
            ),
            n=self.n,
            seed=self.seed,
        )


class CalibrateRequest(StrictModel):
    scores: list[float]
    alpha: float
    epsilon: float
    m: int | None = None
    gamma: float | None = None
    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    tune_trials: int = Field(default=20, ge=1)
    bins_grid: list[int] | None = None


class SetRow(StrictModel):
    id: int
    size: int
    labels: list[int]


class PredictRequest(StrictModel):
    """Score a batch against a threshold.

    Exactly one of ``probabilities`` (rows of class probabilities, set
    membership decided per label) or ``scores`` (one precomputed
    true-label score per example, set membership decided per example)
    must be given. ``labels`` may accompany ``probabilities`` to get a
    coverage figure; with ``scores`` coverage is always available.
    """

    threshold: ThresholdModel
    probabilities: list[list[float]] | None = None
    labels: list[int] | None = None
    scores: list[float] | None = None

    @model_validator(mode="after")
    def _one_input(self):
        if (self.probabilities is None) == (self.scores is None):
            raise ValueError("provide exactly one of probabilities or scores")
        if self.labels is not None and self.probabilities is None:
            raise ValueError("labels only make sense with probabilities")
        return self


class PredictResponse(StrictModel):
    sets: list[SetRow]
    coverage: float | None
    mean_size: float
    median_size: float
    cutoff: float


class TuneRequest(StrictModel):
    n: int
    alpha: float
    epsilon: float
    trials: int = Field(default=20, ge=1)
    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    grid: list[int] | None = None


class TuneResponse(StrictModel):
    m_star: int
    gamma_star: float
    adjusted_level: float


class SimulateRequest(StrictModel):
    law: dict | str
    n_calib: int
    n_test: int
    alpha: float
    epsilon: float
    m: int | None = None
    gamma: float | None = None
    trials: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    threads: int = Field(default=1, ge=1)
    tune_trials: int = Field(default=20, ge=1)


class BoundsModel(StrictModel):
    """Coverage band; ``upper`` is null when the closed form degenerates."""

    lower: float
    upper: float | None
    upper_simplified: float
    bin_mass: float


class CoverageReportModel(StrictModel):
    law: dict
    n_calib: int
    n_test: int
    trials: int
    seed: int
    config: ThresholdConfigModel
    mean_coverage: float
    std_err: float
    coverages: list[float]
    cutoffs: list[float]
    set_sizes: dict[str, int]
    bounds: BoundsModel | None


class DpCheckRequest(StrictModel):
    instances: int = Field(default=100, ge=1)
    max_n: int = Field(default=20, ge=1)
    max_m: int = Field(default=8, ge=1)
    epsilons: list[float] = [0.5, 1.0, 8.0]
    q_levels: list[float] = [0.3, 0.5, 0.9]
    seed: int = Field(default=0, ge=0, le=MAX_SEED)


class RatioCaseModel(StrictModel):
    n: int
    m: int
    q: float
    epsilon: float
    ratio: float
    bound: float


class DpCheckResponse(StrictModel):
    cases: list[RatioCaseModel]
    max_ratio: float
    worst_margin: float
    all_within_budget: bool


class HealthResponse(StrictModel):
    status: str
    version: str
