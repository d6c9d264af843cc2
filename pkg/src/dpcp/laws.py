"""Score distributions for simulation experiments.

Each scalar law exposes ``sample`` and ``cdf`` on [0, 1]. The
classifier law is different in kind: it emits probability tables plus
true labels, from which conformity scores are derived, and is used to
exercise the full multi-class pipeline including set sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from dpcp.errors import InvalidArgumentError


@dataclass(frozen=True)
class UniformLaw:
    """Uniform distribution on [0, 1]."""

    def sample(self, g: np.random.Generator, size: int) -> np.ndarray:
        return g.uniform(size=size)

    def cdf(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)

    def to_spec(self) -> dict:
        return {"law": "uniform"}


@dataclass(frozen=True)
class BetaLaw:
    """Beta(a, b) distribution on [0, 1]."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0.0 and self.b > 0.0):
            raise InvalidArgumentError("beta shape parameters must be positive")

    def sample(self, g: np.random.Generator, size: int) -> np.ndarray:
        return g.beta(self.a, self.b, size=size)

    def cdf(self, x) -> np.ndarray:
        return stats.beta.cdf(np.asarray(x, dtype=float), self.a, self.b)

    def to_spec(self) -> dict:
        return {"law": "beta", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class AtomMixtureLaw:
    """Mixture placing mass ``atom_mass`` on the point ``atom``.

    The remaining mass follows ``base``. Useful for checking that grid
    bins carrying an atom are handled exactly, including an atom at 0.
    """

    atom: float
    atom_mass: float
    base: UniformLaw | BetaLaw = field(default_factory=UniformLaw)

    def __post_init__(self):
        if not 0.0 <= self.atom <= 1.0:
            raise InvalidArgumentError("atom must lie in [0, 1]")
        if not 0.0 <= self.atom_mass <= 1.0:
            raise InvalidArgumentError("atom mass must lie in [0, 1]")

    def sample(self, g: np.random.Generator, size: int) -> np.ndarray:
        # Fixed consumption order: base draws first, then the mixture mask.
        base_draws = self.base.sample(g, size)
        mask = g.uniform(size=size) < self.atom_mass
        return np.where(mask, self.atom, base_draws)

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (1.0 - self.atom_mass) * self.base.cdf(x) + self.atom_mass * (x >= self.atom)

    def to_spec(self) -> dict:
        return {
            "law": "mixture",
            "atom": self.atom,
            "atom_mass": self.atom_mass,
            "base": self.base.to_spec(),
        }


@dataclass(frozen=True)
class ClassifierLaw:
    """Synthetic multi-class model: Dirichlet probability rows plus labels.

    Labels are uniform over ``n_classes``; the probability row for an
    example is Dirichlet with concentration ``base_concentration``
    everywhere and ``base_concentration + true_boost`` on the true
    class. Larger ``true_boost`` means a sharper model and smaller
    prediction sets. Scores derived from the rows are continuous, so
    the conformal machinery sees no ties.
    """

    n_classes: int = 3
    true_boost: float = 6.0
    base_concentration: float = 1.0

    def __post_init__(self):
        if isinstance(self.n_classes, bool) or not isinstance(self.n_classes, int) or self.n_classes < 2:
            raise InvalidArgumentError("need at least two classes")
        if not (self.true_boost >= 0.0 and self.base_concentration > 0.0):
            raise InvalidArgumentError("concentration parameters must be positive")

    def sample_examples(self, g: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        labels = g.integers(0, self.n_classes, size=size)
        conc = np.full((size, self.n_classes), self.base_concentration)
        conc[np.arange(size), labels] += self.true_boost
        gammas = g.gamma(shape=conc)
        probs = gammas / np.sum(gammas, axis=1, keepdims=True)
        return probs, labels

    def to_spec(self) -> dict:
        return {
            "law": "classes",
            "n_classes": self.n_classes,
            "true_boost": self.true_boost,
            "base_concentration": self.base_concentration,
        }


def parse_law(spec):
    """Build a law from its JSON specification.

    Accepts either a plain name (``"uniform"``) or a mapping with a
    ``law`` key. Unknown names or missing parameters are rejected.
    """
    if isinstance(spec, str):
        spec = {"law": spec}
    if not isinstance(spec, dict) or "law" not in spec:
        raise InvalidArgumentError(f"law spec must name a law, got {spec!r}")
    kind = spec["law"]
    try:
        if kind == "uniform":
            return UniformLaw()
        if kind == "beta":
            return BetaLaw(a=float(spec["a"]), b=float(spec["b"]))
        if kind == "mixture":
            base = parse_law(spec.get("base", {"law": "uniform"}))
            if isinstance(base, ClassifierLaw):
                raise InvalidArgumentError("mixture base must be a scalar law")
            return AtomMixtureLaw(
                atom=float(spec["atom"]), atom_mass=float(spec["atom_mass"]), base=base
            )
        if kind == "classes":
            return ClassifierLaw(
                n_classes=int(spec.get("n_classes", 3)),
                true_boost=float(spec.get("true_boost", 6.0)),
                base_concentration=float(spec.get("base_concentration", 1.0)),
            )
    except KeyError as missing:
        raise InvalidArgumentError(f"law spec {kind!r} is missing parameter {missing}") from None
    raise InvalidArgumentError(f"unsupported law {kind!r}")
