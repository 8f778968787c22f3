"""Posterior report container shared by every inference route."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MODELS = ("noisy-or", "multimembership", "simple-bayes")
METHODS = ("brute-force", "quickscore", "likelihood-weighting", "negative-evidence", "closed-form")


@dataclass
class PosteriorReport:
    """Per-disease posteriors ``p(d+ | evidence)`` under one model.

    ``posteriors`` preserves network disease order, which doubles as the
    tie-breaking ordinal for ranking.
    """

    model: str
    method: str
    posteriors: dict[str, float]
    evidence_probability: float | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_array(cls, net, model, method, values, **kwargs):
        values = np.asarray(values, dtype=float)
        return cls(model, method, dict(zip(net.disease_ids, map(float, values))), **kwargs)

    def values(self) -> np.ndarray:
        return np.fromiter(self.posteriors.values(), dtype=float, count=len(self.posteriors))
