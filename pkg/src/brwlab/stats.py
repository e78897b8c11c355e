"""Interval estimates for replica frequencies."""
from __future__ import annotations

from dataclasses import dataclass

from statsmodels.stats.proportion import proportion_confint


@dataclass(frozen=True)
class Proportion:
    successes: int
    trials: int
    low: float
    high: float

    @property
    def estimate(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")

    @property
    def width(self) -> float:
        return self.high - self.low

    def excludes_zero(self) -> bool:
        return self.low > 0


def wilson(successes: int, trials: int, level: float = 0.95) -> Proportion:
    if trials <= 0:
        raise ValueError("need at least one trial")
    low, high = proportion_confint(int(successes), int(trials), alpha=1 - level, method="wilson")
    return Proportion(int(successes), int(trials), float(low), float(high))
