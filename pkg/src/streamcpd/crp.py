"""Chinese-restaurant-process bookkeeping over the MAP label history.

The state never represents class probabilities explicitly: both the global
predictive and the per-run-window predictive come straight from seating
counts. Counts are stored as per-class prefix sums c_k(tau) = #{s <= tau :
label_s = k}, so the count of class k inside the window of any run-length
hypothesis r is the O(1) difference c_k(t) - c_k(t - r). That makes one
step's predictive evaluation across all live hypotheses a single vectorized
gather instead of a per-hypothesis count table.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, ContractViolation


class LabelCounts:
    """Growable per-class prefix counts with O(1) windowed queries."""

    def __init__(self, n_classes: int = 0, horizon_hint: int = 1024):
        cap_k = max(4, n_classes)
        cap_t = max(16, horizon_hint)
        self._c = np.zeros((cap_k, cap_t + 1), dtype=np.int64)
        self.n_classes = n_classes
        self.t = 0

    def _grow(self, k: int) -> None:
        rows, cols = self._c.shape
        if self.t + 1 >= cols:
            self._c = np.concatenate([self._c, np.zeros((rows, cols), dtype=np.int64)], axis=1)
        if k > self._c.shape[0]:
            rows, cols = self._c.shape
            extra = np.zeros((max(rows, k - rows), cols), dtype=np.int64)
            self._c = np.concatenate([self._c, extra], axis=0)

    def record(self, k: int) -> None:
        """Append one label; extends every prefix-count sequence by one slot."""
        if k < 1:
            raise ContractViolation(f"class ids are 1-based, got {k}")
        self._grow(k)
        t = self.t
        self._c[:, t + 1] = self._c[:, t]
        self._c[k - 1, t + 1] += 1
        self.n_classes = max(self.n_classes, k)
        self.t = t + 1

    def total(self, k: int) -> int:
        """m_k: occurrences of class k over the whole history."""
        if k > self._c.shape[0]:
            return 0
        return int(self._c[k - 1, self.t])

    def totals(self, n: int | None = None) -> np.ndarray:
        """Occurrence counts for classes 1..n (default: all seen classes)."""
        n = self.n_classes if n is None else n
        self._grow(max(n, 1))
        return self._c[:n, self.t].copy()

    def window_counts(self, k: int, runs: np.ndarray) -> np.ndarray:
        """Count of class k among the last r labels, vectorized over r."""
        runs = np.asarray(runs, dtype=np.int64)
        if runs.size and (runs.min() < 0 or runs.max() > self.t):
            raise ContractViolation(f"window lengths must lie in [0, {self.t}]")
        if k > self._c.shape[0]:
            return np.zeros(runs.shape, dtype=np.int64)
        ck = self._c[k - 1]
        return ck[self.t] - ck[self.t - runs]

    def prefix(self, k: int) -> np.ndarray:
        """The prefix-count sequence c_k(0..t) for one class (copy)."""
        self._grow(max(k, 1))
        return self._c[k - 1, : self.t + 1].copy()


class CrpState:
    """CRP seating over the MAP label history.

    Labels are canonical: class ids are assigned in order of first
    appearance, so ids are the contiguous range 1..k_current with no gaps.
    """

    def __init__(self, alpha: float, horizon_hint: int = 1024):
        if not (isinstance(alpha, (int, float)) and math.isfinite(alpha) and alpha > 0):
            raise ConfigError(f"CRP concentration alpha must be positive, got {alpha!r}")
        self.alpha = float(alpha)
        self.labels: list[int] = []
        self.k_current = 0
        self._counts = LabelCounts(0, horizon_hint)

    @property
    def t(self) -> int:
        return len(self.labels)

    def global_predictive(self) -> np.ndarray:
        """Predictive over classes 1..K+1 given the full label history.

        Entry k <= K is m_k / (t + alpha); the last entry is the new-class
        mass alpha / (t + alpha). Sums to 1 exactly up to rounding.
        """
        denom = self.t + self.alpha
        counts = self._counts.totals(self.k_current).astype(float)
        return np.concatenate([counts, [self.alpha]]) / denom

    def run_predictive_many(self, runs: np.ndarray, k: int) -> np.ndarray:
        """Predictive of label k restricted to the last-r-labels window, for
        each window length in ``runs``.

        With w = count of k in the window: w / (r + alpha) if w > 0, else
        the new-table mass alpha / (r + alpha). An unseen-in-window class
        gets the full new-table mass; under the CRP, "not in this window"
        is exactly the new-table event. For r = 0 the window is empty and
        the value is alpha / alpha = 1.
        """
        if not (1 <= k <= self.k_current + 1):
            raise ContractViolation(
                f"class id {k} out of range 1..{self.k_current + 1}"
            )
        runs = np.asarray(runs, dtype=np.int64)
        w = self._counts.window_counts(k, runs)
        num = np.where(w > 0, w.astype(float), self.alpha)
        return num / (runs + self.alpha)

    def run_predictive(self, r: int, k: int) -> float:
        """Scalar form of :meth:`run_predictive_many`."""
        return float(self.run_predictive_many(np.array([r]), k)[0])

    def record_assignment(self, k: int) -> None:
        """Record the MAP label for this step; opens class K+1 if k is new."""
        if not (1 <= k <= self.k_current + 1):
            raise ContractViolation(
                f"cannot record class {k}: next unused id is {self.k_current + 1}"
            )
        self.labels.append(k)
        self._counts.record(k)
        if k == self.k_current + 1:
            self.k_current = k

    def counts(self) -> np.ndarray:
        """Current per-class totals m_1..m_K."""
        return self._counts.totals(self.k_current)


def sample_class(predictive: np.ndarray, rng: np.random.Generator) -> int:
    """Categorical draw from a predictive vector; 1-based class id.

    Deterministic given the generator's seed and stream position.
    """
    p = np.asarray(predictive, dtype=float)
    if p.size == 0 or np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-12:
        raise ContractViolation("predictive must be a probability vector (sum 1 within 1e-12)")
    cdf = np.cumsum(p)
    u = rng.random()
    k = int(np.searchsorted(cdf, u, side="right")) + 1
    return min(k, p.size)


def sequence_probability(labels, alpha: float) -> float:
    """Chain-rule probability of a canonical label sequence under the CRP.

    Canonical means classes are numbered by first appearance (1, then 2,
    ...). Intended for tests: exchangeability says the value depends only
    on the sizes of the induced blocks.
    """
    labels = list(labels)
    if not (isinstance(alpha, (int, float)) and alpha > 0):
        raise ConfigError(f"alpha must be positive, got {alpha!r}")
    seen = 0
    counts: dict[int, int] = {}
    prob = 1.0
    for i, z in enumerate(labels):
        if not (1 <= z <= seen + 1):
            raise ContractViolation(
                f"labels must be canonically numbered; position {i} has {z}, expected <= {seen + 1}"
            )
        if z == seen + 1:
            prob *= alpha / (i + alpha)
            seen += 1
        else:
            prob *= counts[z] / (i + alpha)
        counts[z] = counts.get(z, 0) + 1
    return prob
