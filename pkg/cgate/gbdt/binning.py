"""
Per-feature histogram binning.

Value bins are delimited by ascending edges; a value goes to bin
``searchsorted(edges, x, side="right")``, so bin <= b holds exactly when
``x < edges[b]``. Missing values (NaN) get a dedicated bin after all value bins.
"""

from dataclasses import dataclass

import numpy as np

MAX_BINS = 256


@dataclass(frozen=True)
class BinMapper:
    edges: list[np.ndarray]
    max_bins: int

    @property
    def missing_bin(self) -> int:
        return self.max_bins

    @property
    def n_features(self) -> int:
        return len(self.edges)

    @property
    def value_bins(self) -> np.ndarray:
        """Number of value bins in use per feature."""
        return np.array([len(e) + 1 for e in self.edges], dtype=np.int64)

    @classmethod
    def fit(cls, X: np.ndarray, max_bins: int = MAX_BINS) -> "BinMapper":
        if not 2 <= max_bins <= MAX_BINS:
            raise ValueError(f"max_bins must lie in [2, {MAX_BINS}], got {max_bins}")
        edges = []
        for j in range(X.shape[1]):
            column = X[:, j]
            values = np.unique(column[~np.isnan(column)])
            if values.size <= max_bins:
                cut = (values[:-1] + values[1:]) / 2.0
            else:
                probs = np.linspace(0.0, 1.0, max_bins + 1)[1:-1]
                cut = np.unique(np.quantile(values, probs))
            edges.append(cut.astype(np.float64))
        return cls(edges=edges, max_bins=max_bins)

    def transform(self, X: np.ndarray) -> np.ndarray:
        codes = np.empty(X.shape, dtype=np.int32)
        for j, cut in enumerate(self.edges):
            column = X[:, j]
            missing = np.isnan(column)
            codes[:, j] = np.where(missing, self.missing_bin, np.searchsorted(cut, column, side="right"))
        return codes

    def threshold(self, feature: int, bin_index: int) -> float:
        return float(self.edges[feature][bin_index])
