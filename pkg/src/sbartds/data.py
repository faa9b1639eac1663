"""Data ingestion: CSV loading, the empirical quantile transform for
predictors, and response standardization."""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import DataError


def _column_map(values):
    """Training-value -> quantile pairs for one column: rank/(N+1) with
    midranks at ties, deduplicated for interpolation."""
    n = len(values)
    quantiles = rankdata(values, method="average") / (n + 1.0)
    xs, idx = np.unique(values, return_index=True)
    return xs, quantiles[idx]


def quantile_transform(columns, names=None):
    """Empirical quantile transform of predictor columns.

    Each column is mapped by its empirical cdf (rank/(N+1), midrank ties);
    unseen values interpolate linearly between training values and clamp
    beyond the observed range, so outputs stay in (0, 1) and the map is
    monotone. Constant columns carry no information and are dropped with
    a warning. Returns (X transformed, per-column maps, kept indices).
    """
    columns = [np.asarray(c, dtype=float) for c in columns]
    names = names if names is not None else [f"x{j}" for j in range(len(columns))]
    kept, maps, out = [], [], []
    for j, col in enumerate(columns):
        if np.unique(col).size < 2:
            warnings.warn(f"dropping constant predictor column {names[j]!r}")
            continue
        xs, qs = _column_map(col)
        kept.append(j)
        maps.append((xs, qs))
        out.append(np.interp(col, xs, qs))
    if not out:
        raise DataError("no usable predictor columns after dropping constants")
    return np.column_stack(out), maps, kept


@dataclass
class Dataset:
    """Model-ready data: quantile-transformed predictors in [0,1], the
    standardized response, and enough metadata to map new queries and
    results back to the raw scales."""

    X: np.ndarray
    y_std: np.ndarray
    y_mean: float
    y_sd: float
    colnames: list
    maps: list = field(repr=False)

    @property
    def n(self):
        return len(self.y_std)

    @property
    def p(self):
        return self.X.shape[1]

    def transform_x(self, raw_rows):
        """Map raw predictor rows through the stored quantile maps."""
        raw_rows = np.atleast_2d(np.asarray(raw_rows, dtype=float))
        if raw_rows.shape[1] != self.p:
            raise DataError(
                f"expected {self.p} predictor values per row, got {raw_rows.shape[1]}"
            )
        out = np.empty_like(raw_rows)
        for j, (xs, qs) in enumerate(self.maps):
            out[:, j] = np.interp(raw_rows[:, j], xs, qs)
        return out

    def y_raw(self, y_std):
        return np.asarray(y_std) * self.y_sd + self.y_mean

    def y_standardized(self, y_raw):
        return (np.asarray(y_raw) - self.y_mean) / self.y_sd


def build_dataset(X_raw, y_raw, names=None):
    """Quantile-transform predictors and standardize the response."""
    X_raw = np.atleast_2d(np.asarray(X_raw, dtype=float))
    y_raw = np.asarray(y_raw, dtype=float)
    if np.isnan(X_raw).any() or np.isnan(y_raw).any():
        raise DataError("missing values are rejected, not imputed")
    if len(y_raw) != len(X_raw):
        raise DataError("response and predictors have different lengths")
    if len(y_raw) < 3:
        raise DataError("need at least 3 observations")
    names = names if names is not None else [f"x{j}" for j in range(X_raw.shape[1])]
    X, maps, kept = quantile_transform([X_raw[:, j] for j in range(X_raw.shape[1])], names)
    y_mean = float(y_raw.mean())
    y_sd = float(y_raw.std(ddof=1))
    if y_sd <= 0:
        raise DataError("response is constant")
    return Dataset(
        X=X,
        y_std=(y_raw - y_mean) / y_sd,
        y_mean=y_mean,
        y_sd=y_sd,
        colnames=[names[j] for j in kept],
        maps=maps,
    )


def load_csv(path, response, predictors=None):
    """Read a headered CSV into (X_raw, y_raw, predictor names).

    predictors defaults to every non-response column. Missing or
    non-numeric entries raise DataError.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)
    if response not in header:
        raise DataError(f"{path}: response column {response!r} not in header")
    if predictors is None:
        predictors = [c for c in header if c != response]
    missing = [c for c in predictors if c not in header]
    if missing:
        raise DataError(f"{path}: predictor columns not in header: {missing}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    cols = {name: header.index(name) for name in [response] + list(predictors)}
    data = {name: np.empty(len(rows)) for name in cols}
    for i, row in enumerate(rows):
        for name, j in cols.items():
            if j >= len(row) or row[j].strip() == "":
                raise DataError(f"{path}: missing value at row {i + 2}, column {name!r}")
            try:
                data[name][i] = float(row[j])
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric value {row[j]!r} at row {i + 2}, "
                    f"column {name!r}"
                ) from None
    X_raw = np.column_stack([data[c] for c in predictors])
    return X_raw, data[response], list(predictors)
