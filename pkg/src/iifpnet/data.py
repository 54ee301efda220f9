"""Regression datasets and their preprocessing.

The pipeline fits on the training split only: standardise features, project
onto the top ``k`` principal components of the training covariance (no
whitening) and min-max scale the target to ``[0, 1]``.
"""

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, ParseError
from .linalg import sym_eigen

log = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.6, 0.2, 0.2)
GUARD_BAND = (-0.5, 1.5)


@dataclass
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    feature_names: list = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.features.ndim != 2:
            self.features = self.features.reshape(len(self.targets), -1)
        if self.features.shape[0] != self.targets.shape[0]:
            raise ContractError(
                f"{self.features.shape[0]} feature rows but {self.targets.shape[0]} targets"
            )
        if not self.feature_names:
            self.feature_names = [f"x{i}" for i in range(self.features.shape[1])]

    def __len__(self):
        return self.targets.shape[0]

    def subset(self, idx):
        return Dataset(self.features[idx], self.targets[idx], list(self.feature_names))


def _parse_cell(text):
    text = text.strip()
    if text == "" or text.lower() in ("na", "nan", "?", "null", "none"):
        return math.nan
    return float(text)


def load_csv(path, target_column):
    """Read a comma-separated file with a header row.

    Columns containing any missing value (empty, ``NA``, ``?``...) are
    dropped.  A non-numeric entry in a kept column raises ``ParseError``
    naming the row and column.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("file is empty", str(path))
    header = [h.strip() for h in rows[0]]
    if target_column not in header:
        raise ParseError(f"target column {target_column!r} not found; columns are {header}", str(path))
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    ncol = len(header)
    for i, r in enumerate(body):
        if len(r) != ncol:
            raise ParseError(f"expected {ncol} fields, found {len(r)}", f"row {i + 2}")

    missing = set()
    for i, r in enumerate(body):
        for j, cell in enumerate(r):
            try:
                if math.isnan(_parse_cell(cell)):
                    missing.add(j)
            except ValueError:
                pass

    tcol = header.index(target_column)
    if tcol in missing:
        raise ParseError(f"target column {target_column!r} has missing values", str(path))
    keep = [j for j in range(ncol) if j not in missing and j != tcol]
    dropped = [header[j] for j in sorted(missing)]
    if dropped:
        log.info("dropping columns with missing values: %s", dropped)

    values = np.empty((len(body), len(keep)))
    targets = np.empty(len(body))
    for i, r in enumerate(body):
        for col_out, j in enumerate([tcol] + keep):
            try:
                v = _parse_cell(r[j])
            except ValueError as exc:
                raise ParseError(
                    f"non-numeric value {r[j]!r} in column {header[j]!r}", f"row {i + 2}, column {j + 1}"
                ) from exc
            if not math.isfinite(v):
                raise ParseError(f"non-finite value in column {header[j]!r}", f"row {i + 2}, column {j + 1}")
            if col_out == 0:
                targets[i] = v
            else:
                values[i, col_out - 1] = v
    return Dataset(values, targets, [header[j] for j in keep])


def split(dataset, fractions=DEFAULT_FRACTIONS, seed=0):
    """Seeded shuffle followed by contiguous train/validation/test slices."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    n = len(dataset)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise ConfigError(f"split sizes {n_train}/{n_val}/{n_test} leave an empty split")
    order = np.random.default_rng(seed).permutation(n)
    return (
        dataset.subset(order[:n_train]),
        dataset.subset(order[n_train : n_train + n_val]),
        dataset.subset(order[n_train + n_val :]),
    )


@dataclass
class Preprocessor:
    columns: np.ndarray
    feature_means: np.ndarray
    feature_stds: np.ndarray
    pca_mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    target_min: float
    target_max: float

    @property
    def k(self):
        return self.components.shape[0]

    def transform_features(self, x):
        x = np.asarray(x, dtype=np.float64)[:, self.columns]
        z = (x - self.feature_means) / self.feature_stds
        return (z - self.pca_mean) @ self.components.T

    def scale_targets(self, t):
        return (np.asarray(t, dtype=np.float64) - self.target_min) / (self.target_max - self.target_min)

    def inverse_targets(self, s):
        return np.asarray(s, dtype=np.float64) * (self.target_max - self.target_min) + self.target_min

    def apply(self, dataset, clip=True):
        """Transform a dataset; ``clip`` bounds scaled targets to the guard band."""
        t = self.scale_targets(dataset.targets)
        if clip:
            t = np.clip(t, *GUARD_BAND)
        names = [f"pc{i + 1}" for i in range(self.k)]
        return Dataset(self.transform_features(dataset.features), t, names)


def _sign_fix(vecs):
    # largest-magnitude entry of each eigenvector made positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def fit_preprocessor(train, k=10):
    x = np.asarray(train.features, dtype=np.float64)
    n, d = x.shape
    stds = x.std(axis=0)
    keep = np.flatnonzero(stds > 1e-12)
    if keep.size < d:
        dropped = [train.feature_names[j] for j in range(d) if j not in set(keep)]
        warnings.warn(f"dropping zero-variance features {dropped}", RuntimeWarning, stacklevel=2)
    d_kept = keep.size
    if d_kept == 0:
        raise ContractError("no feature has positive variance")
    if d_kept < k:
        warnings.warn(f"only {d_kept} usable features; lowering k from {k}", RuntimeWarning, stacklevel=2)
        k = d_kept
    if n <= k:
        raise ContractError(f"need more than {k} training rows for PCA, got {n}")

    means = x[:, keep].mean(axis=0)
    z = (x[:, keep] - means) / stds[keep]
    pca_mean = z.mean(axis=0)
    zc = z - pca_mean
    cov = zc.T @ zc / (n - 1)
    vals, vecs = sym_eigen(cov)
    comps = _sign_fix(vecs[:, :k]).T

    tmin, tmax = float(np.min(train.targets)), float(np.max(train.targets))
    if not tmax > tmin:
        raise ContractError("training targets are constant; cannot scale to [0, 1]")
    return Preprocessor(keep, means, stds[keep], pca_mean, comps, vals[:k], tmin, tmax)


def apply(prep, dataset, clip=True):
    return prep.apply(dataset, clip=clip)


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def synthetic_regression(n_samples=2000, d=10, seed=0, noise=0.05):
    """Standard-normal features, target ``sigmoid(w.x + c) + noise`` clipped to [0, 1].

    ``w`` has i.i.d. ``N(0, 1/d)`` entries, which keeps the linear form at
    unit scale whatever the dimension.
    """
    if n_samples < 50:
        raise ConfigError(f"synthetic dataset needs at least 50 samples, got {n_samples}")
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 1.0 / math.sqrt(d), size=d)
    c = rng.normal(0.0, 0.5)
    x = rng.normal(size=(n_samples, d))
    t = sigmoid(x @ w + c)
    if noise > 0:
        t = t + noise * rng.normal(size=n_samples)
    return Dataset(x, np.clip(t, 0.0, 1.0), [f"x{i}" for i in range(d)])


def save_csv(dataset, path, target_name="target"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(dataset.feature_names) + [target_name])
        for row, t in zip(dataset.features, dataset.targets):
            w.writerow([repr(float(v)) for v in row] + [repr(float(t))])
