"""Dataset ingestion, standardization and split/fold generation."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

TASKS = ("regression", "binary", "multiclass")
MISSING_TOKENS = frozenset({"", "?", "na", "nan", "n/a", "null"})


class DataError(ValueError):
    """Raised when a dataset cannot be loaded or is malformed."""


@dataclass(frozen=True)
class Dataset:
    """
    Inputs, targets and metadata of a learning problem.

    Parameters
    ----------
    X : ndarray, shape (l, N)
        Input matrix, one example per row.
    y : ndarray, shape (l,)
        Real targets (regression), labels in {-1, +1} (binary) or
        integer class ids 0..K-1 (multiclass).
    feature_names : list of str
    task : {"regression", "binary", "multiclass"}
    classes : list of str, optional
        Original label values, indexed by class id (classification only).
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: List[str]
    task: str = "regression"
    classes: Optional[List[str]] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise DataError("X must be a 2-d matrix")
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError("dataset needs at least one example and one feature")
        if y.shape[0] != X.shape[0]:
            raise DataError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if self.task not in TASKS:
            raise DataError(f"unknown task {self.task!r}")
        if len(self.feature_names) != X.shape[1]:
            raise DataError("feature_names length does not match X")
        if self.task == "binary" and not np.all(np.isin(y, (-1.0, 1.0))):
            raise DataError("binary task requires labels in {-1, +1}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", list(self.feature_names))

    @property
    def n_examples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return replace(self, X=self.X[idx], y=self.y[idx])


def _is_missing(value: str) -> bool:
    return value.strip().lower() in MISSING_TOKENS


def _to_float(value: str) -> Optional[float]:
    try:
        out = float(value)
    except ValueError:
        return None
    return out if math.isfinite(out) else None


def _sort_key(values: Sequence[str]):
    """Numeric order when every value parses as a number, else lexical."""
    if all(_to_float(v) is not None for v in values):
        return lambda v: (float(v), v)
    return lambda v: v


def load_csv(
    path,
    target_column,
    task: str = "regression",
    delimiter: str = ",",
    header: bool = True,
) -> Dataset:
    """
    Read a delimited text file into a :class:`Dataset`.

    Rows containing a missing value (empty field, ``?``, ``NA`` ...) or
    fewer fields than the header are dropped. Non-numeric columns are
    expanded into one binary indicator per category, named ``col=value``.

    Parameters
    ----------
    path : path-like
    target_column : str or int or None
        Column name, or 0-based position when the file has no header.
        ``None`` reads inputs only (targets set to zero).
    task : {"regression", "binary", "multiclass"}
    delimiter : str
    header : bool
        Whether the first row holds column names.
    """
    if task not in TASKS:
        raise DataError(f"unknown task {task!r}")
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")

    rows: List[List[str]] = []
    names: Optional[List[str]] = None
    n_dropped = 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter, strict=True)
        try:
            for record in reader:
                line = reader.line_num
                if not record or all(not f.strip() for f in record):
                    continue
                if names is None:
                    if header:
                        names = [f.strip() for f in record]
                        continue
                    names = [str(i) for i in range(len(record))]
                if len(record) > len(names):
                    raise DataError(
                        f"{path}:{line}: expected {len(names)} fields, got {len(record)}"
                    )
                if len(record) < len(names) or any(_is_missing(f) for f in record):
                    n_dropped += 1
                    continue
                rows.append([f.strip() for f in record])
        except csv.Error as exc:
            raise DataError(f"{path}:{reader.line_num}: {exc}") from exc

    if names is None or not rows:
        raise DataError(f"{path}: no complete rows after removing missing values")
    if n_dropped:
        logger.warning("dropped %d rows with missing values from %s", n_dropped, path)

    if target_column is None:
        t = -1
    elif isinstance(target_column, int) or (not header and str(target_column).isdigit()):
        t = int(target_column)
        if not 0 <= t < len(names):
            raise DataError(f"target column {target_column} out of range")
    else:
        if target_column not in names:
            raise DataError(f"target column {target_column!r} not in header")
        t = names.index(target_column)

    columns = list(zip(*rows))
    raw_y = list(columns[t]) if t >= 0 else None
    blocks, feature_names = [], []
    for j, (name, col) in enumerate(zip(names, columns)):
        if j == t:
            continue
        parsed = [_to_float(v) for v in col]
        if all(v is not None for v in parsed):
            blocks.append(np.array(parsed, dtype=float)[:, None])
            feature_names.append(name)
        else:
            cats = sorted(set(col), key=_sort_key(sorted(set(col))))
            ind = np.array([[1.0 if v == c else 0.0 for c in cats] for v in col])
            blocks.append(ind)
            feature_names.extend(f"{name}={c}" for c in cats)
    if not blocks:
        raise DataError(f"{path}: no feature columns besides the target")
    X = np.hstack(blocks)
    if raw_y is None:
        return Dataset(X, np.zeros(X.shape[0]), feature_names, "regression")
    y, classes = encode_targets(raw_y, task)
    return Dataset(X, y, feature_names, task, classes)


def align_features(ds: Dataset, feature_names: Sequence[str]) -> np.ndarray:
    """
    Reorder the columns of ``ds`` to ``feature_names``. Indicator columns
    (``col=value``) absent from ``ds`` are filled with zeros; any other
    missing column is an error.
    """
    index = {name: j for j, name in enumerate(ds.feature_names)}
    out = np.zeros((ds.n_examples, len(feature_names)))
    for j, name in enumerate(feature_names):
        if name in index:
            out[:, j] = ds.X[:, index[name]]
        elif "=" not in name:
            raise DataError(f"column {name!r} missing from input data")
    return out


def encode_targets(raw: Sequence[str], task: str) -> Tuple[np.ndarray, Optional[List[str]]]:
    """Convert raw target strings to the numeric convention of ``task``."""
    if task == "regression":
        vals = [_to_float(v) for v in raw]
        if any(v is None for v in vals):
            raise DataError("regression target must be numeric")
        return np.array(vals, dtype=float), None
    labels = sorted(set(raw), key=_sort_key(sorted(set(raw))))
    if task == "binary":
        numeric = [_to_float(v) for v in labels]
        if all(v in (-1.0, 1.0) for v in numeric):
            return np.array([float(v) for v in raw]), ["-1", "1"]
        if len(labels) != 2:
            raise DataError(f"binary task needs exactly 2 label values, got {len(labels)}")
        lookup = {labels[0]: -1.0, labels[1]: 1.0}
        return np.array([lookup[v] for v in raw]), list(labels)
    lookup = {lab: float(i) for i, lab in enumerate(labels)}
    return np.array([lookup[v] for v in raw]), list(labels)


@dataclass
class Standardizer:
    """
    Per-feature affine map to zero mean and unit (ddof=1) standard deviation.

    Constant features are flagged in ``constant`` and passed through
    untouched. ``output_intercept`` is the training target mean for
    regression and 0 otherwise.
    """

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray
    output_intercept: float = 0.0

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.mean.shape[0]:
            raise DataError(
                f"expected {self.mean.shape[0]} features, got {X.shape[-1]}"
            )
        return (X - self.mean) / self.std

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.std + self.mean


def fit_standardizer(train: Dataset, center_output: Optional[bool] = None) -> Standardizer:
    X = train.X
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
    constant = ~(std > 0)
    mean = np.where(constant, 0.0, mean)
    std = np.where(constant, 1.0, std)
    if constant.any():
        logger.info("constant features left unscaled: %s", np.flatnonzero(constant).tolist())
    if center_output is None:
        center_output = train.task == "regression"
    intercept = float(train.y.mean()) if center_output else 0.0
    return Standardizer(mean, std, constant, intercept)


def standardize(
    train: Dataset, apply_to: Sequence[Dataset] = (), center_output: Optional[bool] = None
) -> Tuple[Standardizer, Dataset, List[Dataset]]:
    """
    Fit a :class:`Standardizer` on ``train`` and apply it everywhere.

    Returns the standardizer, the transformed training set and the list of
    transformed ``apply_to`` datasets. For regression, the training targets
    are centered by their mean; other targets are left as they are (the
    intercept is added back at prediction time).
    """
    st = fit_standardizer(train, center_output)
    train_out = replace(train, X=st.transform(train.X), y=train.y - st.output_intercept)
    others = [replace(ds, X=st.transform(ds.X)) for ds in apply_to]
    return st, train_out, others


def split(ds: Dataset, train_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Random train/test partition; the train size is ``floor(fraction * l)``."""
    train_idx, test_idx = split_indices(ds.n_examples, train_fraction, seed)
    return ds.subset(train_idx), ds.subset(test_idx)


def split_indices(n: int, train_fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n_train = int(math.floor(train_fraction * n))
    if n_train < 1:
        raise ValueError("training partition would be empty")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def kfold(n: int, k: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Plain shuffled k-fold partition of ``range(n)``."""
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= {n}, got k={k}")
    perm = np.random.default_rng(seed).permutation(n)
    fold_of = np.empty(n, dtype=int)
    fold_of[perm] = np.arange(n) % k
    return _folds_from_assignment(fold_of, k)


def stratified_kfold(ds: Dataset, k: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    k (train, validation) index pairs preserving class proportions.

    Members of each class are shuffled and dealt round-robin over the
    folds, the dealing position carrying over from one class to the next
    so that fold sizes stay balanced. Regression falls back to :func:`kfold`.
    """
    n = ds.n_examples
    if ds.task == "regression":
        return kfold(n, k, seed)
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= {n}, got k={k}")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=int)
    offset = 0
    for label in np.unique(ds.y):
        members = np.flatnonzero(ds.y == label)
        if members.size < k:
            logger.warning("class %s has %d members, fewer than k=%d", label, members.size, k)
        members = rng.permutation(members)
        fold_of[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return _folds_from_assignment(fold_of, k)


def _folds_from_assignment(fold_of: np.ndarray, k: int):
    idx = np.arange(fold_of.size)
    return [(idx[fold_of != f], idx[fold_of == f]) for f in range(k)]


def write_indices(path, indices) -> None:
    """Write one index per line."""
    Path(path).write_text("".join(f"{int(i)}\n" for i in indices))
