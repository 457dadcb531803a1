"""Basis kernels, their scalings and the precomputed kernel bank."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

KINDS = ("linear_feature", "polynomial", "gaussian")
SCALING_KINDS = (
    "unit",
    "trace_inverse",
    "trace_inverse_centered",
    "feature_norm_inverse",
    "fisher",
    "fisher_nonlinear",
    "fisher_sqrt",
)


class DegenerateKernel(ValueError):
    """A kernel whose scaling denominator vanishes."""


@dataclass(frozen=True)
class BasisKernelSpec:
    """
    One basis kernel.

    ``features`` is ``"all"`` or a tuple of 0-based column indices. For
    ``linear_feature`` the single column is given by ``feature``.
    """

    kind: str
    degree: int = 1
    gamma: float = 1.0
    features: Union[str, Tuple[int, ...]] = "all"
    feature: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "polynomial" and self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")
        if self.kind == "gaussian" and not self.gamma > 0:
            raise ValueError("gaussian width must be > 0")
        if self.features != "all":
            object.__setattr__(self, "features", tuple(int(j) for j in self.features))
            if not self.features:
                raise ValueError("empty feature subset")

    @classmethod
    def linear_feature(cls, j: int) -> "BasisKernelSpec":
        return cls("linear_feature", feature=int(j), features=(int(j),))

    @classmethod
    def polynomial(cls, degree: int, features="all") -> "BasisKernelSpec":
        return cls("polynomial", degree=int(degree), features=features)

    @classmethod
    def gaussian(cls, gamma: float, features="all") -> "BasisKernelSpec":
        return cls("gaussian", gamma=float(gamma), features=features)

    def columns(self, n_features: int):
        if self.kind == "linear_feature":
            cols = [self.feature]
        elif self.features == "all":
            return slice(None)
        else:
            cols = list(self.features)
        if min(cols) < 0 or max(cols) >= n_features:
            raise ValueError(f"feature index out of range for {self}")
        return cols

    def to_dict(self) -> dict:
        if self.kind == "linear_feature":
            return {"kind": self.kind, "feature": self.feature}
        out = {"kind": self.kind}
        if self.kind == "polynomial":
            out["degree"] = self.degree
        else:
            out["gamma"] = self.gamma.hex()
        out["features"] = "all" if self.features == "all" else list(self.features)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "BasisKernelSpec":
        kind = obj["kind"]
        if kind == "linear_feature":
            return cls.linear_feature(obj["feature"])
        feats = obj.get("features", "all")
        if kind == "polynomial":
            return cls.polynomial(obj["degree"], feats)
        if kind == "gaussian":
            g = obj["gamma"]
            return cls.gaussian(float.fromhex(g) if isinstance(g, str) else g, feats)
        raise ValueError(f"unknown kernel kind {kind!r}")

    def label(self) -> str:
        where = "all" if self.features == "all" else ",".join(map(str, self.features))
        if self.kind == "linear_feature":
            return f"linear[{self.feature}]"
        if self.kind == "polynomial":
            return f"poly{self.degree}[{where}]"
        return f"rbf{self.gamma:g}[{where}]"


def gram(spec: BasisKernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Unscaled kernel matrix ``K[i, j] = k(A[i], B[j])``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    cols = spec.columns(A.shape[1])
    A, B = A[:, cols], B[:, cols]
    if spec.kind == "linear_feature":
        return A @ B.T
    if spec.kind == "polynomial":
        return (1.0 + A @ B.T) ** spec.degree
    return np.exp(-spec.gamma * cdist(A, B, "sqeuclidean"))


def gram_diag(spec: BasisKernelSpec, A: np.ndarray) -> np.ndarray:
    """Diagonal ``k(x_i, x_i)`` without building the full matrix."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    sub = A[:, spec.columns(A.shape[1])]
    if spec.kind == "gaussian":
        return np.ones(A.shape[0])
    sq = np.einsum("ij,ij->i", sub, sub)
    if spec.kind == "linear_feature":
        return sq
    return (1.0 + sq) ** spec.degree


def eval_kernel(spec: BasisKernelSpec, x1, x2) -> float:
    return float(gram(spec, np.atleast_2d(x1), np.atleast_2d(x2))[0, 0])


def default_benchmark_specs(n_features: int) -> List[BasisKernelSpec]:
    """
    Polynomial kernels of degree 1-3 and 10 Gaussian kernels with widths
    log-spaced in [1e-3, 1e3], on every single feature and on all features
    jointly: ``13 * (N + 1)`` kernels.
    """
    if n_features < 1:
        raise ValueError("need at least one feature")
    gammas = np.logspace(-3, 3, 10)
    subsets = [(j,) for j in range(n_features)] + ["all"]
    specs = []
    for sub in subsets:
        specs.extend(BasisKernelSpec.polynomial(n, sub) for n in (1, 2, 3))
        specs.extend(BasisKernelSpec.gaussian(g, sub) for g in gammas)
    return specs


def linear_specs(n_features: int) -> List[BasisKernelSpec]:
    return [BasisKernelSpec.linear_feature(j) for j in range(n_features)]


def load_specs(path) -> List[BasisKernelSpec]:
    """
    Read a kernel spec file: a JSON list of objects such as
    ``{"kind": "gaussian", "gamma": 0.1, "features": [0, 2]}``,
    ``{"kind": "polynomial", "degree": 2, "features": "all"}`` or
    ``{"kind": "linear_feature", "feature": 3}``.
    """
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("kernels", [])
    specs = [BasisKernelSpec.from_dict(obj) for obj in data]
    if not specs:
        raise ValueError(f"{path}: no kernels listed")
    return specs


def save_specs(specs: Sequence[BasisKernelSpec], path) -> None:
    Path(path).write_text(json.dumps([s.to_dict() for s in specs], indent=1) + "\n")


@dataclass(frozen=True)
class ScalingRule:
    kind: str = "trace_inverse"
    transductive: bool = False

    def __post_init__(self):
        if self.kind not in SCALING_KINDS:
            raise ValueError(f"unknown scaling rule {self.kind!r}")
        if self.transductive and self.kind.startswith("fisher"):
            raise ValueError("fisher scalings use labels and cannot be transductive")

    @property
    def centered(self) -> bool:
        return self.kind == "trace_inverse_centered"


@dataclass(frozen=True)
class Centering:
    """Training statistics of a kernel centered in feature space."""

    col_mean: np.ndarray
    grand_mean: float


def center_gram(K: np.ndarray) -> Tuple[np.ndarray, Centering]:
    col = K.mean(axis=0)
    grand = float(col.mean())
    Kc = K - col[None, :] - col[:, None] + grand
    return 0.5 * (Kc + Kc.T), Centering(col, grand)


def center_cross(Kx: np.ndarray, cent: Centering) -> np.ndarray:
    """Center a cross block ``Kx[j, t] = k(x_j, x*_t)`` with training statistics."""
    return Kx - Kx.mean(axis=0)[None, :] - cent.col_mean[:, None] + cent.grand_mean


def _class_variance_sum(values: np.ndarray, y: np.ndarray, ddof: int) -> float:
    tot = 0.0
    for lab in (1.0, -1.0):
        v = values[y == lab]
        if v.size <= ddof:
            raise ValueError("each class needs enough members for a within-class variance")
        tot += float(v.var(ddof=ddof))
    return tot


def _fisher_nonlinear_denominator(K: np.ndarray, y: np.ndarray) -> float:
    tot = 0.0
    for lab in (1.0, -1.0):
        idx = np.flatnonzero(y == lab)
        if idx.size == 0:
            raise ValueError("fisher scaling needs both classes present")
        Kc = K[np.ix_(idx, idx)]
        n = idx.size
        tot += float(np.trace(Kc) / n - Kc.sum() / n**2)
    return tot


def scaling_value(
    rule: ScalingRule,
    spec: BasisKernelSpec,
    X: np.ndarray,
    y: Optional[np.ndarray] = None,
    test_X: Optional[np.ndarray] = None,
    K: Optional[np.ndarray] = None,
    centering: Optional[Centering] = None,
) -> float:
    """
    Scaling factor ``s_k`` of one basis kernel.

    ``K`` and ``centering`` may be passed to reuse an already computed
    (centered) training Gram matrix. Raises :class:`DegenerateKernel` when
    the denominator is not strictly positive.
    """
    kind = rule.kind
    if kind == "unit":
        return 1.0
    if rule.transductive and test_X is None:
        raise ValueError("transductive scaling requires test inputs")

    if kind in ("trace_inverse", "feature_norm_inverse", "trace_inverse_centered"):
        if kind == "trace_inverse_centered":
            if K is None or centering is None:
                K, centering = center_gram(gram(spec, X, X))
            denom = float(np.trace(K))
            if rule.transductive:
                Kx = gram(spec, X, test_X)
                diag_t = gram_diag(spec, test_X)
                denom += float(np.sum(
                    diag_t - 2.0 * Kx.mean(axis=0) + centering.grand_mean
                ))
        else:
            denom = float(np.sum(gram_diag(spec, X)))
            if rule.transductive:
                denom += float(np.sum(gram_diag(spec, test_X)))
    else:
        if y is None:
            raise ValueError("fisher scalings require binary labels")
        y = np.asarray(y, dtype=float)
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("fisher scalings require labels in {-1, +1}")
        if kind == "fisher_nonlinear":
            if K is None:
                K = gram(spec, X, X)
            denom = _fisher_nonlinear_denominator(K, y)
        else:
            if spec.kind != "linear_feature":
                raise ValueError(f"{kind} scaling applies to linear_feature kernels only")
            col = np.asarray(X, dtype=float)[:, spec.feature]
            if kind == "fisher":
                denom = _class_variance_sum(col, y, ddof=0)
            else:
                denom = np.sqrt(_class_variance_sum(col, y, ddof=1))
    if not (np.isfinite(denom) and denom > 1e-300):
        raise DegenerateKernel(f"zero scaling denominator for {spec.label()}")
    return 1.0 / denom


@dataclass
class KernelBank:
    """
    Scaled Gram matrices ``R[k] = s[k] * K_k`` on the training inputs.

    ``R`` is stored as a dense (m, l, l) array. ``centering[k]`` holds the
    training statistics when kernel ``k`` was centered, else ``None``.
    """

    R: np.ndarray
    s: np.ndarray
    specs: List[BasisKernelSpec]
    train_X: np.ndarray
    rule: ScalingRule
    centering: List[Optional[Centering]] = field(default_factory=list)
    dropped: List[BasisKernelSpec] = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.R.shape[0]

    @property
    def n_examples(self) -> int:
        return self.R.shape[1]

    def cross_rows(self, k: int, X_star: np.ndarray) -> np.ndarray:
        """``(l, t)`` block of scaled kernel values between training and new inputs."""
        return cross_kernel_rows(self.specs[k], self.s[k], self.train_X, X_star, self.centering[k])


def build_bank(
    X: np.ndarray,
    specs: Sequence[BasisKernelSpec],
    rule: ScalingRule = ScalingRule(),
    y: Optional[np.ndarray] = None,
    test_X: Optional[np.ndarray] = None,
) -> KernelBank:
    """
    Compute the scaled kernel bank on training inputs ``X``.

    Kernels with a vanishing scaling denominator are dropped with a
    warning; an error is raised if none survive.
    """
    X = np.asarray(X, dtype=float)
    if not len(specs):
        raise ValueError("no basis kernels given")
    if rule.transductive and test_X is None:
        raise ValueError("transductive scaling requires test inputs")
    mats, scales, kept, cents, dropped = [], [], [], [], []
    for spec in specs:
        K = gram(spec, X, X)
        K = 0.5 * (K + K.T)
        cent = None
        if rule.centered:
            K, cent = center_gram(K)
        try:
            s = scaling_value(rule, spec, X, y, test_X, K=K, centering=cent)
        except DegenerateKernel as exc:
            logger.warning("dropping kernel: %s", exc)
            dropped.append(spec)
            continue
        mats.append(s * K)
        scales.append(s)
        kept.append(spec)
        cents.append(cent)
    if not kept:
        raise ValueError("every basis kernel is degenerate")
    return KernelBank(np.stack(mats), np.array(scales), kept, X.copy(), rule, cents, dropped)


def cross_kernel_rows(
    spec: BasisKernelSpec,
    s: float,
    train_X: np.ndarray,
    X_star: np.ndarray,
    centering: Optional[Centering] = None,
) -> np.ndarray:
    Kx = gram(spec, train_X, np.atleast_2d(X_star))
    if centering is not None:
        Kx = center_cross(Kx, centering)
    return s * Kx


def cross_kernel_row(spec, s, train_X, x_star, centering=None) -> np.ndarray:
    """Scaled kernel values ``s * k(x_j, x*)`` for j over the training set."""
    return cross_kernel_rows(spec, s, train_X, np.atleast_2d(x_star), centering)[:, 0]


def alignment(R_k: np.ndarray, y: np.ndarray) -> float:
    """Kernel-target alignment ``y' R_k y``."""
    y = np.asarray(y, dtype=float)
    return float(y @ R_k @ y)


def alignments(bank: KernelBank, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return np.einsum("i,kij,j->k", y, bank.R, y)
