"""Seeded synthetic datasets and text serialization.

Two dataset families are generated here: a two-layer linear representation
learning problem (train/validation splits sharing a ground-truth bottom layer)
and a data hyper-cleaning problem (training labels corrupted on a Bernoulli
row mask). Generation is driven by a single documented RNG stream so one seed
always yields one dataset, across platforms.

RNG stream contract (id "pcg64-polar-1"): uniforms come from numpy's PCG64
bit generator; standard normals are produced by the Marsaglia polar transform
on consecutive uniforms with spare-value caching, never by ziggurat tables.
Matrices are filled row-major, one field after another in the documented
order; the polar spare carries across field boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import as_matrix

RNG_ID = "pcg64-polar-1"
FORMAT_LINE = "pbgd-dataset v1"

# Trajectory CSV schema; fixed, pinned by a golden-file test.
TRAJECTORY_HEADER = (
    "k,upper_rel_err,lower_rel_err,grad_norm_u,grad_norm_v,"
    "penalized_value,mu_k,bias_bound,wall_ms"
)


class DatasetFormatError(Exception):
    """Raised when a dataset container is malformed or incomplete."""


class PolarGaussianRng:
    """Deterministic sampler: PCG64 uniforms, polar-method Gaussians.

    Gaussian parameters are (mean, variance); standard deviation is
    sqrt(variance).
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._bits = np.random.Generator(np.random.PCG64(self.seed))
        self._spare: float | None = None

    def uniform(self) -> float:
        """One double in [0, 1) from the raw bit stream."""
        return float(self._bits.random())

    def standard_normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        while True:
            a = 2.0 * self._bits.random() - 1.0
            b = 2.0 * self._bits.random() - 1.0
            s = a * a + b * b
            if 0.0 < s < 1.0:
                break
        factor = math.sqrt(-2.0 * math.log(s) / s)
        self._spare = b * factor
        return a * factor

    def normal_matrix(self, rows: int, cols: int, mean=0.0, variance=1.0) -> np.ndarray:
        """(rows x cols) matrix of N(mean, variance) entries, filled row-major.

        mean may be a scalar or a (rows x cols) array (entrywise means).
        """
        sd = math.sqrt(variance)
        flat = np.empty(rows * cols, dtype=np.float64)
        for i in range(flat.size):
            flat[i] = self.standard_normal()
        return np.asarray(mean, dtype=np.float64) + sd * flat.reshape(rows, cols)

    def standard_normal_vector(self, count: int) -> np.ndarray:
        """1-D array of count standard normals."""
        out = np.empty(count, dtype=np.float64)
        for i in range(count):
            out[i] = self.standard_normal()
        return out

    def bernoulli_vector(self, count: int, rate: float) -> np.ndarray:
        """Boolean vector; entry i is True with probability rate."""
        out = np.empty(count, dtype=bool)
        for i in range(count):
            out[i] = self.uniform() < rate
        return out


@dataclass(frozen=True)
class ReprDataset:
    """Representation-learning data: two-layer linear model, two splits.

    Ground truth: Y_trn is generated from W1_star @ W2_star, Y_val from
    W1_star @ W2_tilde_star (a small perturbation of W2_star), both plus
    entrywise label noise.
    """

    x_trn: np.ndarray
    y_trn: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    w1_star: np.ndarray
    w2_star: np.ndarray
    w2_tilde_star: np.ndarray
    seed: int

    def __post_init__(self):
        for name in (
            "x_trn", "y_trn", "x_val", "y_val",
            "w1_star", "w2_star", "w2_tilde_star",
        ):
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))
        n_trn, m = self.x_trn.shape
        n_val = self.x_val.shape[0]
        m2, h = self.w1_star.shape
        h2, n_out = self.w2_star.shape
        if self.x_val.shape[1] != m or m2 != m or h2 != h:
            raise ValueError("inconsistent feature/layer dimensions")
        if self.y_trn.shape != (n_trn, n_out) or self.y_val.shape != (n_val, n_out):
            raise ValueError("label shapes do not match data shapes")
        if self.w2_tilde_star.shape != (h, n_out):
            raise ValueError("w2_tilde_star shape mismatch")
        if m < max(n_trn, n_val) or h < max(m, n_out):
            raise ValueError(
                "overparameterization requires m >= max(N, N') and h >= max(m, n)"
            )

    @property
    def dims(self) -> dict:
        return {
            "N": self.x_trn.shape[0],
            "N_prime": self.x_val.shape[0],
            "m": self.x_trn.shape[1],
            "n": self.y_trn.shape[1],
            "h": self.w1_star.shape[1],
        }


@dataclass(frozen=True)
class HypercleanDataset:
    """Hyper-cleaning data: linear regression with corrupted training rows."""

    x_trn: np.ndarray
    y_trn: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    w_star: np.ndarray
    corruption_mask: np.ndarray
    seed: int

    def __post_init__(self):
        for name in ("x_trn", "y_trn", "x_val", "y_val", "w_star"):
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))
        mask = np.asarray(self.corruption_mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "corruption_mask", mask)
        n_trn, m = self.x_trn.shape
        n_val = self.x_val.shape[0]
        if self.x_val.shape[1] != m or self.w_star.shape[0] != m:
            raise ValueError("inconsistent feature dimensions")
        n_out = self.w_star.shape[1]
        if self.y_trn.shape != (n_trn, n_out) or self.y_val.shape != (n_val, n_out):
            raise ValueError("label shapes do not match data shapes")
        if mask.shape != (n_trn,):
            raise ValueError("corruption_mask must have one entry per training row")

    @property
    def dims(self) -> dict:
        return {
            "N": self.x_trn.shape[0],
            "N_prime": self.x_val.shape[0],
            "m": self.x_trn.shape[1],
            "n": self.y_trn.shape[1],
        }


def gen_repr_dataset(
    seed: int,
    n_trn: int = 30,
    n_val: int = 20,
    m: int = 40,
    n_out: int = 10,
    h: int = 300,
) -> ReprDataset:
    """Generate the representation-learning dataset for one seed.

    Draw order (each matrix filled row-major): X_trn ~ N(5, 0.01),
    X_val ~ N(-3, 0.01), W1* ~ N(0, 0.01), W2* ~ N(2, 0.01),
    W2~* ~ N(W2*, 0.001), Y_trn ~ N(X_trn W1* W2*, 0.01),
    Y_val ~ N(X_val W1* W2~*, 0.01).
    """
    if min(n_trn, n_val, m, n_out, h) < 1:
        raise ValueError("all dimensions must be >= 1")
    if m < max(n_trn, n_val) or h < max(m, n_out):
        raise ValueError(
            "overparameterization requires m >= max(N, N') and h >= max(m, n)"
        )
    rng = PolarGaussianRng(seed)
    x_trn = rng.normal_matrix(n_trn, m, 5.0, 0.01)
    x_val = rng.normal_matrix(n_val, m, -3.0, 0.01)
    w1_star = rng.normal_matrix(m, h, 0.0, 0.01)
    w2_star = rng.normal_matrix(h, n_out, 2.0, 0.01)
    w2_tilde_star = rng.normal_matrix(h, n_out, w2_star, 0.001)
    y_trn = rng.normal_matrix(n_trn, n_out, x_trn @ w1_star @ w2_star, 0.01)
    y_val = rng.normal_matrix(n_val, n_out, x_val @ w1_star @ w2_tilde_star, 0.01)
    return ReprDataset(
        x_trn=x_trn, y_trn=y_trn, x_val=x_val, y_val=y_val,
        w1_star=w1_star, w2_star=w2_star, w2_tilde_star=w2_tilde_star,
        seed=int(seed),
    )


def gen_hyperclean_dataset(
    seed: int,
    n_trn: int = 100,
    n_val: int = 10,
    m: int = 200,
    n_out: int = 10,
    corruption_rate: float = 0.2,
) -> HypercleanDataset:
    """Generate the hyper-cleaning dataset for one seed.

    Draw order: X_trn ~ N(5, 0.01), X_val ~ N(-3, 0.01), W* ~ N(1, 0.01),
    Y_val ~ N(X_val W*, 0.001), corruption mask ~ Bernoulli(rate) per row
    (one uniform per row), base label noise N x n, corruption noise N x n
    (drawn for every row regardless of the mask, then zeroed off-mask):
    Y_trn = X_trn W* + noise + mask * (10 + sqrt(10) * corruption_noise).
    """
    if min(n_trn, n_val, m, n_out) < 1:
        raise ValueError("all dimensions must be >= 1")
    if not 0.0 <= corruption_rate <= 1.0:
        raise ValueError(f"corruption_rate must be in [0, 1], got {corruption_rate}")
    rng = PolarGaussianRng(seed)
    x_trn = rng.normal_matrix(n_trn, m, 5.0, 0.01)
    x_val = rng.normal_matrix(n_val, m, -3.0, 0.01)
    w_star = rng.normal_matrix(m, n_out, 1.0, 0.01)
    y_val = rng.normal_matrix(n_val, n_out, x_val @ w_star, 0.001)
    mask = rng.bernoulli_vector(n_trn, corruption_rate)
    y_trn = rng.normal_matrix(n_trn, n_out, x_trn @ w_star, 0.01)
    corruption = rng.normal_matrix(n_trn, n_out, 10.0, 10.0)
    y_trn = y_trn + mask[:, None] * corruption
    return HypercleanDataset(
        x_trn=x_trn, y_trn=y_trn, x_val=x_val, y_val=y_val,
        w_star=w_star, corruption_mask=mask, seed=int(seed),
    )


# ---------------------------------------------------------------------------
# text container


def _format_matrix_block(name: str, m: np.ndarray) -> list[str]:
    lines = [f"[matrix {name} {m.shape[0]} {m.shape[1]}]"]
    for row in m:
        lines.append(",".join(repr(float(v)) for v in row))
    return lines


_REPR_HEADER_DISTS = [
    "dist_x_trn = mean=5,var=0.01",
    "dist_x_val = mean=-3,var=0.01",
    "dist_w1_star = mean=0,var=0.01",
    "dist_w2_star = mean=2,var=0.01",
    "dist_w2_tilde_star = mean=w2_star,var=0.001",
    "dist_y_trn = mean=x_trn@w1_star@w2_star,var=0.01",
    "dist_y_val = mean=x_val@w1_star@w2_tilde_star,var=0.01",
    "note = y_val uses x_val",
]

_HYPERCLEAN_HEADER_DISTS = [
    "dist_x_trn = mean=5,var=0.01",
    "dist_x_val = mean=-3,var=0.01",
    "dist_w_star = mean=1,var=0.01",
    "dist_y_val = mean=x_val@w_star,var=0.001",
    "dist_y_trn = mean=x_trn@w_star,var=0.01",
    "dist_corruption = mean=10,var=10",
]


def save_dataset(ds, path) -> None:
    """Write a dataset to its self-describing text container."""
    lines = [FORMAT_LINE]
    if isinstance(ds, ReprDataset):
        d = ds.dims
        lines += [
            "kind = repr",
            f"seed = {ds.seed}",
            f"rng = {RNG_ID}",
            "gaussian_param = variance",
            f"N = {d['N']}",
            f"N_prime = {d['N_prime']}",
            f"m = {d['m']}",
            f"n = {d['n']}",
            f"h = {d['h']}",
        ]
        lines += _REPR_HEADER_DISTS
        for name in (
            "x_trn", "y_trn", "x_val", "y_val",
            "w1_star", "w2_star", "w2_tilde_star",
        ):
            lines += _format_matrix_block(name, getattr(ds, name))
    elif isinstance(ds, HypercleanDataset):
        d = ds.dims
        lines += [
            "kind = hyperclean",
            f"seed = {ds.seed}",
            f"rng = {RNG_ID}",
            "gaussian_param = variance",
            f"N = {d['N']}",
            f"N_prime = {d['N_prime']}",
            f"m = {d['m']}",
            f"n = {d['n']}",
        ]
        lines += _HYPERCLEAN_HEADER_DISTS
        for name in ("x_trn", "y_trn", "x_val", "y_val", "w_star"):
            lines += _format_matrix_block(name, getattr(ds, name))
        lines.append(f"[mask corruption_mask {ds.corruption_mask.size}]")
        lines.append(",".join("1" if b else "0" for b in ds.corruption_mask))
    else:
        raise TypeError(f"unknown dataset type {type(ds).__name__}")
    lines.append("[end]")
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_container(text: str) -> tuple[dict, dict, dict]:
    """Split a container into header keys, matrices and masks."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT_LINE:
        raise DatasetFormatError(
            f"bad or missing format line; expected {FORMAT_LINE!r}"
        )
    header: dict[str, str] = {}
    matrices: dict[str, np.ndarray] = {}
    masks: dict[str, np.ndarray] = {}
    i = 1
    ended = False
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if line == "[end]":
            ended = True
            i += 1
            continue
        if line.startswith("[matrix "):
            parts = line[1:-1].split()
            if len(parts) != 4:
                raise DatasetFormatError(f"malformed matrix header: {line}")
            _, name, rows_s, cols_s = parts
            rows, cols = int(rows_s), int(cols_s)
            block = lines[i + 1 : i + 1 + rows]
            if len(block) < rows:
                raise DatasetFormatError(
                    f"truncated file: matrix {name!r} declares {rows} rows, "
                    f"found {len(block)}"
                )
            try:
                data = [[float(v) for v in row.split(",")] for row in block]
            except ValueError as exc:
                raise DatasetFormatError(
                    f"unparsable entry in matrix {name!r}: {exc}"
                ) from exc
            arr = np.array(data, dtype=np.float64)
            if arr.shape != (rows, cols):
                raise DatasetFormatError(
                    f"matrix {name!r} declares shape ({rows}, {cols}), "
                    f"found {arr.shape}"
                )
            matrices[name] = arr
            i += 1 + rows
            continue
        if line.startswith("[mask "):
            parts = line[1:-1].split()
            if len(parts) != 3:
                raise DatasetFormatError(f"malformed mask header: {line}")
            _, name, count_s = parts
            count = int(count_s)
            if i + 1 >= len(lines):
                raise DatasetFormatError(f"truncated file: mask {name!r} has no data")
            vals = lines[i + 1].strip().split(",")
            if len(vals) != count:
                raise DatasetFormatError(
                    f"mask {name!r} declares {count} entries, found {len(vals)}"
                )
            masks[name] = np.array([v == "1" for v in vals], dtype=bool)
            i += 2
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            header[key.strip()] = value.strip()
            i += 1
            continue
        raise DatasetFormatError(f"unrecognized line: {line}")
    if not ended:
        raise DatasetFormatError("truncated file: missing [end] sentinel")
    return header, matrices, masks


def _require(mapping: dict, field: str, where: str):
    if field not in mapping:
        raise DatasetFormatError(f"missing {where} {field!r}")
    return mapping[field]


def load_dataset(path):
    """Load a dataset container; returns ReprDataset or HypercleanDataset."""
    text = Path(path).read_text()
    header, matrices, masks = _parse_container(text)
    kind = _require(header, "kind", "header field")
    seed = int(_require(header, "seed", "header field"))
    rng_id = _require(header, "rng", "header field")
    if rng_id != RNG_ID:
        raise DatasetFormatError(
            f"unsupported rng id {rng_id!r}; this build implements {RNG_ID!r}"
        )
    if kind == "repr":
        fields = {
            name: _require(matrices, name, "matrix")
            for name in (
                "x_trn", "y_trn", "x_val", "y_val",
                "w1_star", "w2_star", "w2_tilde_star",
            )
        }
        return ReprDataset(seed=seed, **fields)
    if kind == "hyperclean":
        fields = {
            name: _require(matrices, name, "matrix")
            for name in ("x_trn", "y_trn", "x_val", "y_val", "w_star")
        }
        mask = _require(masks, "corruption_mask", "mask")
        return HypercleanDataset(seed=seed, corruption_mask=mask, **fields)
    raise DatasetFormatError(f"unknown dataset kind {kind!r}")
