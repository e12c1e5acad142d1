"""Desk-scale synthetic tasks: conditional 2-D clusters, polynomial
regression targets, and paired coarse/fine 1-D signals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oracle import OracleParams, eval_explicit, expansion_term_keys


@dataclass
class CondPointCloud:
    """Gaussian blobs on a circle; class identity is the conditioning input."""

    means: np.ndarray  # (n_classes, 2)
    covs: np.ndarray  # (n_classes, 2, 2)

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.covs = np.asarray(self.covs, dtype=np.float64)
        k = self.means.shape[0]
        if self.means.ndim != 2 or self.means.shape[1] != 2:
            raise ValueError(f"means must be (n_classes, 2), got {self.means.shape}")
        if self.covs.shape != (k, 2, 2):
            raise ValueError(f"covs must be ({k}, 2, 2), got {self.covs.shape}")
        spreads = [float(np.sqrt(np.linalg.eigvalsh(c)[-1])) for c in self.covs]
        gaps = [
            float(np.linalg.norm(self.means[i] - self.means[j]))
            for i in range(k)
            for j in range(i + 1, k)
        ]
        if gaps and min(gaps) < 4.0 * max(spreads):
            raise ValueError(
                f"clusters overlap: min mean gap {min(gaps):.4f} is below "
                f"4 x max std {4.0 * max(spreads):.4f}"
            )
        self._chols = np.array([np.linalg.cholesky(c) for c in self.covs])

    @property
    def n_classes(self) -> int:
        return self.means.shape[0]

    def sample(self, rng: np.random.Generator, cls: int, n: int) -> np.ndarray:
        """Column batch of `n` points from class `cls`."""
        if not 0 <= cls < self.n_classes:
            raise ValueError(f"class {cls} outside [0, {self.n_classes})")
        raw = rng.standard_normal((2, n))
        return self.means[cls][:, None] + self._chols[cls] @ raw


def make_cond_point_cloud(
    n_classes: int = 4, radius: float = 0.6, std: float = 0.05
) -> CondPointCloud:
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes + np.pi / 4.0
    means = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    covs = np.tile((std**2) * np.eye(2), (n_classes, 1, 1))
    return CondPointCloud(means=means, covs=covs)


def nearest_center(task: CondPointCloud, samples) -> np.ndarray:
    """Index of the closest cluster mean per column sample."""
    samples = np.asarray(samples, dtype=np.float64)
    d2 = ((samples[None, :, :] - task.means[:, :, None]) ** 2).sum(axis=1)
    return np.argmin(d2, axis=0)


def one_hot(n_classes: int, cls: int, n: int) -> np.ndarray:
    out = np.zeros((n_classes, n))
    out[cls] = 1.0
    return out


@dataclass
class PolyRegression:
    """Random dense polynomial target with unit-scale outputs."""

    target: OracleParams
    inputs: list  # one (dim, n_samples) batch per variable
    outputs: np.ndarray  # (out_dim, n_samples)


def make_poly_regression(
    rng: np.random.Generator,
    degree: int,
    in_dim: int,
    out_dim: int,
    n_samples: int,
) -> PolyRegression:
    tensors = {}
    for key in expansion_term_keys(degree, 2):
        n, rho = key
        shape = (out_dim,) + (rho - 1) * (in_dim,) + (n + 1 - rho) * (in_dim,)
        tensors[key] = rng.uniform(-1.0, 1.0, size=shape)
    params = OracleParams(
        order=degree,
        input_dims=(in_dim, in_dim),
        output_dim=out_dim,
        tensors=tensors,
        bias=rng.uniform(-1.0, 1.0, size=out_dim),
    )
    inputs = [rng.uniform(-1.0, 1.0, (in_dim, n_samples)) for _ in range(2)]

    def evaluate(p):
        cols = [
            eval_explicit(p, [inputs[0][:, i], inputs[1][:, i]])
            for i in range(n_samples)
        ]
        return np.stack(cols, axis=1)

    raw = evaluate(params)
    scale = float(np.std(raw))
    scale = scale if scale > 1e-8 else 1.0
    scaled = OracleParams(
        order=degree,
        input_dims=(in_dim, in_dim),
        output_dim=out_dim,
        tensors={k: v / scale for k, v in params.tensors.items()},
        bias=params.bias / scale - raw.mean(axis=1) / scale,
    )
    return PolyRegression(target=scaled, inputs=inputs, outputs=evaluate(scaled))


@dataclass
class Downsample1D:
    """Smooth periodic signals paired with their block-averaged versions."""

    signals: np.ndarray  # (length, n_samples)
    coarse: np.ndarray  # (length // factor, n_samples)
    factor: int


def make_downsample1d(
    rng: np.random.Generator, length: int, factor: int, n_samples: int
) -> Downsample1D:
    if length % factor != 0:
        raise ValueError(f"length {length} is not divisible by factor {factor}")
    t = np.arange(length)[:, None] / length
    signals = np.zeros((length, n_samples))
    for h in (1, 2, 3):
        amp = rng.uniform(0.2, 1.0, n_samples) / h
        phase = rng.uniform(0.0, 2.0 * np.pi, n_samples)
        signals += amp * np.sin(2.0 * np.pi * h * t + phase)
    signals *= 0.9 / np.max(np.abs(signals), axis=0, keepdims=True)
    coarse = signals.reshape(length // factor, factor, n_samples).mean(axis=1)
    return Downsample1D(signals=signals, coarse=coarse, factor=factor)
