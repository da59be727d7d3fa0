"""Feature maps from input space to the space the weight matrix acts on.

Two variants: the identity (linear predictors on the raw features) and
random Fourier features approximating the Gaussian kernel
k(x, x') = exp(-||x - x'||^2 / (2 sigma^2)).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FeatureMap:
    """Identity map when Omega is None, otherwise random Fourier features.

    For the RFF variant, phi(x) = sqrt(2/D) * cos(Omega^T x + b) with the
    columns of Omega drawn i.i.d. from N(0, sigma^-2) and b uniform on
    [0, 2*pi]. Inner products phi(x)^T phi(x') are unbiased estimates of the
    Gaussian kernel with bandwidth sigma.
    """

    d: int
    Omega: np.ndarray | None = None
    b: np.ndarray | None = None
    sigma: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if (self.Omega is None) != (self.b is None):
            raise ValueError("Omega and b must be given together")
        if self.Omega is not None:
            Omega = np.asarray(self.Omega, dtype=float)
            b = np.asarray(self.b, dtype=float)
            if Omega.ndim != 2 or Omega.shape[0] != self.d:
                raise ValueError(f"Omega must be {self.d} x D")
            if b.shape != (Omega.shape[1],):
                raise ValueError("b length must match the column count of Omega")
            if self.sigma is None or self.sigma <= 0:
                raise ValueError("RFF maps need sigma > 0")
            object.__setattr__(self, "Omega", Omega)
            object.__setattr__(self, "b", b)

    @property
    def is_identity(self) -> bool:
        return self.Omega is None

    @property
    def output_dim(self) -> int:
        return self.d if self.Omega is None else self.Omega.shape[1]

    def to_json(self) -> str:
        if self.is_identity:
            return json.dumps({"kind": "identity", "d": self.d})
        return json.dumps(
            {
                "kind": "rff",
                "d": self.d,
                "sigma": self.sigma,
                "seed": self.seed,
                "Omega": self.Omega.tolist(),
                "b": self.b.tolist(),
            }
        )

    @classmethod
    def from_json(cls, blob: str) -> "FeatureMap":
        obj = json.loads(blob)
        if obj["kind"] == "identity":
            return identity_map(obj["d"])
        return cls(
            d=obj["d"],
            Omega=np.asarray(obj["Omega"], dtype=float),
            b=np.asarray(obj["b"], dtype=float),
            sigma=obj["sigma"],
            seed=obj["seed"],
        )


def identity_map(d: int) -> FeatureMap:
    return FeatureMap(d=d)


def build_rff(d: int, D: int, sigma: float, seed: int) -> FeatureMap:
    """Draw a random Fourier feature map for the Gaussian kernel.

    Parameters
    ----------
    d : input dimension
    D : number of random features (output dimension)
    sigma : kernel bandwidth, > 0
    seed : RNG seed; the same seed reproduces the map exactly
    """
    if D < 1:
        raise ValueError(f"D must be >= 1, got {D}")
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    rng = np.random.default_rng(seed)
    Omega = rng.normal(0.0, 1.0 / sigma, size=(d, D))
    b = rng.uniform(0.0, 2.0 * np.pi, size=D)
    return FeatureMap(d=d, Omega=Omega, b=b, sigma=float(sigma), seed=seed)


def apply_map(fmap: FeatureMap, X: np.ndarray) -> np.ndarray:
    """Map rows of X into feature space; shape (n, d) -> (n, output_dim)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != fmap.d:
        raise ValueError(f"expected {fmap.d} columns, got {X.shape[1]}")
    if fmap.is_identity:
        return X.copy()
    D = fmap.output_dim
    return np.sqrt(2.0 / D) * np.cos(X @ fmap.Omega + fmap.b)


def gram(fmap: FeatureMap, X: np.ndarray) -> np.ndarray:
    """Normalized Gram matrix (1/n) Phi Phi^T; symmetric PSD by construction."""
    Phi = apply_map(fmap, X)
    n = Phi.shape[0]
    if n < 1:
        raise ValueError("gram needs at least one sample")
    G = Phi @ Phi.T / n
    return (G + G.T) / 2.0


def gaussian_kernel(x: np.ndarray, x2: np.ndarray, sigma: float) -> float:
    """Closed-form Gaussian kernel exp(-||x - x'||^2 / (2 sigma^2))."""
    diff = np.asarray(x, dtype=float) - np.asarray(x2, dtype=float)
    return float(np.exp(-(diff @ diff) / (2.0 * sigma**2)))
