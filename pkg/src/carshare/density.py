"""Per-location demand distributions.

Fits a Gaussian-kernel density estimate or one of three parametric
families (Gaussian, Laplace, Poisson) to daily demand counts, and provides
density evaluation, log-likelihood scoring, and integer demand sampling.

Parametric fits use the closed-form maximum-likelihood estimators with the
N divisor throughout; the Laplace location is the sample mean, not the
median, matching the estimator the rest of the pipeline is calibrated to.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

KDE = "kde"
GAUSSIAN = "gaussian"
LAPLACE = "laplace"
POISSON = "poisson"
FAMILIES = (KDE, GAUSSIAN, LAPLACE, POISSON)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class DegenerateDataError(ValueError):
    """Raised when a fit cannot produce a usable model (e.g. a bandwidth
    rule on constant data)."""


@dataclass
class DensityModel:
    """A fitted distribution for one location.

    Exactly one parameter group is populated, according to ``kind``:
    kde -> samples + bandwidth; gaussian -> mean + variance;
    laplace -> mean + scale; poisson -> rate.
    """

    kind: str
    samples: np.ndarray = None
    bandwidth: float = None
    mean: float = None
    variance: float = None
    scale: float = None
    rate: float = None


def _as_samples(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("at least one sample is required")
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples must be finite")
    return arr


def silverman_bandwidth(samples) -> float:
    """Rule-of-thumb bandwidth 0.9 * min(std, IQR/1.34) * N^(-1/5).

    Falls back to the standard deviation when the interquartile range is
    zero but the data still varies; raises on constant data.
    """
    arr = _as_samples(samples)
    std = float(np.std(arr))
    q75, q25 = np.percentile(arr, [75, 25])
    iqr = float(q75 - q25)
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    if spread <= 0:
        raise DegenerateDataError(
            "all samples identical; pass an explicit bandwidth")
    return 0.9 * spread * arr.size ** (-0.2)


def fit_kde(samples, bandwidth: float = None) -> DensityModel:
    """Gaussian-kernel density estimate over the raw samples."""
    arr = _as_samples(samples)
    if bandwidth is None:
        bandwidth = silverman_bandwidth(arr)
    elif bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return DensityModel(KDE, samples=arr, bandwidth=float(bandwidth))


def fit_gaussian(samples) -> DensityModel:
    arr = _as_samples(samples)
    mu = float(arr.mean())
    var = float(np.mean((arr - mu) ** 2))
    return DensityModel(GAUSSIAN, mean=mu, variance=var)


def fit_laplace(samples) -> DensityModel:
    arr = _as_samples(samples)
    mu = float(arr.mean())
    b = float(np.mean(np.abs(arr - mu)))
    return DensityModel(LAPLACE, mean=mu, scale=b)


def fit_poisson(samples) -> DensityModel:
    arr = _as_samples(samples)
    if np.any(arr < 0):
        raise ValueError("Poisson samples must be nonnegative")
    return DensityModel(POISSON, rate=float(arr.mean()))


_FITTERS = {
    KDE: fit_kde,
    GAUSSIAN: fit_gaussian,
    LAPLACE: fit_laplace,
    POISSON: fit_poisson,
}


def fit_family(family: str, samples, bandwidth: float = None) -> DensityModel:
    if family not in _FITTERS:
        raise ValueError(f"unknown family {family!r}")
    if family == KDE:
        return fit_kde(samples, bandwidth)
    return _FITTERS[family](samples)


def pdf_many(model: DensityModel, xs) -> np.ndarray:
    """Density (or probability mass, for Poisson) at each point."""
    xs = np.asarray(xs, dtype=float)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    if model.kind == KDE:
        h = model.bandwidth
        z = (xs[:, None] - model.samples[None, :]) / h
        out = np.exp(-0.5 * z ** 2).sum(axis=1) / (model.samples.size * h * _SQRT_2PI)
    elif model.kind == GAUSSIAN:
        if model.variance == 0:
            out = np.where(xs == model.mean, np.inf, 0.0)
        else:
            sd = math.sqrt(model.variance)
            out = np.exp(-0.5 * ((xs - model.mean) / sd) ** 2) / (sd * _SQRT_2PI)
    elif model.kind == LAPLACE:
        if model.scale == 0:
            out = np.where(xs == model.mean, np.inf, 0.0)
        else:
            out = np.exp(-np.abs(xs - model.mean) / model.scale) / (2.0 * model.scale)
    elif model.kind == POISSON:
        out = np.zeros_like(xs)
        ints = np.isclose(xs, np.round(xs), atol=1e-9) & (xs >= -1e-9)
        k = np.round(xs[ints])
        lam = model.rate
        if lam == 0:
            out[ints] = np.where(k == 0, 1.0, 0.0)
        else:
            logpmf = k * math.log(lam) - lam - np.array([math.lgamma(v + 1.0) for v in k])
            out[ints] = np.exp(logpmf)
    else:
        raise ValueError(f"unknown model kind {model.kind!r}")
    return float(out[0]) if scalar else out


def pdf(model: DensityModel, x: float) -> float:
    return pdf_many(model, x)


def log_likelihood(model: DensityModel, holdout) -> float:
    """Sum of log densities over the holdout; -inf when any point has
    zero density under the model."""
    xs = np.asarray(holdout, dtype=float).ravel()
    if xs.size == 0:
        raise ValueError("holdout must be nonempty")
    vals = pdf_many(model, xs)
    if np.any(vals <= 0.0):
        return -math.inf
    return float(np.sum(np.log(vals)))


def draw(model: DensityModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Raw continuous/integer draws before demand conversion."""
    if model.kind == KDE:
        idx = rng.integers(0, model.samples.size, size=n)
        return model.samples[idx] + rng.normal(0.0, model.bandwidth, size=n)
    if model.kind == GAUSSIAN:
        return rng.normal(model.mean, math.sqrt(model.variance), size=n)
    if model.kind == LAPLACE:
        if model.scale == 0:
            return np.full(n, model.mean)
        return rng.laplace(model.mean, model.scale, size=n)
    if model.kind == POISSON:
        return rng.poisson(model.rate, size=n).astype(float)
    raise ValueError(f"unknown model kind {model.kind!r}")


def to_demand(values: np.ndarray) -> np.ndarray:
    """Continuous draw -> integer demand: truncate below at zero, then
    round half-up."""
    return np.floor(np.maximum(values, 0.0) + 0.5).astype(np.int64)


def sample(model: DensityModel, n: int, rng_seed: int) -> list:
    """n integer demand draws, deterministic for a given seed."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(rng_seed)
    return to_demand(draw(model, n, rng)).tolist()


@dataclass
class DemandDistributionSet:
    """One fitted model per location, aligned with location_ids."""

    location_ids: list
    models: list

    def __post_init__(self):
        self.location_ids = list(self.location_ids)
        self.models = list(self.models)
        if len(self.models) != len(self.location_ids):
            raise ValueError("one model per location required")


def fit_distribution_set(panel, family: str, bandwidth: float = None) -> DemandDistributionSet:
    """Fit one model per panel column on that column's daily counts."""
    models = [fit_family(family, panel.counts[:, j].astype(float), bandwidth)
              for j in range(len(panel.location_ids))]
    return DemandDistributionSet(list(panel.location_ids), models)


def _model_to_dict(model: DensityModel) -> dict:
    if model.kind == KDE:
        return {"kind": KDE, "samples": [float(v) for v in model.samples],
                "bandwidth": float(model.bandwidth)}
    if model.kind == GAUSSIAN:
        return {"kind": GAUSSIAN, "mean": model.mean, "variance": model.variance}
    if model.kind == LAPLACE:
        return {"kind": LAPLACE, "mean": model.mean, "scale": model.scale}
    if model.kind == POISSON:
        return {"kind": POISSON, "rate": model.rate}
    raise ValueError(f"unknown model kind {model.kind!r}")


def _model_from_dict(data: dict) -> DensityModel:
    kind = data["kind"]
    if kind == KDE:
        return DensityModel(KDE, samples=np.asarray(data["samples"], dtype=float),
                            bandwidth=float(data["bandwidth"]))
    if kind == GAUSSIAN:
        return DensityModel(GAUSSIAN, mean=data["mean"], variance=data["variance"])
    if kind == LAPLACE:
        return DensityModel(LAPLACE, mean=data["mean"], scale=data["scale"])
    if kind == POISSON:
        return DensityModel(POISSON, rate=data["rate"])
    raise ValueError(f"unknown model kind {kind!r}")


def save_distribution_set(dist: DemandDistributionSet, path):
    payload = {"location_ids": [int(i) for i in dist.location_ids],
               "models": [_model_to_dict(m) for m in dist.models]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_distribution_set(path) -> DemandDistributionSet:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return DemandDistributionSet(payload["location_ids"],
                                 [_model_from_dict(m) for m in payload["models"]])
