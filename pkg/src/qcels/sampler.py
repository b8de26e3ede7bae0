"""Shot-level simulation of the Hadamard-test circuit.

A run of the circuit at evolution time t measures +-1 with mean equal to
the real (W = I) or imaginary (W = S^dagger) part of
<psi| exp(-i t H) |psi>.  Datasets average N_s such shot pairs at each of
the times t_n = n tau.  The filtered variant additionally draws a random
integer time shift per shot and reweights outcomes by the filter phase, so
the averaged samples converge to the filter-damped expectation.

All randomness is counter-indexed by (n, k, slot); see `qcels.rng`.  Slot 0
is the shift draw (unused by plain datasets), slots 1 and 2 are the Re and
Im shots.  With the constant-one filter the filtered generator therefore
reproduces the plain generator bit for bit under a shared seed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import backend
from .filters import FourierFilter, eval_filter, filter_digest
from .spectrum import SpectralModel


@dataclass(frozen=True)
class ShotRecord:
    """One Hadamard-test shot pair: the +-1 outcomes of both bases."""

    x: int
    y: int

    def __post_init__(self):
        if self.x not in (-1, 1) or self.y not in (-1, 1):
            raise ValueError("shot outcomes must be +-1")


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Averaged Hadamard-test samples (t_n, Z_n) on a uniform time grid."""

    tau: float
    times: np.ndarray
    values: np.ndarray
    shots_per_point: int
    n_points: int
    filtered: bool = False
    seed: Optional[int] = None
    total_evolution_time: float = 0.0
    filter_digest: Optional[str] = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        z = np.asarray(self.values, dtype=np.complex128)
        if t.shape != (self.n_points,) or z.shape != (self.n_points,):
            raise ValueError("times and values must both have length n_points")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", z)


def expectation(model: SpectralModel, t):
    """<psi| exp(-i t H) |psi> = sum_m p_m exp(-i t lambda_m).

    t may be a scalar or an array; the result broadcasts accordingly.
    """
    t = np.asarray(t, dtype=np.float64)
    return np.exp(-1j * t[..., None] * model.eigenvalues) @ model.weights


def hadamard_shot(model: SpectralModel, t: float, basis: str, gen: np.random.Generator) -> int:
    """One +-1 measurement of the Re or Im Hadamard-test circuit."""
    z = expectation(model, float(t))
    if basis == "re":
        c = z.real
    elif basis == "im":
        c = z.imag
    else:
        raise ValueError(f"basis must be 're' or 'im', got {basis!r}")
    return 1 if gen.random() < (1.0 + c) / 2.0 else -1


def hadamard_shot_pair(model: SpectralModel, t: float,
                       gen: np.random.Generator) -> ShotRecord:
    """Sample both circuit bases at the same evolution time."""
    return ShotRecord(x=hadamard_shot(model, t, "re", gen),
                      y=hadamard_shot(model, t, "im", gen))


def _bernoulli_probs(model: SpectralModel, times):
    z = expectation(model, times)
    return (1.0 + z.real) / 2.0, (1.0 + z.imag) / 2.0


def generate_dataset(model: SpectralModel, tau: float, n_points: int,
                     n_shots: int, seed: int) -> TimeSeriesDataset:
    """Shot-noisy dataset Z_n = (1/N_s) sum_k (X_{k,n} + i Y_{k,n})."""
    if n_points < 1 or n_shots < 1 or tau <= 0:
        raise ValueError("need n_points >= 1, n_shots >= 1, tau > 0")
    times = tau * np.arange(n_points)
    p_re, p_im = _bernoulli_probs(model, times)
    sx, sy = backend.sample_plain(seed, n_points, n_shots, p_re, p_im)
    values = (sx + 1j * sy) / n_shots
    total = float(np.sum(n_shots * np.abs(times)))
    return TimeSeriesDataset(tau=tau, times=times, values=values,
                             shots_per_point=n_shots, n_points=n_points,
                             filtered=False, seed=int(seed),
                             total_evolution_time=total)


def generate_filtered_dataset(model: SpectralModel, filt: FourierFilter,
                              tau: float, n_points: int, n_shots: int,
                              seed: int, shift_sign: int = -1) -> TimeSeriesDataset:
    """Filtered dataset via randomly time-shifted Hadamard-test shots.

    Each shot k at nominal time n tau draws one integer shift l in [-d, d]
    with probability beta_l = |F_l| / sum|F_l|, runs both circuit bases at
    time n tau + shift_sign * l, and scales the outcome by
    exp(i phi_l) * sum|F_l|.  With shift_sign = -1 (the default) the
    averages converge to sum_m p_m F(lambda_m) exp(-i n tau lambda_m); the
    opposite sign is kept for comparison and flips the filter argument.
    """
    if n_points < 1 or n_shots < 1 or tau <= 0:
        raise ValueError("need n_points >= 1, n_shots >= 1, tau > 0")
    if shift_sign not in (-1, 1):
        raise ValueError("shift_sign must be -1 or +1")
    beta = filt.beta
    cum = np.cumsum(beta)
    cum[-1] = 1.0
    shifts = np.arange(-filt.d, filt.d + 1, dtype=np.float64)
    t_table = tau * np.arange(n_points)[:, None] + shift_sign * shifts[None, :]
    p_re, p_im = _bernoulli_probs(model, t_table)
    cnt, sx, sy = backend.sample_filtered(seed, n_points, n_shots, cum, p_re, p_im)
    phase_factors = np.exp(1j * filt.phases)
    zc = (sx + 1j * sy) @ phase_factors
    values = (zc * filt.one_norm) / n_shots
    total = float(np.sum(cnt * np.abs(t_table)))
    times = tau * np.arange(n_points)
    return TimeSeriesDataset(tau=tau, times=times, values=values,
                             shots_per_point=n_shots, n_points=n_points,
                             filtered=True, seed=int(seed),
                             total_evolution_time=total,
                             filter_digest=filter_digest(filt))


def exact_dataset(model: SpectralModel, tau: float, n_points: int,
                  filt: Optional[FourierFilter] = None) -> TimeSeriesDataset:
    """Infinite-shot limit: Z_n set to the exact expectation values."""
    times = tau * np.arange(n_points)
    if filt is None:
        values = expectation(model, times)
        digest = None
    else:
        damped = model.weights * eval_filter(filt, model.eigenvalues)
        values = np.exp(-1j * times[:, None] * model.eigenvalues) @ damped
        digest = filter_digest(filt)
    return TimeSeriesDataset(tau=tau, times=times, values=values,
                             shots_per_point=0, n_points=n_points,
                             filtered=filt is not None, seed=None,
                             total_evolution_time=0.0, filter_digest=digest)


def noise_bound(n_points: int, n_shots: int, eta: float) -> float:
    """High-probability bound on (1/N) sum_n |E_n|.

    Hoeffding over the N independent per-point errors plus the shot-noise
    mean gives 2/sqrt(N_s) + sqrt(2 ln(1/eta) / N), valid with probability
    at least 1 - eta.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must be in (0, 1), got {eta}")
    return 2.0 / math.sqrt(n_shots) + math.sqrt(2.0 * math.log(1.0 / eta) / n_points)


def noise_residual(ds: TimeSeriesDataset, model: SpectralModel) -> np.ndarray:
    """Per-point estimation errors E_n = Z_n - <psi|exp(-i t_n H)|psi>."""
    if ds.filtered:
        raise ValueError("noise_residual is defined for unfiltered datasets")
    return ds.values - expectation(model, ds.times)


# ---------------------------------------------------------------------------
# persistence: CSV rows plus a JSON sidecar


def _sidecar_path(path) -> str:
    return str(path) + ".meta.json"


def save_dataset(ds: TimeSeriesDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "t", "re_z", "im_z"])
        for n in range(ds.n_points):
            writer.writerow([n, repr(float(ds.times[n])),
                             repr(float(ds.values[n].real)),
                             repr(float(ds.values[n].imag))])
    meta = {
        "tau": ds.tau,
        "N": ds.n_points,
        "N_s": ds.shots_per_point,
        "seed": ds.seed,
        "filtered": ds.filtered,
        "filter_digest": ds.filter_digest,
        "total_evolution_time": ds.total_evolution_time,
    }
    with open(_sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path) -> TimeSeriesDataset:
    with open(_sidecar_path(path), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    times = []
    values = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["n", "t", "re_z", "im_z"]:
            raise ValueError(f"{path}: expected header n,t,re_z,im_z, got {header}")
        for row in reader:
            times.append(float(row[1]))
            values.append(float(row[2]) + 1j * float(row[3]))
    return TimeSeriesDataset(tau=float(meta["tau"]), times=np.array(times),
                             values=np.array(values), shots_per_point=int(meta["N_s"]),
                             n_points=int(meta["N"]), filtered=bool(meta["filtered"]),
                             seed=meta["seed"],
                             total_evolution_time=float(meta.get("total_evolution_time", 0.0)),
                             filter_digest=meta.get("filter_digest"))
