"""Ideal textbook phase-estimation baseline.

K ancilla qubits read out one of 2^K Fourier grid outcomes; an eigenphase
phi produces outcome j with the squared normalized Dirichlet weight
|sin(2^{K-1}(phi - phi_j)) / (2^K sin((phi - phi_j)/2))|^2.  Imperfect
initial states mix these distributions over eigencomponents exactly.  Each
run samples a single outcome (no sharpening across runs) and costs
(2^K - 1) tau of coherent evolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .estimator import wrapped_distance
from .spectrum import SpectralModel


@dataclass(frozen=True)
class QpeConfig:
    bits: int
    tau: float = 1.0
    runs: int = 10

    def __post_init__(self):
        if not 1 <= self.bits <= 30:
            raise ValueError(f"bits must be in [1, 30], got {self.bits}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")

    @property
    def t_max(self) -> float:
        return (2**self.bits - 1) * self.tau


@dataclass(frozen=True)
class QpeResult:
    estimates: np.ndarray
    errors: np.ndarray
    mean_abs_error: float
    t_max: float
    t_total: float
    seed: int
    bits: int
    tau: float

    def to_dict(self) -> dict:
        return {
            "method": "qpe",
            "theta_star": float(self.estimates[0]),
            "estimates": [float(x) for x in self.estimates],
            "errors": [float(x) for x in self.errors],
            "mean_abs_error": self.mean_abs_error,
            "t_max": self.t_max,
            "t_total": self.t_total,
            "seed": self.seed,
            "bits": self.bits,
            "tau": self.tau,
        }


def qpe_distribution(model: SpectralModel, cfg: QpeConfig) -> np.ndarray:
    """Outcome probabilities over the 2^bits Fourier grid."""
    m_out = 2**cfg.bits
    phi_grid = 2.0 * np.pi * np.arange(m_out) / m_out
    probs = np.zeros(m_out)
    for lam, weight in zip(model.eigenvalues, model.weights):
        delta = lam * cfg.tau - phi_grid
        s = np.sin(delta / 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            kern = np.sin(m_out * delta / 2.0) / (m_out * s)
        kern = np.where(np.abs(s) < 1e-15, 1.0, kern)
        probs += weight * kern * kern
    return probs


def qpe_estimate(model: SpectralModel, cfg: QpeConfig, seed: int = 0) -> QpeResult:
    """Sample one outcome per run and report wrapped errors against lambda_0.

    Outcome j maps to the phase 2 pi j / (2^bits tau) wrapped into
    [-pi/tau, pi/tau); errors are wrapped distances to the ground phase.
    """
    probs = qpe_distribution(model, cfg)
    cum = np.cumsum(probs)
    cum[-1] = max(cum[-1], 1.0)
    stream = rng.derive(seed, "qpe")
    u = rng.uniforms(stream, np.arange(cfg.runs, dtype=np.uint64), 0, 0)
    outcomes = np.searchsorted(cum, u, side="right")
    period = 2.0 * np.pi / cfg.tau
    raw = 2.0 * np.pi * outcomes / (2**cfg.bits) / cfg.tau
    estimates = (raw + period / 2.0) % period - period / 2.0
    errors = np.array([wrapped_distance(est, model.lambda0, period)
                       for est in estimates])
    return QpeResult(estimates=estimates, errors=errors,
                     mean_abs_error=float(errors.mean()),
                     t_max=cfg.t_max, t_total=cfg.runs * cfg.t_max,
                     seed=int(seed), bits=cfg.bits, tau=cfg.tau)
