"""Hamiltonian builders, exact diagonalization, and spectral models.

Every estimator downstream only sees a `SpectralModel`: the eigenvalues of
the (normalized) Hamiltonian together with the squared overlaps of the
prepared initial state.  That pair is sufficient to simulate any
Hadamard-test expectation value exactly, so no time evolution of state
vectors is ever needed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

HERMITICITY_ATOL = 1e-12
WEIGHT_SUM_ATOL = 1e-10
DEGENERACY_ATOL = 1e-10

TFIM_MAX_SITES = 12
HUBBARD_MAX_FULL_DIM = 4096


class ModelFormatError(ValueError):
    """Raised when a model file fails schema or invariant checks."""


@dataclass(frozen=True)
class HamiltonianMatrix:
    """Dense Hermitian matrix with a descriptive label."""

    dim: int
    entries: np.ndarray
    label: str = ""

    def __post_init__(self):
        h = np.asarray(self.entries, dtype=np.complex128)
        if h.shape != (self.dim, self.dim) or self.dim < 1:
            raise ValueError(f"entries must be {self.dim}x{self.dim}")
        err = np.abs(h - h.conj().T).max()
        if err > HERMITICITY_ATOL:
            raise ValueError(f"matrix is not Hermitian (max deviation {err:.3e})")
        object.__setattr__(self, "entries", h)

    def spectral_norm(self) -> float:
        w = np.linalg.eigvalsh(self.entries)
        return float(np.abs(w).max())


@dataclass(frozen=True)
class SpectralModel:
    """Eigenvalues and initial-state overlap weights, ground level first."""

    eigenvalues: np.ndarray
    weights: np.ndarray
    label: str = ""

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if lam.ndim != 1 or lam.shape != w.shape or lam.size < 1:
            raise ModelFormatError("eigenvalues and weights must be equal-length 1-d lists")
        if np.any(np.diff(lam) <= 0):
            raise ModelFormatError("eigenvalues must be strictly ascending")
        if lam[0] < -np.pi - 1e-12 or lam[-1] >= np.pi:
            raise ModelFormatError("eigenvalues must lie in [-pi, pi)")
        if np.any(w < 0):
            raise ModelFormatError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_ATOL:
            raise ModelFormatError(f"weights must sum to 1 (got {w.sum():.12f})")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    @property
    def lambda0(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def p0(self) -> float:
        return float(self.weights[0])

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "weights": [float(x) for x in self.weights],
            "label": self.label,
        }


@dataclass(frozen=True)
class IntervalPair:
    """Nested closed intervals I within Iprime and their separating distance.

    D is the distance between I and the complement of Iprime inside
    [-pi, pi]; it is recomputed from the endpoints on construction.
    """

    I: tuple
    Iprime: tuple
    D: float = field(init=False)

    def __post_init__(self):
        lo, hi = map(float, self.I)
        plo, phi = map(float, self.Iprime)
        if not (-np.pi - 1e-12 <= plo <= lo <= hi <= phi <= np.pi + 1e-12):
            raise ValueError("need -pi <= Iprime.lo <= I.lo <= I.hi <= Iprime.hi <= pi")
        object.__setattr__(self, "I", (lo, hi))
        object.__setattr__(self, "Iprime", (plo, phi))
        object.__setattr__(self, "D", separation(self.I, self.Iprime))
        if not self.D > 0:
            raise ValueError("I and the complement of Iprime must be separated (D > 0)")


def separation(interval, enlarged) -> float:
    """dist(complement of enlarged within [-pi, pi], interval)."""
    lo, hi = interval
    plo, phi = enlarged
    gaps = []
    if plo > -np.pi:
        gaps.append(lo - plo)
    if phi < np.pi:
        gaps.append(phi - hi)
    return float(min(gaps)) if gaps else float("inf")


# ---------------------------------------------------------------------------
# Hamiltonian builders


def build_tfim(L: int, g: float) -> HamiltonianMatrix:
    """Transverse-field Ising chain with periodic boundaries.

    H = -(sum_i Z_i Z_{i+1} + Z_L Z_1) - g sum_i X_i on L sites.  Dense
    construction, so L is capped at 12.
    """
    if not 2 <= L <= TFIM_MAX_SITES:
        raise ValueError(f"TFIM site count must be in [2, {TFIM_MAX_SITES}], got {L}")
    z = np.array([[1.0, 0.0], [0.0, -1.0]])
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    eye = np.eye(2)

    def site_op(op, i):
        m = np.array([[1.0]])
        for j in range(L):
            m = np.kron(m, op if j == i else eye)
        return m

    zs = [site_op(z, i) for i in range(L)]
    h = np.zeros((2**L, 2**L))
    for i in range(L):
        h -= zs[i] @ zs[(i + 1) % L]
        h -= g * site_op(x, i)
    return HamiltonianMatrix(dim=2**L, entries=h, label=f"tfim-L{L}-g{g:g}")


def _parity_between(mask: int, a: int, b: int) -> int:
    lo, hi = (a, b) if a < b else (b, a)
    between = mask & (((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1))
    return -1 if bin(between).count("1") % 2 else 1


def build_hubbard(L: int, t: float, U: float, sector=None) -> HamiltonianMatrix:
    """One-dimensional Hubbard chain with open boundaries.

    H = -t sum_{j,s} (c+_{j,s} c_{j+1,s} + h.c.)
        + U sum_j (n_{j,up} - 1/2)(n_{j,dn} - 1/2)

    The occupation-number basis uses Jordan-Wigner conventions with all up
    modes ordered before all down modes, so the hopping signs are the
    parity of the same-spin occupations crossed by each move.  `sector`
    optionally restricts to fixed particle numbers (n_up, n_dn); without it
    the full 4^L space must stay within the dense cap.
    """
    if L < 1:
        raise ValueError("Hubbard chain needs at least one site")
    if sector is None:
        if 4**L > HUBBARD_MAX_FULL_DIM:
            raise ValueError(
                f"full Hubbard space 4^{L} exceeds dense cap {HUBBARD_MAX_FULL_DIM}; "
                "pass sector=(n_up, n_dn)")
        ups = list(range(2**L))
        dns = list(range(2**L))
        sector_tag = ""
    else:
        n_up, n_dn = sector
        if not (0 <= n_up <= L and 0 <= n_dn <= L):
            raise ValueError(f"sector occupation numbers must be in [0, {L}]")
        ups = [sum(1 << i for i in c) for c in combinations(range(L), n_up)]
        dns = [sum(1 << i for i in c) for c in combinations(range(L), n_dn)]
        sector_tag = f"-sec{n_up}u{n_dn}d"

    basis = [(u, d) for u in ups for d in dns]
    index = {s: i for i, s in enumerate(basis)}
    dim = len(basis)
    h = np.zeros((dim, dim))
    for col, (u, d) in enumerate(basis):
        diag = 0.0
        for j in range(L):
            diag += U * (((u >> j) & 1) - 0.5) * (((d >> j) & 1) - 0.5)
        h[col, col] += diag
        for j in range(L - 1):
            for spin_up in (True, False):
                mask = u if spin_up else d
                for src, dst in ((j + 1, j), (j, j + 1)):
                    if (mask >> src) & 1 and not (mask >> dst) & 1:
                        new = mask ^ (1 << src) ^ (1 << dst)
                        sign = _parity_between(mask, src, dst)
                        state = (new, d) if spin_up else (u, new)
                        h[index[state], col] += -t * sign
    label = f"hubbard-L{L}-t{t:g}-U{U:g}{sector_tag}"
    return HamiltonianMatrix(dim=dim, entries=h, label=label)


def normalize(H: HamiltonianMatrix) -> HamiltonianMatrix:
    """Rescale so the spectral radius becomes pi/4."""
    norm = H.spectral_norm()
    if norm <= 0:
        raise ValueError("cannot normalize a zero matrix")
    scale = np.pi / (4.0 * norm)
    label = H.label if H.label.endswith("-norm") else H.label + "-norm"
    return HamiltonianMatrix(dim=H.dim, entries=scale * H.entries, label=label)


def eigendecompose(H: HamiltonianMatrix):
    """Ascending eigenvalues and orthonormal eigenvectors (columns)."""
    w, v = np.linalg.eigh(H.entries)
    return w, v


# ---------------------------------------------------------------------------
# spectral-model construction


def _merge_degenerate(eigs, atol):
    """Group strictly sorted-with-ties eigenvalues into distinct levels.

    Returns (levels, block_of_slot) where block_of_slot[i] is the level
    index of raw slot i.  Each level keeps the first eigenvalue of its
    block, which makes degenerate assignments deterministic.
    """
    levels = [float(eigs[0])]
    block = np.zeros(len(eigs), dtype=np.int64)
    for i in range(1, len(eigs)):
        if float(eigs[i]) - levels[-1] <= atol:
            block[i] = len(levels) - 1
        else:
            levels.append(float(eigs[i]))
            block[i] = len(levels) - 1
    return np.array(levels), block


def make_spectral_model(eigs, p0: float, residual_policy="pseudo-random",
                        seed: int = 0, label: str = "") -> SpectralModel:
    """Spectral model with prescribed ground overlap p0.

    The remaining 1 - p0 is distributed over excited levels according to
    residual_policy:

    * ``"pseudo-random"`` (default): draw a seeded complex unit vector in
      the eigenbasis, zero its ground-block components, and distribute
      1 - p0 proportionally to the squared residual components.
    * ``"uniform-excited:K"``: split evenly over the K lowest excited
      levels.
    * an explicit sequence of nonnegative numbers, one per excited level,
      rescaled to sum to 1 - p0.

    Degenerate eigenvalues are merged into single levels (within
    DEGENERACY_ATOL times the spectral spread); p0 sits on the merged
    ground level.  Levels that end up with zero weight are dropped.
    """
    eigs = np.asarray(eigs, dtype=np.float64)
    if eigs.ndim != 1 or eigs.size < 1:
        raise ValueError("eigs must be a nonempty 1-d array")
    if np.any(np.diff(eigs) < 0):
        raise ValueError("eigs must be sorted ascending")
    if not 0.0 < p0 <= 1.0:
        raise ValueError(f"p0 must be in (0, 1], got {p0}")

    atol = DEGENERACY_ATOL * max(1.0, float(eigs[-1] - eigs[0]))
    levels, block = _merge_degenerate(eigs, atol)
    n_levels = levels.size
    excited = np.zeros(n_levels - 1)

    if p0 < 1.0:
        if n_levels < 2:
            raise ValueError("cannot place excited weight: spectrum has one level")
        if isinstance(residual_policy, str) and residual_policy == "pseudo-random":
            gen = np.random.default_rng(seed)
            v = gen.standard_normal(eigs.size) + 1j * gen.standard_normal(eigs.size)
            v[block == 0] = 0.0
            comp = np.abs(v) ** 2
            per_level = np.bincount(block, weights=comp, minlength=n_levels)[1:]
            excited = (1.0 - p0) * per_level / per_level.sum()
        elif isinstance(residual_policy, str) and residual_policy.startswith("uniform-excited"):
            _, _, k_str = residual_policy.partition(":")
            k = int(k_str) if k_str else n_levels - 1
            if not 1 <= k <= n_levels - 1:
                raise ValueError(f"uniform-excited needs 1 <= K <= {n_levels - 1}, got {k}")
            excited[:k] = (1.0 - p0) / k
        elif isinstance(residual_policy, str):
            raise ValueError(f"unknown residual policy {residual_policy!r}")
        else:
            w = np.asarray(residual_policy, dtype=np.float64)
            if w.shape != (n_levels - 1,) or np.any(w < 0) or w.sum() <= 0:
                raise ValueError(
                    f"explicit policy needs {n_levels - 1} nonnegative weights")
            excited = (1.0 - p0) * w / w.sum()

    weights = np.concatenate(([p0], excited))
    keep = weights > 0
    keep[0] = True
    return SpectralModel(eigenvalues=levels[keep], weights=weights[keep], label=label)


def model_from_hamiltonian(H: HamiltonianMatrix, p0: float,
                           residual_policy="pseudo-random", seed: int = 0,
                           normalize_spectrum: bool = True) -> SpectralModel:
    """Diagonalize, optionally rescale to spectral radius pi/4, build a model."""
    w, _ = eigendecompose(H)
    label = H.label
    if normalize_spectrum:
        norm = float(np.abs(w).max())
        if norm <= 0:
            raise ValueError("cannot normalize a zero matrix")
        w = w * (np.pi / (4.0 * norm))
        if not label.endswith("-norm"):
            label += "-norm"
    return make_spectral_model(w, p0, residual_policy, seed, label=label)


def relative_overlap(model: SpectralModel, iv: IntervalPair) -> float:
    """Ground weight over all weight inside the enlarged interval."""
    lam = model.eigenvalues
    plo, phi = iv.Iprime
    denom = model.weights[(lam >= plo) & (lam <= phi)].sum()
    if denom <= 0:
        raise ValueError("relative overlap undefined: no weight inside Iprime")
    lo, hi = iv.I
    num = model.p0 if lo <= model.lambda0 <= hi else 0.0
    return float(num / denom)


def paper_interval_recipe(model: SpectralModel, lambda_prior: float, *,
                          fraction: float = 1.0 / 3.0,
                          width_factor: float = 0.25,
                          low_edge: float = -np.pi / 2) -> IntervalPair:
    """Interval pair around a rough ground estimate.

    The separation is D = width_factor * (lambda_K - lambda_0) where K is
    the smallest excited index whose cumulative excited weight exceeds
    fraction * p0, then I = [low_edge, lambda_prior + D/2] and
    Iprime = [low_edge - D, lambda_prior + 3D/2].

    The lower edge sits at -pi/2 rather than -pi: spectra normalized to
    [-pi/4, pi/4] carry no weight below it, and keeping both interval
    edges away from +-pi leaves room for a trigonometric-polynomial filter
    to ramp smoothly on both sides (a 2pi-periodic polynomial cannot be 1
    at -pi and 0 at pi simultaneously).
    """
    if model.size < 2:
        raise ValueError("interval recipe needs at least one excited level")
    cum = np.cumsum(model.weights[1:])
    above = np.nonzero(cum > fraction * model.p0)[0]
    k = int(above[0]) + 1 if above.size else model.size - 1
    D = width_factor * float(model.eigenvalues[k] - model.lambda0)
    if D <= 0:
        raise ValueError("interval recipe produced a nonpositive separation")
    return IntervalPair(I=(low_edge, lambda_prior + D / 2),
                        Iprime=(low_edge - D, lambda_prior + 3 * D / 2))


# ---------------------------------------------------------------------------
# persistence


def save_model(model: SpectralModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2)
        fh.write("\n")


def load_model(path) -> SpectralModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(
                f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(raw, dict):
        raise ModelFormatError(f"{path}: expected a JSON object")
    for key in ("eigenvalues", "weights"):
        if key not in raw:
            raise ModelFormatError(f"{path}: missing field {key!r}")
        if not isinstance(raw[key], list):
            raise ModelFormatError(f"{path}: field {key!r} must be a list")
    extra = set(raw) - {"eigenvalues", "weights", "label"}
    if extra:
        raise ModelFormatError(f"{path}: unknown fields {sorted(extra)}")
    try:
        return SpectralModel(eigenvalues=np.array(raw["eigenvalues"], dtype=float),
                             weights=np.array(raw["weights"], dtype=float),
                             label=str(raw.get("label", "")))
    except ModelFormatError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
