import math

import numpy as np
import pytest

from qcels import (build_tfim, eigendecompose, expectation, generate_dataset,
                   generate_filtered_dataset, hadamard_shot, load_dataset,
                   make_spectral_model, model_from_hamiltonian, noise_bound,
                   noise_residual, normalize, save_dataset)
from qcels.filters import build_filter, constant_one_filter, eval_filter
from qcels.spectrum import IntervalPair, SpectralModel


def single_level(lam):
    return SpectralModel(eigenvalues=np.array([lam]), weights=np.array([1.0]))


# ---------------------------------------------------------------------------
# expectation


def test_expectation_single_level():
    z = expectation(single_level(0.5), 2.0)
    assert np.allclose(z, np.cos(1.0) - 1j * np.sin(1.0), atol=1e-15)


def test_expectation_symmetric_pair_vanishes(two_level_model):
    z = expectation(two_level_model, np.pi / 2)
    assert abs(z) < 1e-15


def test_expectation_matches_state_vector_oracle():
    ham = normalize(build_tfim(8, 4.0))
    model = model_from_hamiltonian(build_tfim(8, 4.0), 0.8, "pseudo-random", seed=7)
    w, v = eigendecompose(ham)
    # rebuild the state in the computational basis: sqrt(weights) on the
    # merged eigenlevels maps back to eigenvector amplitudes
    amps = np.zeros(ham.dim, dtype=complex)
    used = np.zeros(ham.dim, dtype=bool)
    for lam, weight in zip(model.eigenvalues, model.weights):
        idx = int(np.argmin(np.where(used, np.inf, np.abs(w - lam))))
        amps[idx] = math.sqrt(weight)
        used[idx] = True
    psi = v @ amps
    t = 3.7
    direct = psi.conj() @ (v @ (np.exp(-1j * t * w) * (v.conj().T @ psi)))
    # degenerate levels were merged, so compare through the model spectrum
    from_model = expectation(model, t)
    assert abs(direct - from_model) < 1e-10


def test_expectation_modulus_bounded():
    gen = np.random.default_rng(0)
    eigs = np.sort(gen.uniform(-np.pi / 4, np.pi / 4, 12))
    model = make_spectral_model(eigs, 0.6, "pseudo-random", seed=1)
    t = gen.uniform(0, 50, 64)
    assert np.all(np.abs(expectation(model, t)) <= 1 + 1e-12)


# ---------------------------------------------------------------------------
# shots


def test_hadamard_shot_deterministic_extremes():
    gen = np.random.default_rng(0)
    plus = single_level(0.0)  # expectation 1 at any t
    assert all(hadamard_shot(plus, 1.7, "re", gen) == 1 for _ in range(20))
    minus = single_level(np.pi / 2)  # Im = -1 at t = 1
    assert all(hadamard_shot(minus, 1.0, "im", gen) == -1 for _ in range(20))


def test_hadamard_shot_zero_mean_monte_carlo(two_level_model):
    gen = np.random.default_rng(5)
    n = 10**5
    total = sum(hadamard_shot(two_level_model, np.pi / 2, "re", gen) for _ in range(n))
    assert abs(total / n) < 5 / math.sqrt(n)


def test_hadamard_shot_rejects_bad_basis():
    with pytest.raises(ValueError):
        hadamard_shot(single_level(0.0), 1.0, "abs", np.random.default_rng(0))


def test_shot_record_pair():
    from qcels import ShotRecord, hadamard_shot_pair
    rec = hadamard_shot_pair(single_level(0.4), 1.3, np.random.default_rng(1))
    assert rec.x in (-1, 1) and rec.y in (-1, 1)
    with pytest.raises(ValueError):
        ShotRecord(x=0, y=1)


# ---------------------------------------------------------------------------
# plain datasets


def test_generate_dataset_high_shot_limit():
    ds = generate_dataset(single_level(np.pi / 2), 1.0, 2, 10**6, seed=3)
    tol = 5 / math.sqrt(10**6)
    assert abs(ds.values[1].real - 0.0) < tol
    assert abs(ds.values[1].imag - (-1.0)) < tol


def test_generate_dataset_single_point():
    ds = generate_dataset(single_level(0.3), 0.7, 1, 400, seed=9)
    assert ds.times[0] == 0.0
    assert ds.values[0] == 1.0 + 1j * ds.values[0].imag  # Re is deterministic at t=0
    assert ds.total_evolution_time == 0.0


def test_generate_dataset_deterministic(two_level_model):
    a = generate_dataset(two_level_model, 0.4, 6, 500, seed=11)
    b = generate_dataset(two_level_model, 0.4, 6, 500, seed=11)
    c = generate_dataset(two_level_model, 0.4, 6, 500, seed=12)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert np.array_equal(a.times, 0.4 * np.arange(6))


def test_generate_dataset_components_bounded(two_level_model):
    ds = generate_dataset(two_level_model, 0.9, 8, 7, seed=21)
    assert np.abs(ds.values.real).max() <= 1.0
    assert np.abs(ds.values.imag).max() <= 1.0


def test_shot_mean_matches_re_im_parts():
    gen = np.random.default_rng(2)
    eigs = np.sort(gen.uniform(-0.7, 0.7, 5))
    model = make_spectral_model(eigs, 0.7, "pseudo-random", seed=4)
    ds = generate_dataset(model, 0.6, 4, 2 * 10**5, seed=13)
    z = expectation(model, ds.times)
    tol = 5 / math.sqrt(2 * 10**5)
    assert np.abs(ds.values.real - z.real).max() < tol
    assert np.abs(ds.values.imag - z.imag).max() < tol


# ---------------------------------------------------------------------------
# filtered datasets


def test_constant_filter_reduces_to_plain(two_level_model):
    plain = generate_dataset(two_level_model, 0.5, 5, 300, seed=8)
    filt = generate_filtered_dataset(two_level_model, constant_one_filter(),
                                     0.5, 5, 300, seed=8)
    assert np.array_equal(plain.values, filt.values)
    assert plain.total_evolution_time == filt.total_evolution_time


def test_filtered_single_level_identity():
    model = single_level(-0.6)
    iv = IntervalPair(I=(-0.8, -0.4), Iprime=(-1.0, -0.2))
    filt = build_filter(iv, 1e-3)
    ns = 10**5
    ds = generate_filtered_dataset(model, filt, 0.3, 4, ns, seed=5)
    f0 = eval_filter(filt, model.lambda0)
    want = f0 * np.exp(-1j * ds.times * model.lambda0)
    tol = 5 * filt.one_norm / math.sqrt(ns)
    assert np.abs(ds.values - want).max() < tol
    assert abs(f0 - 1.0) <= filt.q


def test_filtered_mixture_matches_damped_expectation():
    gen = np.random.default_rng(6)
    eigs = np.sort(gen.uniform(-0.7, 0.7, 6))
    model = make_spectral_model(eigs, 0.5, "pseudo-random", seed=2)
    iv = IntervalPair(I=(eigs[0] - 0.05, eigs[0] + 0.05),
                      Iprime=(eigs[0] - 0.25, eigs[0] + 0.25))
    filt = build_filter(iv, 1e-2)
    ns = 10**5
    ds = generate_filtered_dataset(model, filt, 0.4, 3, ns, seed=31)
    damped = model.weights * eval_filter(filt, model.eigenvalues)
    want = np.exp(-1j * ds.times[:, None] * model.eigenvalues) @ damped
    assert np.abs(ds.values - want).max() < 5 * filt.one_norm / math.sqrt(ns)
    # levels outside Iprime are damped below q
    outside = np.abs(eval_filter(filt, model.eigenvalues[eigs > iv.Iprime[1]]))
    assert outside.size and np.all(outside <= filt.q)


def test_filtered_values_bounded_by_one_norm():
    model = single_level(0.2)
    iv = IntervalPair(I=(0.0, 0.4), Iprime=(-0.3, 0.7))
    filt = build_filter(iv, 1e-2)
    ds = generate_filtered_dataset(model, filt, 0.3, 5, 9, seed=77)
    assert np.abs(ds.values.real).max() <= filt.one_norm + 1e-12
    assert np.abs(ds.values.imag).max() <= filt.one_norm + 1e-12


def test_filtered_shift_sign_flag_changes_statistics():
    model = single_level(-0.5)
    iv = IntervalPair(I=(-0.7, -0.3), Iprime=(-0.95, -0.05))
    filt = build_filter(iv, 1e-3)
    minus = generate_filtered_dataset(model, filt, 0.3, 3, 2 * 10**4, seed=1, shift_sign=-1)
    plus = generate_filtered_dataset(model, filt, 0.3, 3, 2 * 10**4, seed=1, shift_sign=+1)
    # with the opposite sign the filter argument flips: F(-lambda) here is
    # far from F(lambda) because the interval is not symmetric about zero
    want = eval_filter(filt, model.lambda0) * np.exp(-1j * minus.times * model.lambda0)
    tol = 5 * filt.one_norm / math.sqrt(2 * 10**4)
    assert np.abs(minus.values - want).max() < tol
    assert np.abs(plus.values - want).max() > 10 * tol


# ---------------------------------------------------------------------------
# noise bound and residuals


def test_noise_bound_formula_values():
    assert abs(noise_bound(100, 100, 0.05)
               - (0.2 + math.sqrt(2 * math.log(20.0) / 100))) < 1e-12
    assert abs(noise_bound(1, 1, 0.5) - 3.17741) < 1e-5
    assert noise_bound(10**6, 10**6, 0.1) < noise_bound(100, 100, 0.1)


def test_noise_bound_eta_domain():
    with pytest.raises(ValueError):
        noise_bound(10, 10, 0.0)
    with pytest.raises(ValueError):
        noise_bound(10, 10, 1.0)


def test_noise_residual_infinite_shot_limit(two_level_model):
    ds = generate_dataset(two_level_model, 0.3, 5, 4 * 10**5, seed=2)
    resid = noise_residual(ds, two_level_model)
    assert np.abs(resid).max() < 5 * math.sqrt(2) / math.sqrt(4 * 10**5)


def test_noise_residual_single_shot_bound(two_level_model):
    # each component of a +-1 shot deviates from its mean by at most 2
    ds = generate_dataset(two_level_model, 0.9, 20, 1, seed=3)
    resid = noise_residual(ds, two_level_model)
    assert np.abs(resid.real).max() <= 2.0 + 1e-12
    assert np.abs(resid.imag).max() <= 2.0 + 1e-12


def test_noise_residual_rejects_filtered(two_level_model):
    ds = generate_filtered_dataset(two_level_model, constant_one_filter(),
                                   0.3, 3, 5, seed=4)
    with pytest.raises(ValueError):
        noise_residual(ds, two_level_model)


def test_hoeffding_gate_statistical(two_level_model):
    # tail-bound gate: mean |E_n| under the bound in most seeded trials
    n, ns, eta = 50, 50, 0.1
    bound = noise_bound(n, ns, eta)
    trials = 100
    bad = 0
    for s in range(trials):
        ds = generate_dataset(two_level_model, 0.35, n, ns, seed=1000 + s)
        bad += float(np.mean(np.abs(noise_residual(ds, two_level_model)))) > bound
    # 99% binomial band around eta * trials
    assert bad <= eta * trials + 3 * math.sqrt(trials * eta * (1 - eta))


def test_subgaussian_sup_bound(two_level_model):
    # sup over a rho/T window of the averaged phased residual stays below
    # (4 sqrt(2) log^(1/2)(8 sqrt(Ns N)/eta) + rho) / sqrt(Ns N)
    n, ns, eta, rho = 20, 200, 0.1, 2.0
    t_span = n * 0.45
    thresh = (4 * math.sqrt(2) * math.sqrt(math.log(8 * math.sqrt(ns * n) / eta))
              + rho) / math.sqrt(ns * n)
    lam0 = two_level_model.lambda0
    thetas = np.linspace(lam0 - rho / t_span, lam0 + rho / t_span, 201)
    bad = 0
    trials = 60
    for s in range(trials):
        ds = generate_dataset(two_level_model, 0.45, n, ns, seed=2000 + s)
        resid = noise_residual(ds, two_level_model)
        sup = max(abs(np.mean(resid * np.exp(1j * th * ds.times))) for th in thetas)
        bad += sup >= thresh
    assert bad <= eta * trials + 3 * math.sqrt(trials * eta * (1 - eta))


# ---------------------------------------------------------------------------
# persistence


def test_dataset_round_trip(tmp_path, two_level_model):
    ds = generate_dataset(two_level_model, 0.25, 6, 40, seed=6)
    path = tmp_path / "data.csv"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert np.array_equal(back.values, ds.values)
    assert np.array_equal(back.times, ds.times)
    assert back.tau == ds.tau and back.seed == ds.seed
    assert back.filtered == ds.filtered


def test_dataset_csv_bytes_stable(tmp_path, two_level_model):
    ds = generate_dataset(two_level_model, 0.25, 6, 40, seed=6)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    save_dataset(ds, p1)
    save_dataset(ds, p2)
    assert p1.read_bytes() == p2.read_bytes()
    header = p1.read_text().splitlines()[0]
    assert header == "n,t,re_z,im_z"


def test_filtered_dataset_sidecar_carries_digest(tmp_path, two_level_model):
    filt = constant_one_filter()
    ds = generate_filtered_dataset(two_level_model, filt, 0.3, 3, 5, seed=4)
    path = tmp_path / "f.csv"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert back.filtered
    assert back.filter_digest == ds.filter_digest
