import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from molscat.theory import (
    ChargeConfig3D, convergence_report, coulomb_energy_gaussian,
    coulomb_energy_quadrature, cut_bound_ratios, fitted_slope, fourier_invariant,
    fourier_regression_estimate, lemma_cut_bounds, random_config,
    sphere_monte_carlo, wavelet_identity_sum, wavelet_invariant,
    wavelet_regression_estimate, wavelet_scale_range,
)


def test_single_gaussian_self_energy():
    cfg = ChargeConfig3D([1.0], [[0, 0, 0]], width=0.5)
    assert coulomb_energy_gaussian(cfg) == pytest.approx(1 / (0.5 * math.sqrt(math.pi)))


def test_point_charges_off_diagonal():
    cfg = ChargeConfig3D([1.0, 2.0], [[0, 0, 0], [0, 0, 2.0]])
    assert coulomb_energy_gaussian(cfg, self_energy=False) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        coulomb_energy_gaussian(cfg)
    with pytest.raises(ValueError):
        ChargeConfig3D([1.0, 1.0], [[0, 0, 0], [0, 0, 0]])


@pytest.mark.parametrize("seed", range(5))
def test_closed_form_matches_quadrature(seed):
    cfg = random_config(np.random.default_rng(seed), 5)
    assert coulomb_energy_quadrature(cfg) == pytest.approx(coulomb_energy_gaussian(cfg),
                                                           rel=1e-9)


def test_point_charge_quadrature():
    cfg = ChargeConfig3D([1, 2, 1], [[0, 0, 0], [1.5, 0, 0], [0, 2, 0]])
    U = coulomb_energy_gaussian(cfg, self_energy=False)
    assert coulomb_energy_quadrature(cfg, self_energy=False) == pytest.approx(U, rel=1e-8)
    assert wavelet_identity_sum(cfg, -40, 60, self_energy=False) == pytest.approx(U, rel=1e-4)


def test_fourier_invariant_examples():
    cfg = ChargeConfig3D([1.0, 1.0], [[0, 0, 0], [0, 0, 1.0]])
    assert fourier_invariant(cfg, math.pi) == pytest.approx(8 * math.pi, rel=1e-12)
    g = ChargeConfig3D([1.0], [[0, 0, 0]], width=1.0)
    assert fourier_invariant(g, 50.0) < 1e-300


@pytest.mark.parametrize("seed", range(20))
def test_fourier_invariant_monte_carlo(seed):
    rng = np.random.default_rng(seed)
    cfg = random_config(rng, int(rng.integers(1, 6)))
    alpha = float(rng.uniform(0.1, 2.0))
    mean, se = sphere_monte_carlo(cfg, alpha, 5000, rng)
    assert abs(mean - fourier_invariant(cfg, alpha)) <= 3 * se + 1e-12


def test_isometry_invariance():
    rng = np.random.default_rng(7)
    cfg = random_config(rng, 5)
    R = Rotation.random(random_state=3).as_matrix()
    moved = cfg.moved(R, shift=(1.0, -2.0, 0.5))
    for f in (coulomb_energy_gaussian,
              lambda c: fourier_invariant(c, 0.7),
              lambda c: wavelet_invariant(c, 1),
              lambda c: fourier_regression_estimate(c, 0.125).value,
              lambda c: wavelet_regression_estimate(c, 0.125).value):
        assert f(moved) == pytest.approx(f(cfg), rel=1e-10)


def test_term_counts():
    assert fourier_regression_estimate(random_config(np.random.default_rng(0)), 2 ** -4).n_terms == 256
    assert wavelet_regression_estimate(random_config(np.random.default_rng(0)), 2 ** -4).n_terms == 13
    assert fourier_regression_estimate(random_config(np.random.default_rng(0)), 2 ** -3).n_terms * 4 == 256
    assert list(wavelet_scale_range(1.0)) == [0]
    with pytest.raises(ValueError):
        fourier_regression_estimate(random_config(np.random.default_rng(0)), 1.0)


def test_wavelet_support():
    # spectrum of a single wide Gaussian is negligible at the finest scales
    g = ChargeConfig3D([1.0], [[0, 0, 0]], width=2.0)
    assert wavelet_invariant(g, -4) < 1e-12


@pytest.mark.parametrize("seed", range(4))
def test_wavelet_identity(seed):
    cfg = random_config(np.random.default_rng(100 + seed), 6)
    assert wavelet_identity_sum(cfg) == pytest.approx(coulomb_energy_gaussian(cfg), rel=1e-6)


def test_convergence_slopes():
    rng = np.random.default_rng(11)
    cfg = random_config(rng, 3)
    rep = convergence_report(cfg)
    assert rep.fourier_slope >= 0.8
    assert rep.wavelet_slope >= 0.9
    assert rep.fourier_terms == [math.ceil(e ** -2) for e in rep.eps]
    assert rep.wavelet_terms == [3 * round(-math.log2(e)) + 1 for e in rep.eps]


def test_single_gaussian_fourier_error_decreases():
    g = ChargeConfig3D([1.0], [[0, 0, 0]], width=0.7)
    U = coulomb_energy_gaussian(g)
    errs = [abs(U - fourier_regression_estimate(g, 2.0 ** -k).value) for k in range(2, 7)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_fitted_slope():
    eps = [0.5, 0.25, 0.125]
    assert fitted_slope(eps, [3 * e ** 2 for e in eps]) == pytest.approx(2.0)


def test_cut_bounds():
    rng = np.random.default_rng(5)
    cfg = random_config(rng, 4)
    a = lemma_cut_bounds(cfg, 2 ** -3)
    b = lemma_cut_bounds(cfg, 2 ** -4)
    assert b.low <= 0.5 * a.low * 1.1
    d = lemma_cut_bounds(cfg.scaled(2.0), 2 ** -3)
    assert d.low == pytest.approx(4 * a.low, rel=1e-12)
    assert d.high == pytest.approx(4 * a.high, rel=1e-12, abs=1e-300)
    assert tuple(lemma_cut_bounds(ChargeConfig3D([], np.zeros((0, 3)), 1.0), 0.1)) == (0.0, 0.0)
    low, high = cut_bound_ratios(cfg)
    assert np.all(low > 0)
