import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jostscat import nls as N
from jostscat.numerics import l2_norm
from jostscat.propagator import evolve_linear

from conftest import gaussian_field


def x_normalized_gaussian(sd, x_norm=0.3, boost=0.0):
    phi = gaussian_field(sd.grid, 0.0, 1.0, boost)
    return phi * x_norm / N.x_norm(phi, sd)


def test_config_validation():
    for kwargs in (dict(p=3), dict(dt=0.0), dict(splitting="lie")):
        with pytest.raises(N.NlsConfigError):
            N.NlsConfig(lam=0.1, **kwargs)


@given(st.floats(-1, 1), st.floats(5, 9), st.floats(0, 3))
def test_primitive_differentiates_to_the_nonlinearity(lam, p, mu):
    cfg = N.NlsConfig(lam=lam, p=p)
    h = 1e-6
    dG = (cfg.primitive(mu + h) - cfg.primitive(max(mu - h, 0.0))) / (mu + h - max(mu - h, 0.0))
    assert np.isclose(dG, N.nonlinearity(mu, lam, p).real, rtol=1e-5, atol=1e-9)
    assert cfg.primitive(0.0) == 0.0


def test_mass_and_energy_are_conserved(sd_nls):
    phi = x_normalized_gaussian(sd_nls)
    cfg = N.NlsConfig(lam=0.1, p=5, dt=1e-3, t_span=(0.0, 2.0))
    tr = N.evolve_nls(phi, cfg, sd_nls, record_every=100)
    assert len(tr.times) == len(tr.fields) == len(tr.mass) == 21
    assert tr.drift("mass") < 1e-8
    assert tr.drift("energy") < 1e-6
    assert tr.drift("energy_x") < 1e-6
    mass, energy = N.conserved_quantities(tr.fields[-1], cfg, sd_nls)
    assert np.isclose(mass, tr.mass[-1]) and np.isclose(energy, tr.energy[-1])


def test_strong_nonlinearity_still_conserves(sd_nls):
    # focusing and large enough that the nonlinear phase is not a perturbation
    phi = x_normalized_gaussian(sd_nls, 1.5, boost=1.0)
    cfg = N.NlsConfig(lam=-0.5, p=5, dt=5e-4, t_span=(0.0, 0.5))
    tr = N.evolve_nls(phi, cfg, sd_nls, record_every=100)
    assert tr.drift("mass") < 1e-10
    assert tr.drift("energy") < 1e-4


def test_step_is_second_order(sd_nls):
    phi = x_normalized_gaussian(sd_nls, 0.8)
    finals = [N.evolve_nls(phi, N.NlsConfig(lam=0.5, p=5, dt=dt, t_span=(0.0, 1.0)), sd_nls,
                           record_every=10 ** 9).fields[-1] for dt in (0.04, 0.02, 0.01)]
    e1 = l2_norm(finals[0] - finals[1], sd_nls.grid)
    e2 = l2_norm(finals[1] - finals[2], sd_nls.grid)
    assert abs(np.log2(e1 / e2) - 2.0) < 0.2


def test_zero_coupling_is_the_linear_flow(sd_nls):
    phi = x_normalized_gaussian(sd_nls, boost=1.0)
    cfg = N.NlsConfig(lam=0.0, dt=0.1, t_span=(0.0, 3.0))
    tr = N.evolve_nls(phi, cfg, sd_nls, record_every=10)
    assert l2_norm(tr.fields[-1] - evolve_linear(phi, 3.0, sd_nls), sd_nls.grid) < 1e-12


def test_backward_run_retraces_forward_run(sd_nls):
    phi = x_normalized_gaussian(sd_nls, 1.0)
    cfg = N.NlsConfig(lam=0.3, dt=1e-2, t_span=(0.0, 1.0))
    fwd = N.evolve_nls(phi, cfg, sd_nls, record_every=10 ** 9)
    back = N.evolve_nls(fwd.fields[-1], cfg, sd_nls, record_every=10 ** 9, t_span=(1.0, 0.0))
    assert np.isclose(back.times[-1], 0.0)
    # the flow retraces the part of phi in the range of the spectral maps; the
    # zero-momentum cell is absent for a generic potential
    in_range = N.LinearFlow(sd_nls)(phi, 0.0)
    assert l2_norm(back.fields[-1] - in_range, sd_nls.grid) < 1e-12
    assert l2_norm(in_range - phi, sd_nls.grid) < 1e-7


def test_duhamel_residual_vanishes_with_the_step(sd_nls):
    phi = x_normalized_gaussian(sd_nls, 1.0)
    residuals = []
    for dt in (0.02, 0.01):
        cfg = N.NlsConfig(lam=0.5, dt=dt, t_span=(0.0, 1.0))
        tr = N.evolve_nls(phi, cfg, sd_nls, record_every=1)
        residuals.append(N.duhamel_residual(tr, phi, cfg, sd_nls))
    assert residuals[1] < residuals[0] < 1e-5


def test_single_step_matches_trajectory(sd_nls):
    phi = x_normalized_gaussian(sd_nls)
    cfg = N.NlsConfig(lam=0.1, dt=0.05, t_span=(0.0, 0.05))
    tr = N.evolve_nls(phi, cfg, sd_nls)
    assert np.allclose(N.step(phi, 0.05, cfg, sd_nls), tr.fields[-1], atol=1e-14)


def test_non_finite_data_is_reported(sd_nls):
    phi = x_normalized_gaussian(sd_nls)
    phi[3] = np.nan
    with pytest.raises(N.NlsOverflowError):
        N.step(phi, 0.01, N.NlsConfig(lam=0.1), sd_nls)


def test_x_norm_of_zero_potential_gaussian(sd_zero_scatter):
    # <(H_0 + 1) phi, phi> = sqrt(pi) (1/2 + 1) for phi = exp(-x^2/2)
    phi = np.exp(-sd_zero_scatter.grid.x ** 2 / 2)
    assert np.isclose(N.x_norm(phi, sd_zero_scatter) ** 2, 1.5 * np.sqrt(np.pi), rtol=1e-8)


def test_stability_number_and_rows(sd_nls):
    phi = x_normalized_gaussian(sd_nls)
    cfg = N.NlsConfig(lam=0.1, dt=0.1, t_span=(0.0, 0.2))
    assert cfg.stability_number(phi) < N.STABILITY_LIMIT
    rows = N.trajectory_rows(N.evolve_nls(phi, cfg, sd_nls))
    assert [len(r) for r in rows] == [4, 4, 4]
