import os
import subprocess
import sys

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jostscat import _volterra, jost
from jostscat import potential as P
from jostscat._accel import use_numba
from jostscat.numerics import MomentumGrid, SpatialGrid

import oracles

# solve_ivp (DOP853, rtol 1e-13) plane-wave matching, tests/oracles.jost_right / jost_left
GAUSS_03_K = [0.5, 1.0, 1.5, 2.0, 3.0]
GAUSS_03_T = [0.5264184035858955 - 0.6268137728119771j, 0.9157315710026682 - 0.3919824819751862j,
              0.9670207526902628 - 0.2546067454670609j, 0.9818779952744585 - 0.18951377042428524j,
              0.9920610042704031 - 0.12575755963515667j]
GAUSS_03_R = [-0.43989241067682233 - 0.36943582068912345j,
              -0.03472202003058098 - 0.08111599730368305j,
              -0.0017319093067323771 - 0.006577957069880509j,
              -6.917004235672573e-05 - 0.0003583725993646744j,
              -1.0220555759902865e-07 - 8.062668228492156e-07j]
# 0.4 exp(-(x-1)^2/2) - 0.15 exp(-((x+0.5)/0.7)^2/2): T, R2 (from the left), R1 (from the right)
ASYM_K = [0.7, 1.3]
ASYM_T = [0.7351864803768948 - 0.5175067753252942j, 0.9532919621645829 - 0.29779493422734926j]
ASYM_R2 = [0.4149578237817374 - 0.13963373892367004j, 0.03808718626318365 + 0.033196057951175854j]
ASYM_R1 = [-0.27143510114236713 + 0.34352665461550486j,
           -0.012418622008199756 + 0.04897335855709667j]
# 0.5 sech^2 x
PTREP_K = [0.5, 2.0]
PTREP_T = [0.30423952017534306 - 0.6035767931228685j, 0.9673906291291894 - 0.2531156906815595j]
PTREP_R2 = [-0.6580987363279247 - 0.3317219052318016j, -0.002372080505756869 - 0.009065927310252419j]


def asym_samples():
    xs = np.linspace(-12, 12, 2401)
    v = 0.4 * np.exp(-0.5 * (xs - 1.0) ** 2) - 0.15 * np.exp(-0.5 * ((xs + 0.5) / 0.7) ** 2)
    return P.build_potential(P.samples(xs, v))


# -- D_k ---------------------------------------------------------------------------

def test_dk_kernel_branches():
    assert jost.dk_kernel(0.0, 3.5) == 3.5
    assert jost.dk_kernel(1.3 + 0.2j, 0.0) == 0.0
    k, x = 0.7, 1.9
    assert np.isclose(jost.dk_kernel(k, x), (np.exp(2j * k * x) - 1) / (2j * k), rtol=1e-15)


def test_dk_kernel_rejects_lower_half_plane():
    with pytest.raises(ValueError):
        jost.dk_kernel(1.0 - 0.1j, 1.0)


@given(st.floats(-50, 50), st.floats(-20, 20))
def test_dk_kernel_bounded_by_x(k, x):
    assert abs(jost.dk_kernel(k, x)) <= abs(x) * (1 + 1e-12) + 1e-300


@given(st.floats(1e-9, 1e-5), st.floats(-3, 3))
def test_dk_kernel_continuous_at_small_k(k, x):
    mp.mp.dps = 40
    z = 2j * mp.mpf(k) * mp.mpf(x)
    exact = complex(mp.mpf(x) * mp.expm1(z) / z) if z != 0 else x
    assert np.isclose(jost.dk_kernel(k, x), exact, rtol=1e-12, atol=1e-15)


def test_dk_kernel_dk_matches_finite_difference():
    k, x, h = 0.9, 2.3, 1e-6
    fd = (jost.dk_kernel(k + h, x) - jost.dk_kernel(k - h, x)) / (2 * h)
    assert np.isclose(jost.dk_kernel_dk(k, x), fd, rtol=1e-8)


# -- Jost solutions -----------------------------------------------------------------

def test_zero_potential_gives_unit_m():
    V = P.build_potential(P.zero(), SpatialGrid(10.0, 64))
    col = jost.solve_m(1, V, 1.3)
    assert np.all(col.m == 1) and np.all(col.dm == 0)
    assert np.all(jost.solve_m_derivative(1, V, 1.3) == 0)


@pytest.mark.parametrize("k", [0.25, 1.0, 4.0])
def test_pt1_closed_form(pt1, k):
    x = np.linspace(-10, 10, 201)
    jd = jost.jost_data(pt1, [k], x=x)
    exact = (k + 1j * np.tanh(x)) / (k + 1j)
    assert np.max(np.abs(jd.m1[0] - exact)) < 1e-6
    # m2 is the mirror image for an even potential
    assert np.max(np.abs(jd.m2[0] - exact[::-1])) < 1e-6


def test_pt1_against_ode_oracle(pt1):
    x = np.linspace(-6, 6, 25)
    ref = oracles.jost_right(lambda s: -2 / np.cosh(s) ** 2, 1.0, x_far=30.0, x_left=-30.0, xs=x)
    sel = (ref["x"] > -6.01) & (ref["x"] < 6.01)
    jd = jost.jost_data(pt1, [1.0], x=ref["x"][sel])
    assert np.max(np.abs(jd.m1[0] - ref["m1"][sel])) < 1e-8


def test_solve_m_gauss_seidel_and_jacobi_agree(pt1):
    a = jost.solve_m(1, pt1, 1.0)
    b = jost.solve_m(1, pt1, 1.0, scheme="jacobi")
    assert a.iterations_used <= 3 < b.iterations_used
    assert np.max(np.abs(a.m - b.m)) < 1e-10
    assert a.residual < 1e-10


def test_jacobi_iterates_obey_factorial_envelope():
    V = P.build_potential(P.gaussian(-1.0, 1.0))
    mesh = jost._Sweeper(V, np.zeros(0)).mesh(1, jost.step_for(0.5))
    m = np.ones(mesh.n_nodes, complex)
    diffs = []
    for _ in range(12):
        out = np.empty_like(m)
        _volterra._sweep_one(0.5 + 0j, mesh.y, mesh.cnt, mesh.w, mesh.vs, out, m, True)
        diffs.append(np.max(np.abs(out - m)))
        m = out
    diffs = np.array(diffs)
    # successive differences fall faster than any geometric rate: ratios shrink
    ratios = diffs[1:] / diffs[:-1]
    assert ratios[-1] < 0.5 * ratios[2]
    assert diffs[-1] < 1e-8


def test_iteration_error_carries_residual(pt1):
    with pytest.raises(_volterra.VolterraIterationError) as err:
        jost.solve_m(1, pt1, 1.0, scheme="jacobi", max_iter=2)
    assert err.value.residual > 0


def test_solve_m_domain_errors(pt1):
    with pytest.raises(ValueError):
        jost.solve_m(3, pt1, 1.0)
    with pytest.raises(ValueError):
        jost.solve_m(1, pt1, 1.0 - 0.5j)
    with pytest.raises(ValueError):
        jost.solve_m_derivative(1, pt1, 1e-4)


@pytest.mark.parametrize("direction", [1, 2])
def test_volterra_residual_small(direction):
    V = P.build_potential(P.gaussian(-1.0, 1.0))
    for k in (0.3, 2.0, 0.5j):
        assert jost.solve_m(direction, V, k).residual < 1e-10


def test_m_derivative_matches_finite_difference(pt1):
    k, h = 1.2, 1e-4
    md = jost.solve_m_derivative(1, pt1, k)
    fd = (jost.solve_m(1, pt1, k + h).m - jost.solve_m(1, pt1, k - h).m) / (2 * h)
    assert np.max(np.abs(md - fd)) < 1e-4


def test_m_derivative_closed_form_and_inverse_k_bound(pt1):
    x = pt1.grid.x
    right = x >= 0
    c = []
    for k in (0.1, 0.5, 2.0, 10.0):
        md = jost.solve_m_derivative(1, pt1, k)
        exact = 1j * (1 - np.tanh(x)) / (k + 1j) ** 2
        assert np.max(np.abs(md - exact)[np.abs(x) < 10]) < 1e-6
        c.append(k * np.max(np.abs(md[right])))
    # |m1'(x, k)| <= C / k on x >= 0, C = sup k / (k^2 + 1) = 1/2
    assert max(c) <= 0.5 + 1e-6


def test_high_energy_bound_stable_under_k_doubling(pt1):
    x = pt1.grid.x
    w = 1 + np.maximum(-x, 0)
    C = []
    for k in (2.0, 4.0, 8.0):
        m = jost.jost_data(pt1, [k], x=x).m1[0]
        C.append(np.max(np.abs(m - 1) * (1 + k) / w))
    assert max(C) / min(C) < 1.5


def test_conjugation_symmetry():
    V = asym_samples()
    x = np.linspace(-15, 15, 31)
    jd = jost.jost_data(V, [0.8, -0.8], x=x)
    assert np.max(np.abs(jd.m1[1] - np.conj(jd.m1[0]))) < 1e-10
    T = jost.coefficients_from_jost(jd)[0]
    assert abs(T[1] - np.conj(T[0])) < 1e-10


# -- coefficients -----------------------------------------------------------------

def test_zero_potential_coefficients():
    c = jost.scattering_coefficients(P.build_potential(P.zero()), [0.3, 2.0])
    assert np.all(c.T == 1) and np.all(c.R1 == 0) and np.all(c.R2 == 0)


def test_pt1_reflectionless(pt1):
    c = jost.scattering_coefficients(pt1, [1.0])
    assert abs(c.T[0] - 1j) < 1e-6
    assert abs(c.R1[0]) < 1e-6 and abs(c.R2[0]) < 1e-6


def test_square_well_matching_formula():
    V = P.build_potential(P.square_well(1.0, 1.0))
    k, a, v0 = 0.8, 1.0, 1.0
    kap = np.sqrt(k * k + v0)
    inv_t = np.exp(2j * k * a) * (np.cos(2 * kap * a)
                                  - 1j * (k * k + kap * kap) / (2 * k * kap) * np.sin(2 * kap * a))
    c = jost.scattering_coefficients(V, [k])
    assert abs(1 / c.T[0] - inv_t) < 1e-6


def test_gaussian_against_frozen_ode_oracle():
    V = P.build_potential(P.gaussian(0.3, 1.0))
    c = jost.scattering_coefficients(V, GAUSS_03_K)
    assert np.max(np.abs(c.T - GAUSS_03_T)) < 1e-8
    assert np.max(np.abs(c.R1 - GAUSS_03_R)) < 1e-8
    assert np.max(np.abs(c.R2 - GAUSS_03_R)) < 1e-8


def test_repulsive_pt_against_frozen_ode_oracle():
    V = P.build_potential(P.poschl_teller(amplitude=0.5))
    c = jost.scattering_coefficients(V, PTREP_K)
    assert np.max(np.abs(c.T - PTREP_T)) < 1e-8
    assert np.max(np.abs(c.R2 - PTREP_R2)) < 1e-8


def test_asymmetric_potential_distinguishes_reflections():
    c = jost.scattering_coefficients(asym_samples(), ASYM_K, classify_potential=False)
    assert np.max(np.abs(c.T - ASYM_T)) < 1e-6
    assert np.max(np.abs(c.R2 - ASYM_R2)) < 1e-6
    assert np.max(np.abs(c.R1 - ASYM_R1)) < 1e-6
    # R1 T* + T R2* = 0 (the off-diagonal of S^* S)
    assert np.max(np.abs(c.R1 * np.conj(c.T) + c.T * np.conj(c.R2))) < 1e-8


def test_oracle_reproduces_frozen_values():
    r = oracles.jost_right(oracles.gaussian_potential(0.3, 1.0), 1.0)
    assert abs(r["T"] - GAUSS_03_T[1]) < 1e-12


@pytest.mark.parametrize("spec", [P.zero(), P.square_well(1.0, 1.0), P.poschl_teller(1),
                                  P.gaussian(-1.0, 1.0), P.poschl_teller(amplitude=0.5)])
def test_unitarity_and_relations(spec):
    V = P.build_potential(spec)
    ks = np.linspace(0.05, 8.0, 64)
    c = jost.scattering_coefficients(V, ks)
    assert np.max(c.unitarity_defect) < 1e-8
    assert np.max(np.abs(c.T - c.T_j2)) < 1e-8
    assert not c.flags
    jd = jost.jost_data(V, ks[::8], x=np.linspace(-8, 8, 33))
    sub = jost.ScatteringCoefficients(k=ks[::8], T=c.T[::8], R1=c.R1[::8], R2=c.R2[::8],
                                      T_j2=c.T_j2[::8])
    rel = jost.verify_relations(jd, sub)
    assert rel["relation_m1"] < 1e-7 and rel["relation_m2"] < 1e-7


def test_high_energy_transmission_tends_to_one():
    V = P.build_potential(P.gaussian(0.3, 1.0))
    ks = np.array([4.0, 8.0, 16.0])
    T = jost.scattering_coefficients(V, ks).T
    # T = 1 - i int V / (2k) + O(k^-2)
    born = 0.3 * np.sqrt(2 * np.pi) / 2
    scaled = np.abs(T - 1) * ks
    assert np.all(np.abs(scaled - born) < 1.0 / ks)


def test_punctured_grid_required():
    with pytest.raises(ValueError):
        jost.scattering_coefficients(P.build_potential(P.zero()), [0.0, 1.0])


def test_momentum_grid_input():
    V = P.build_potential(P.gaussian(0.3, 1.0), SpatialGrid(10.0, 32))
    kg = MomentumGrid.uniform(2.0, 0.5, k_min=0.4)
    c = jost.scattering_coefficients(V, kg)
    assert np.allclose(c.k, kg.k)
    assert np.allclose(c.T[c.k < 0], np.conj(c.T[c.k > 0][::-1]))


# -- classification -----------------------------------------------------------------

def test_classification_examples():
    assert jost.classify(P.build_potential(P.zero())).classification == "exceptional"
    assert jost.classify(P.build_potential(P.zero())).a == 1.0
    well = jost.classify(P.build_potential(P.square_well(1.0, 1.0)))
    assert well.classification == "generic"
    res = jost.classify(P.build_potential(P.square_well((np.pi / 2) ** 2, 1.0)))
    assert res.classification == "exceptional"
    # the resonant well is transparent at zero energy: f1(x, 0) = -1 on the left
    assert abs(res.a + 1) < 1e-6


def test_pt1_is_exceptional_with_half_bound_state(pt1):
    c = jost.classify(pt1)
    # f1(x, 0) = tanh x is bounded: a zero-energy resonance
    assert c.classification == "exceptional"
    assert abs(c.a + 1) < 1e-6
    assert np.max(np.abs(c.witness - np.tanh(pt1.grid.x))) < 1e-6


@pytest.mark.parametrize("spec", [P.zero(), P.square_well(1.0, 1.0),
                                  P.square_well((np.pi / 2) ** 2, 1.0), P.gaussian(0.3, 1.0)])
def test_classification_stable_under_refinement(spec):
    a = jost.classify(P.build_potential(spec, SpatialGrid(40.0, 1024))).classification
    b = jost.classify(P.build_potential(spec, SpatialGrid(40.0, 2048))).classification
    assert a == b


def test_generic_low_energy_law():
    V = P.build_potential(P.gaussian(0.3, 1.0))
    ks = np.array([0.1, 0.05, 0.025])
    T = jost.scattering_coefficients(V, ks).T
    ratio = np.abs(T) / ks
    assert (ratio.max() - ratio.min()) / ratio.min() < 0.15


def test_exceptional_low_energy_limit():
    V = P.build_potential(P.square_well((np.pi / 2) ** 2, 1.0))
    c = jost.classify(V)
    T = jost.scattering_coefficients(V, [1e-3]).T[0]
    assert abs(T - jost.transmission_at_zero(c)) < 1e-2
    Tz = jost.scattering_coefficients(P.build_potential(P.zero()), [1e-3]).T[0]
    assert Tz == 1.0


# -- numba / numpy paths ----------------------------------------------------------

def test_numba_and_numpy_marches_agree():
    V = P.build_potential(P.gaussian(-1.0, 1.0))
    sw = jost._Sweeper(V, np.linspace(-3, 3, 13))
    mesh = sw.mesh(1, jost.step_for(2.0))
    ks = np.array([0.5, 2.0, 0.3j], dtype=complex)
    args = (mesh.y, mesh.cnt, mesh.w, mesh.vs, mesh.out_idx)
    a = _volterra._march_many_numpy(ks, *args)
    b = _volterra._march_many_numba(ks, *args)
    for u, v in zip(a, b):
        assert np.max(np.abs(u - v)) < 1e-12


def test_disable_flag_selects_numpy_path():
    code = ("from jostscat._accel import use_numba; from jostscat import jost, potential as P;"
            "V = P.build_potential(P.gaussian(0.3, 1.0));"
            "print(use_numba(), repr(complex(jost.scattering_coefficients(V, [1.0]).T[0])))")
    env = dict(os.environ, JOSTSCAT_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.split()
    assert out[0] == "False"
    assert abs(complex(out[1]) - GAUSS_03_T[1]) < 1e-8
    assert use_numba()
