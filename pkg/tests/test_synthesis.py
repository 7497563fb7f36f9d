from __future__ import annotations

import time

import numpy as np
import pytest

from sea_impedance.errors import DimensionMismatch, Infeasible
from sea_impedance.lti import StateSpace, hinf_norm, is_hurwitz
from sea_impedance.sea import DesiredImpedance, GeneralizedPlant, build_generalized_plant
from sea_impedance.synthesis import (
    ControllerRealization,
    SynthesisBounds,
    close_loop,
    synthesize_mixed,
    verify,
)

REFERENCE_BOUNDS = {"0.3": (0.0580, 43.4), "0.6": (0.0330, 29.9), "0.9": (0.0222, 0.685)}


def test_bounds_validation():
    with pytest.raises(ValueError):
        SynthesisBounds(0.0, 1.0)
    assert SynthesisBounds(1.0, 2.0).scaled(1.5) == SynthesisBounds(1.5, 3.0)


def test_controller_rejects_feedthrough_and_bad_shapes():
    with pytest.raises(ValueError):
        ControllerRealization(-np.eye(1), np.zeros((1, 2)), np.zeros((1, 1)), np.ones((1, 2)))
    with pytest.raises(DimensionMismatch):
        ControllerRealization(-np.eye(2), np.zeros((1, 2)), np.zeros((1, 2)))


def test_zero_controller_leaves_open_loop_map(params, weights):
    plant = build_generalized_plant(params, DesiredImpedance(K_d=0.3 * params.K_s), weights)
    cl = close_loop(plant, ControllerRealization.zero())
    for w in (0.3, 3.0, 30.0):
        a = cl.channel(["e_w", "u_w"]).evaluate(1j * w)
        b = plant.system.subsystem(["e_w", "u_w"], ["phi_L", "d", "n"]).evaluate(1j * w)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-15)


def test_stabilized_integrator():
    # x' = u, y = x; controller with fast pole approximating u = -x
    sys = StateSpace([[0.0]], [[0.0, 1.0]], [[1.0], [1.0]], np.zeros((2, 2)), ("w", "u"), ("z", "y"))
    gp = GeneralizedPlant(sys, n_w=1, n_u=1, n_z=1, n_y=1)
    k = ControllerRealization([[-100.0]], [[100.0]], [[-1.0]])
    A = np.block([[gp.A, gp.Bu @ k.C_k], [k.B_k @ gp.Cy, k.A_k]])
    assert np.max(np.linalg.eigvals(A).real) < 0


def test_unstable_controller_fails_verification(params, weights):
    plant = build_generalized_plant(params, DesiredImpedance(K_d=0.3 * params.K_s), weights)
    k = ControllerRealization([[1.0]], [[0.0, 0.0]], [[0.0]])
    rep = verify(plant, k, SynthesisBounds(1e3, 1e3))
    assert not rep.pass_ and rep.spectral_abscissa >= 0


def test_zero_controller_verification_against_open_loop(params, weights):
    # the open loop has an integrator at the origin, so no finite norm exists
    plant = build_generalized_plant(params, DesiredImpedance(K_d=0.3 * params.K_s), weights)
    rep = verify(plant, ControllerRealization.zero(), SynthesisBounds(0.058, 43.4))
    assert not rep.pass_
    assert rep.spectral_abscissa == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("name", ["0.3", "0.6", "0.9"])
def test_bundled_cases_verify(bundled_cases, name):
    c = bundled_cases[name]
    ge, gu = REFERENCE_BOUNDS[name]
    rep = verify(c.plant, c.controller, SynthesisBounds(ge, gu))
    assert rep.pass_, rep.summary()
    assert rep.hinf_we_to_etilde <= ge and rep.h2_w_to_utilde <= gu
    assert is_hurwitz(c.closed_loop.system)[0]


def test_case_runtime(params, weights):
    plant = build_generalized_plant(params, DesiredImpedance(K_d=0.9 * params.K_s), weights)
    t0 = time.perf_counter()
    synthesize_mixed(plant, SynthesisBounds(*REFERENCE_BOUNDS["0.9"]))
    assert time.perf_counter() - t0 < 30.0


def test_closed_loop_block_identity(bundled_cases):
    c = bundled_cases["0.3"]
    p, k = c.plant, c.controller
    A = np.block([[p.A, p.Bu @ k.C_k], [k.B_k @ p.Cy, k.A_k]])
    B = np.vstack([p.Bw, k.B_k @ p.Dyw])
    Cz = np.hstack([p.Cz, p.Dzu @ k.C_k])
    Dz = p.Dzw
    sys = c.closed_loop.system
    assert np.allclose(sys.A, A, rtol=0, atol=1e-12 * np.abs(A).max())
    assert np.allclose(sys.B, B, rtol=0, atol=1e-12)
    assert np.allclose(sys.C[:2], Cz, rtol=0, atol=1e-12 * np.abs(Cz).max())
    assert np.array_equal(sys.D[:2], Dz)
    assert np.all(c.closed_loop.channel(["u_w"]).D == 0.0)


@pytest.mark.slow
def test_random_stiffness_values_verify(params, weights):
    rng = np.random.default_rng(7)
    for kd in rng.uniform(0.05, 1.0, 20) * params.K_s:
        plant = build_generalized_plant(params, DesiredImpedance(K_d=kd), weights)
        # generous bounds, far above the levels the reference cases reach
        bounds = SynthesisBounds(0.5, 50.0)
        k = synthesize_mixed(plant, bounds)
        assert verify(plant, k, bounds).pass_


def test_monotone_in_bounds(params, weights):
    plant = build_generalized_plant(params, DesiredImpedance(K_d=0.6 * params.K_s), weights)
    b = SynthesisBounds(*REFERENCE_BOUNDS["0.6"])
    k = synthesize_mixed(plant, b.scaled(1.5))
    assert verify(plant, k, b.scaled(1.5)).pass_


def test_infeasible_probe(params, weights):
    plant = build_generalized_plant(params, DesiredImpedance(K_d=0.3 * params.K_s), weights)
    with pytest.raises(Infeasible):
        synthesize_mixed(plant, SynthesisBounds(1e-9, 43.4))


def test_general_case_high_frequency_floor(bundled_cases):
    c = bundled_cases["general"]
    imp = c.config.impedance
    floor = imp.M_d * 500.0**2  # weighted error at infinite frequency, independent of the controller
    hi = hinf_norm(c.closed_loop.channel(["e_w"]))
    assert hi >= floor * (1 - 1e-6)
    assert verify(c.plant, c.controller, c.config.bounds).pass_
