import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dampqfi.dynamics import (
    analytic_matrix,
    evolve_analytic,
    evolve_ode,
    evolve_ode_many,
    lindblad_rhs,
    pure_state_approx,
    pure_state_gamma_derivative,
    rho_element_analytic,
)
from dampqfi.errors import PreconditionError
from dampqfi.fock import (
    SystemConfig,
    annihilation_matrix,
    coherent_state,
    control_hamiltonian,
    number_matrix,
)


def _mp_element(p, q, tau, alpha, u1, u2):
    """Closed-form element evaluated in 40-digit arithmetic."""
    mp.mp.dps = 40
    alpha = mp.mpc(alpha)
    k = p - q
    delta = 1 + 2j * mp.mpf(u2) * k
    nbar = abs(alpha) ** 2
    lam = alpha**p * mp.conj(alpha) ** q / mp.sqrt(mp.factorial(p) * mp.factorial(q))
    expo = (-delta * tau * (p + q) / 2 - 1j * mp.mpf(u1) * tau * k
            - nbar * (1 - (1 - mp.exp(-delta * tau)) / delta))
    return complex(lam * mp.exp(expo))


@pytest.mark.parametrize("p,q,tau", [(0, 0, 0.0), (3, 1, 0.7), (1, 4, 2.0), (7, 7, 3.5), (12, 2, 1.0)])
def test_element_matches_high_precision(p, q, tau):
    cfg = SystemConfig(alpha=1.1 + 0.3j, u1=0.2, u2=0.15, dim=20)
    got = rho_element_analytic(p, q, tau, cfg)
    want = _mp_element(p, q, tau, cfg.alpha, cfg.u1, cfg.u2)
    assert abs(got - want) <= 1e-14 * max(1.0, abs(want))
    assert analytic_matrix(cfg, tau)[p, q] == pytest.approx(want, rel=1e-12, abs=1e-16)


def test_uncontrolled_state_stays_coherent():
    # with no controls a damped coherent state remains coherent with alpha e^{-tau/2}
    alpha, tau = 1.3 - 0.5j, 1.7
    cfg = SystemConfig(alpha=alpha, dim=25)
    psi = coherent_state(alpha * math.exp(-tau / 2), 25)
    assert np.allclose(analytic_matrix(cfg, tau), psi.projector(), atol=1e-14)


def test_vacuum_is_stationary():
    cfg = SystemConfig(alpha=0.0, u1=0.3, u2=0.3, dim=6)
    rho = evolve_analytic(cfg, 2.0).rho
    assert rho[0, 0] == 1.0 and np.count_nonzero(rho) == 1


def test_analytic_solves_master_equation(unit_config):
    # d rho / d tau by finite differences against the Lindblad right-hand side
    cfg = unit_config
    a, n, h = annihilation_matrix(cfg.dim), number_matrix(cfg.dim), control_hamiltonian(cfg)
    tau, eps = 1.3, 1e-5
    deriv = (analytic_matrix(cfg, tau + eps) - analytic_matrix(cfg, tau - eps)) / (2 * eps)
    rhs = lindblad_rhs(analytic_matrix(cfg, tau), h, a, n)
    # the last rows/columns feel the truncation; compare the interior
    assert np.max(np.abs(deriv - rhs)[:-3, :-3]) < 1e-9


def test_state_properties(unit_config):
    res = evolve_analytic(unit_config, 1.0)
    rho = res.rho
    assert np.array_equal(rho, rho.conj().T)
    assert res.trace_drift < 1e-12
    assert np.linalg.eigvalsh(rho)[0] > -1e-12
    mean_n = float(np.real(np.diag(rho)) @ np.arange(unit_config.dim))
    assert mean_n == pytest.approx(math.exp(-1.0), rel=1e-10)


def test_renormalize_option():
    cfg = SystemConfig(alpha=1.0, dim=5)
    raw = evolve_analytic(cfg, 0.2)
    fixed = evolve_analytic(cfg, 0.2, renormalize=True)
    assert raw.state.trace < 1 - 1e-4
    assert fixed.state.trace == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("u", [0.0, 0.3])
def test_ode_agrees_with_closed_form(u):
    cfg = SystemConfig(alpha=0.8, u1=u, u2=u, dim=16)
    results = evolve_ode_many(cfg, [0.0, 1.5, 0.5], dt=5e-4)
    assert [r.tau for r in results] == [0.0, 0.5, 1.5]
    for r in results:
        assert np.max(np.abs(r.rho - analytic_matrix(cfg, r.tau))) < 1e-9


def test_ode_dt_guard():
    with pytest.raises(PreconditionError):
        evolve_ode(SystemConfig(dim=4), 1.0, dt=0.01)


def test_pure_state_approx_shape():
    cfg = SystemConfig(alpha=1.0, u1=0.05, u2=0.05)
    st0 = pure_state_approx(0.0, cfg)
    assert st0.vector.dim == 2
    assert st0.prefactor == pytest.approx(math.exp(-0.5))
    assert np.allclose(st0.vector.amplitudes, [math.exp(-0.5)] * 2)
    assert pure_state_approx(2.0, cfg, normalized=True).vector.norm2 == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0.05, 4.0), u1=st.floats(0, 0.9), u2=st.floats(0, 0.9), re=st.floats(0.1, 1.5))
def test_pure_state_gamma_derivative_finite_difference(t, u1, u2, re):
    cfg = SystemConfig(alpha=re, gamma=1.3, u1=u1, u2=u2)
    h = 1e-6
    up = pure_state_approx((cfg.gamma + h) * t, cfg).vector.amplitudes
    dn = pure_state_approx((cfg.gamma - h) * t, cfg).vector.amplitudes
    fd = (up - dn) / (2 * h)
    got = pure_state_gamma_derivative(t, cfg).amplitudes
    assert np.allclose(got, fd, atol=1e-7, rtol=1e-6)
