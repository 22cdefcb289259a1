"""Model families and assumption validators."""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from almsim import model as mdl


# ---------------------------------------------------------------------------
# psi


def test_psi_at_zero_vanishes():
    for K, kappa in [(1.0, 1.0), (3.0, 0.5), (0.2, 7.0)]:
        assert mdl.psi_eval(0.0, mdl.PsiParams(K=K, kappa=kappa)) == 0.0


def test_psi_saturates_at_K():
    p = mdl.PsiParams(K=3.0, kappa=1.0)
    assert abs(mdl.psi_eval(1e4, p) - 3.0) < 1e-12
    a = np.linspace(0.0, 50.0, 500)
    vals = mdl.psi_eval(a, p)
    assert np.all(np.diff(vals) > 0)
    assert np.all(vals < 3.0)


def test_psi_closed_form_value():
    # K = 2, kappa = 1, a = 2 -> 2 (1 - e^{-1})
    val = mdl.psi_eval(2.0, mdl.PsiParams(K=2.0, kappa=1.0))
    assert abs(val - 2.0 * (1.0 - math.exp(-1.0))) < 1e-14


def test_psi_rejects_negative_age():
    with pytest.raises(ValueError):
        mdl.psi_eval(-0.1, mdl.PsiParams())


def test_psi_prime_identity_on_random_pairs(rng):
    # |psi'(a) - psi'(a*)| = (kappa / K) |psi(a) - psi(a*)| exactly
    p = mdl.PsiParams(K=1.7, kappa=0.9)
    a1 = rng.exponential(2.0, 1000)
    a2 = rng.exponential(2.0, 1000)
    lhs = np.abs(mdl.psi_prime(a1, p) - mdl.psi_prime(a2, p))
    rhs = (p.kappa / p.K) * np.abs(mdl.psi_eval(a1, p) - mdl.psi_eval(a2, p))
    assert np.max(np.abs(lhs - rhs)) < 1e-10


# ---------------------------------------------------------------------------
# intensity


def test_constant_intensity_is_constant():
    f = mdl.IntensitySpec(family="constant", f_min=0.8, f_max=0.8)
    p = mdl.PsiParams()
    vals = mdl.intensity_eval(f, p, np.linspace(0, 9, 7),
                              np.linspace(-2, 2, 7)[:, None], 1.3)
    assert np.all(vals == 0.8)


def test_sigmoid_affine_midpoint():
    f = mdl.IntensitySpec(family="sigmoid-affine", f_min=0.2, f_max=1.0,
                          c_a=0.0, c_x=0.0, c_m=(0.0,), b=0.0)
    val = mdl.intensity_eval(f, mdl.PsiParams(), 1.0, np.array([0.3]), -2.0)
    assert abs(val - 0.6) < 1e-14


def test_sigmoid_affine_frozen_value():
    # f_min 0.1, span 1.0, x = ln 3 -> 0.1 + 1.0 * 3/4 = 0.85
    f = mdl.IntensitySpec(family="sigmoid-affine", f_min=0.1, f_max=1.1,
                          c_a=0.0, c_x=1.0, c_m=(0.0,), b=0.0)
    val = mdl.intensity_eval(f, mdl.PsiParams(), 0.0, np.array([0.0]),
                             math.log(3.0))
    assert abs(val - 0.85) < 1e-12


@pytest.mark.parametrize("family", ["sigmoid-affine", "exp-saturating",
                                    "stp-composite"])
def test_intensity_bounds_hold_everywhere(family, rng):
    f = mdl.IntensitySpec(family=family, f_min=0.15, f_max=2.5,
                          c_a=1.2, c_x=-0.8, c_m=(2.0,), b=0.4)
    p = mdl.PsiParams(K=1.0, kappa=2.0)
    n = 100_000
    a = rng.exponential(3.0, n)
    m = rng.normal(0.0, 5.0, (n, 1))
    x = rng.normal(0.0, 5.0, n)
    vals = mdl.intensity_eval(f, p, a, m, x)
    assert np.all(vals >= 0.15 - 1e-12)
    assert np.all(vals <= 2.5 + 1e-12)


def test_intensity_spec_rejects_bad_bounds():
    with pytest.raises(mdl.ConfigurationError):
        mdl.IntensitySpec(family="sigmoid-affine", f_min=0.0, f_max=1.0)
    with pytest.raises(mdl.ConfigurationError):
        mdl.IntensitySpec(family="constant", f_min=0.5, f_max=1.0)


# ---------------------------------------------------------------------------
# interaction


def test_kernel_values():
    h = mdl.InteractionSpec(kernel="exponential", tau=2.0, J=1.0)
    assert abs(mdl.kernel_eval(h, 2.0) - math.exp(-1.0)) < 1e-14
    assert mdl.kernel_eval(h, -0.5) == 0.0
    he = mdl.InteractionSpec(kernel="erlang", tau=1.0, J=1.0)
    assert abs(mdl.kernel_eval(he, 1.0) - math.exp(-1.0)) < 1e-14
    assert mdl.kernel_eval(he, 0.0) == 0.0
    hb = mdl.InteractionSpec(kernel="finite-support-smooth", tau=1.5, J=1.0)
    assert mdl.kernel_eval(hb, 1.5) == 0.0
    assert mdl.kernel_eval(hb, 0.0) == pytest.approx(1.0)


def test_modulation_linear_in_m():
    h = mdl.InteractionSpec(kernel="exponential", tau=1.0, J=2.0,
                            modulation="linear-in-m",
                            mod_intercept=1.0, mod_slope=-1.0)
    val = mdl.interaction_eval(h, 0.0, 0.0, np.array([0.25]))
    assert abs(val - 2.0 * 0.75) < 1e-14


def test_kernel_horizon_bounds_tail():
    for kernel in ("exponential", "erlang", "finite-support-smooth"):
        h = mdl.InteractionSpec(kernel=kernel, tau=0.7, J=1.3)
        hor = mdl.kernel_horizon(h, atol=1e-12)
        t = hor + np.linspace(0.0, 10.0, 50)
        assert np.all(np.abs(h.J * mdl.kernel_eval(h, t)) <= 1e-12)


# ---------------------------------------------------------------------------
# jumps


def test_translation_jump_values():
    j = mdl.JumpSpec(family="translation", alpha_vec=(0.0,))
    m = np.array([0.7])
    assert np.allclose(mdl.jump_apply(j, m), m)
    j2 = mdl.JumpSpec(family="translation", alpha_vec=(-0.3,))
    assert np.allclose(mdl.jump_apply(j2, np.array([0.5])), [0.2])
    assert np.allclose(mdl.jump_inverse(j2, np.array([0.2])), [0.5])
    assert mdl.jump_inverse_jacobian_logdet(j2, np.array([[0.4]]))[0] == 0.0


def test_affine_contraction_frozen_values():
    # gamma(m') = alpha + (1 - alpha) m' with the default offset
    j = mdl.JumpSpec(family="affine-contraction", alpha=0.25)
    assert abs(float(mdl.jump_apply(j, np.array([0.4]))[0]) - 0.55) < 1e-14
    assert np.allclose(mdl.jump_inverse(j, np.array([0.55])), [0.4])
    j2 = mdl.JumpSpec(family="affine-contraction", alpha=0.5)
    logdet = float(mdl.jump_inverse_jacobian_logdet(j2, np.zeros((1, 1)))[0])
    assert abs(logdet - math.log(2.0)) < 1e-12


def test_jump_roundtrip_on_random_points(rng):
    m = rng.normal(0.0, 2.0, (100, 2))
    for j in [mdl.JumpSpec(family="translation", alpha_vec=(-0.4, 0.2)),
              mdl.JumpSpec(family="affine-contraction", alpha=0.3,
                           offset=(0.1, -0.2))]:
        back = mdl.jump_inverse(j, mdl.jump_apply(j, m))
        assert np.max(np.abs(back - m)) < 1e-12


def test_custom_jump_fd_jacobian_matches_analytic():
    # gamma(m) = m - 0.5 tanh(m): strictly increasing in 1-d
    fn = lambda m: m - 0.5 * np.tanh(m)

    def fn_inv(m):
        out = np.asarray(m, dtype=float).copy()
        for _ in range(80):
            out = out - (fn(out) - m) / (1.0 - 0.5 / np.cosh(out) ** 2)
        return out

    j = mdl.JumpSpec(family="custom", fn=fn, fn_inv=fn_inv)
    pts = np.linspace(-1.5, 1.5, 9)[:, None]
    fd = mdl.jump_inverse_jacobian_logdet(j, pts)
    inv = mdl.jump_inverse(j, pts)
    analytic = -np.log(1.0 - 0.5 / np.cosh(inv[:, 0]) ** 2)
    assert np.max(np.abs(fd - analytic)) < 1e-6


@given(alpha=st.floats(0.01, 0.99), m=st.floats(-5.0, 5.0))
@settings(max_examples=200, deadline=None)
def test_affine_contraction_is_strict_contraction(alpha, m):
    j = mdl.JumpSpec(family="affine-contraction", alpha=alpha)
    a = mdl.jump_apply(j, np.array([m]))
    b = mdl.jump_apply(j, np.array([m + 1.0]))
    assert abs(float(b[0] - a[0])) <= (1.0 - alpha) + 1e-12


# ---------------------------------------------------------------------------
# initial law and baseline


def test_initial_law_densities_normalize():
    law = mdl.InitialLaw(age=("exponential", 2.0),
                         mem=(("truncnorm", 0.3, 0.15, 0.0, 1.0),))
    a = np.linspace(0.0, 40.0, 20001)
    assert abs(np.trapezoid(law.density_age(a), a) - 1.0) < 5e-6
    m = np.linspace(0.0, 1.0, 2001)[:, None]
    assert abs(np.trapezoid(law.density_mem(m), m[:, 0]) - 1.0) < 1e-6


def test_initial_law_sampling_matches_density(rng):
    law = mdl.InitialLaw(age=("uniform", 0.5, 2.5),
                         mem=(("uniform", -1.0, 0.0),))
    ages, mems = law.sample(rng, 50_000)
    assert ages.min() >= 0.5 and ages.max() <= 2.5
    assert abs(ages.mean() - 1.5) < 0.02
    assert abs(mems.mean() + 0.5) < 0.02


def test_baseline_families():
    assert float(mdl.ModelSpec().Hbar(3.0)) == 0.0
    spec = mdl.ModelSpec(H=mdl.BaselineSpec(family="constant-random",
                                            mean=0.4, std=0.1))
    assert float(spec.Hbar(2.0)) == pytest.approx(0.4)
    spec2 = mdl.ModelSpec(H=mdl.BaselineSpec(family="exp-decay-from-M0"))
    m0 = float(spec2.init_law.mem_mean()[0])
    assert float(spec2.Hbar(1.0)) == pytest.approx(m0 * math.exp(-1.0))


# ---------------------------------------------------------------------------
# ModelSpec serialization


def test_spec_json_roundtrip(interacting_spec):
    text = interacting_spec.to_json()
    back = mdl.ModelSpec.from_json(text)
    assert back == interacting_spec
    assert back.spec_hash() == interacting_spec.spec_hash()


def test_spec_dimension_validation():
    with pytest.raises(mdl.ConfigurationError):
        mdl.ModelSpec(d=2, Lambda=(1.0,))
    with pytest.raises(mdl.ConfigurationError):
        mdl.ModelSpec(d=1, Lambda=(-1.0,))


# ---------------------------------------------------------------------------
# assumption validation


def test_validate_constant_model_all_pass(constant_rate_spec):
    rep = mdl.validate_assumptions(constant_rate_spec, n_samples=2000, seed=3)
    assert rep.all_pass
    assert rep.lip_f == 0.0
    assert rep.lip_h == 0.0
    assert rep.omega == pytest.approx(1.0)


def test_validate_affine_contraction_ratio():
    spec = mdl.ModelSpec(
        jump=mdl.JumpSpec(family="affine-contraction", alpha=0.2),
        init_law=mdl.InitialLaw(age=("exponential", 1.0),
                                mem=(("uniform", 0.0, 1.0),)),
    )
    rep = mdl.validate_assumptions(spec, n_samples=5000, seed=1)
    assert rep.passes["gamma_1_lipschitz"]
    assert rep.lip_gamma == pytest.approx(0.8, abs=1e-9)


def test_validate_expanding_jump_fails():
    spec = mdl.ModelSpec(jump=mdl.JumpSpec(family="custom",
                                           fn=lambda m: 2.0 * m,
                                           fn_inv=lambda m: 0.5 * m))
    rep = mdl.validate_assumptions(spec, n_samples=5000, seed=1)
    assert not rep.passes["gamma_1_lipschitz"]
    assert rep.lip_gamma == pytest.approx(2.0, abs=1e-9)


def test_validate_translation_ratio_is_one(interacting_spec):
    rep = mdl.validate_assumptions(interacting_spec, n_samples=5000, seed=2)
    assert rep.lip_gamma == pytest.approx(1.0, abs=1e-12)
    assert rep.all_pass
    # report serializes
    assert "passes" in rep.to_dict()
