"""Shared fixtures: small model specs reused across the test modules."""

import numpy as np
import pytest

from almsim import model as mdl


@pytest.fixture(scope="session")
def constant_rate_spec():
    """Constant intensity, no interaction: a renewal process in disguise."""
    return mdl.ModelSpec(
        d=1,
        Lambda=(1.0,),
        psi=mdl.PsiParams(K=1.0, kappa=1.0),
        f=mdl.IntensitySpec(family="constant", f_min=1.0, f_max=1.0),
        h=mdl.InteractionSpec(kernel="exponential", tau=0.5, J=0.0,
                              modulation="none"),
        jump=mdl.JumpSpec(family="translation", alpha_vec=(-0.3,)),
        init_law=mdl.InitialLaw(age=("exponential", 1.0),
                                mem=(("uniform", -1.0, 0.0),)),
        H=mdl.BaselineSpec(family="zero"),
    )


@pytest.fixture(scope="session")
def interacting_spec():
    """d = 1 with exponential interaction, suitable for most cross-checks."""
    return mdl.ModelSpec(
        d=1,
        Lambda=(1.0,),
        psi=mdl.PsiParams(K=1.0, kappa=1.0),
        f=mdl.IntensitySpec(family="sigmoid-affine", f_min=0.3, f_max=1.5,
                            c_a=0.0, c_x=1.0, c_m=(0.5,), b=0.0),
        h=mdl.InteractionSpec(kernel="exponential", tau=0.5, J=0.7,
                              modulation="none"),
        jump=mdl.JumpSpec(family="translation", alpha_vec=(-0.5,)),
        init_law=mdl.InitialLaw(age=("exponential", 1.0),
                                mem=(("uniform", -1.0, 0.0),)),
        H=mdl.BaselineSpec(family="zero"),
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(np.random.SeedSequence(20260823))


# one human-readable verdict line per acceptance criterion, printed after the
# usual pytest summary so it survives output capture
_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    def record(num, ok, detail):
        _ACCEPTANCE_LINES.append(
            (num, f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}"))
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
