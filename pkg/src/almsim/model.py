"""Parametric model ingredients for age / leaky-memory point-process networks.

A network is specified by an intensity function f(a, m, x), an interaction
function h(t, a, m), a memory jump mapping gamma(m) = m + Gamma(m), a diagonal
decay matrix Lambda, a saturating age transform psi, an initial law for
(A_0, M_0) and a family of baseline signals H_t.  Everything is collected in
an immutable ModelSpec shared by the simulators and the PDE solvers.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import truncnorm

SCHEMA_VERSION = 1


class ConfigurationError(ValueError):
    """Raised when a spec is internally inconsistent or not supported."""


# ---------------------------------------------------------------------------
# saturating age transform


@dataclass(frozen=True)
class PsiParams:
    """Parameters of the bounded age transform K*(1 - exp(-a*kappa/K))."""

    K: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.K <= 0 or self.kappa <= 0:
            raise ConfigurationError("PsiParams requires K > 0 and kappa > 0")


def psi_eval(a, p: PsiParams):
    """Evaluate the saturating age transform; strictly increasing, < K."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("age must be nonnegative")
    return p.K * (-np.expm1(-a * p.kappa / p.K))


def psi_prime(a, p: PsiParams):
    a = np.asarray(a, dtype=float)
    return p.kappa * np.exp(-a * p.kappa / p.K)


# ---------------------------------------------------------------------------
# intensity


@dataclass(frozen=True)
class IntensitySpec:
    """Bounded Lipschitz event rate, always in [f_min, f_max].

    Families:
      constant         -- f_min (requires f_min == f_max)
      sigmoid-affine   -- f_min + (f_max-f_min)*sigmoid(c_a*psi(a) + c_m.m + c_x*x + b)
      exp-saturating   -- f_min + (f_max-f_min)*(1 - exp(-softplus(u))), same u
      stp-composite    -- sigmoid family evaluated at c_x*(x + Psi(a)) + b with
                          Psi(a) = -psi_amp*exp(-psi_rate*a)
    """

    family: str = "constant"
    f_min: float = 1.0
    f_max: float = 1.0
    c_a: float = 0.0
    c_x: float = 0.0
    c_m: tuple = (0.0,)
    b: float = 0.0
    psi_amp: float = 1.0
    psi_rate: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.f_min <= self.f_max < math.inf):
            raise ConfigurationError("need 0 < f_min <= f_max < inf")
        if self.family == "constant" and self.f_min != self.f_max:
            raise ConfigurationError("constant intensity requires f_min == f_max")
        if self.family not in (
            "constant",
            "sigmoid-affine",
            "exp-saturating",
            "stp-composite",
        ):
            raise ConfigurationError(f"unknown intensity family {self.family!r}")


def _sigmoid(u):
    out = np.empty_like(u, dtype=float)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def intensity_eval(spec: IntensitySpec, psi: PsiParams, a, m, x):
    """Evaluate f(a, m, x).  Broadcasts; m has the memory dimension last."""
    a = np.asarray(a, dtype=float)
    m = np.atleast_1d(np.asarray(m, dtype=float))
    x = np.asarray(x, dtype=float)
    if spec.family == "constant":
        shape = np.broadcast_shapes(a.shape, m.shape[:-1], x.shape)
        return np.full(shape, spec.f_min)
    if spec.family == "stp-composite":
        u = spec.c_x * (x + (-spec.psi_amp) * np.exp(-spec.psi_rate * a)) + spec.b
        u = np.asarray(u, dtype=float)
        return spec.f_min + (spec.f_max - spec.f_min) * _sigmoid(u)
    cm = np.asarray(spec.c_m, dtype=float)
    u = spec.c_a * psi_eval(a, psi) + np.tensordot(m, cm, axes=([-1], [0]))
    u = np.asarray(u + spec.c_x * x + spec.b, dtype=float)
    if spec.family == "sigmoid-affine":
        g = _sigmoid(u)
    else:  # exp-saturating
        g = -np.expm1(-np.logaddexp(0.0, u))
    return spec.f_min + (spec.f_max - spec.f_min) * g


# ---------------------------------------------------------------------------
# interaction


@dataclass(frozen=True)
class InteractionSpec:
    """Separable interaction h(t, a, m) = J * kernel(t) * g(a, m).

    Temporal kernels: exponential exp(-t/tau), erlang (t/tau)exp(-t/tau),
    finite-support-smooth (a C^inf bump supported on [0, tau)).
    State modulation g: none (1), linear-in-m (g0 + g1*m[0]), or a bounded
    user callable.
    """

    kernel: str = "exponential"
    tau: float = 1.0
    J: float = 1.0
    modulation: str = "none"
    mod_intercept: float = 1.0
    mod_slope: float = 0.0
    mod_fn: object = None

    def __post_init__(self):
        if self.kernel not in ("exponential", "erlang", "finite-support-smooth"):
            raise ConfigurationError(f"unknown kernel {self.kernel!r}")
        if self.modulation not in ("none", "linear-in-m", "custom-bounded"):
            raise ConfigurationError(f"unknown modulation {self.modulation!r}")
        if self.tau <= 0:
            raise ConfigurationError("kernel scale tau must be positive")
        if self.modulation == "custom-bounded" and self.mod_fn is None:
            raise ConfigurationError("custom-bounded modulation needs mod_fn")


def kernel_eval(spec: InteractionSpec, t):
    t = np.asarray(t, dtype=float)
    s = t / spec.tau
    if spec.kernel == "exponential":
        return np.where(t >= 0, np.exp(-np.minimum(s, 700.0)), 0.0)
    if spec.kernel == "erlang":
        return np.where(t >= 0, s * np.exp(-np.minimum(s, 700.0)), 0.0)
    # smooth bump on [0, tau)
    inside = (t >= 0) & (s < 1.0)
    out = np.zeros_like(s)
    ss = np.clip(s, 0.0, 1.0 - 1e-12)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ss[inside] ** 2))
    return out


def modulation_eval(spec: InteractionSpec, a, m):
    a = np.asarray(a, dtype=float)
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if spec.modulation == "none":
        return np.ones(np.broadcast_shapes(a.shape, m.shape[:-1]))
    if spec.modulation == "linear-in-m":
        return spec.mod_intercept + spec.mod_slope * m[..., 0] + 0.0 * a
    return np.asarray(spec.mod_fn(a, m), dtype=float)


def interaction_eval(spec: InteractionSpec, t, a, m):
    """Full h(t, a, m)."""
    return spec.J * kernel_eval(spec, t) * modulation_eval(spec, a, m)


def kernel_horizon(spec: InteractionSpec, atol=1e-12):
    """Lag beyond which |J*kernel| < atol (event pruning horizon)."""
    if abs(spec.J) <= atol:
        return 0.0
    if spec.kernel == "finite-support-smooth":
        return spec.tau
    # erlang tail is below the exponential's once t/tau > 1
    return spec.tau * (math.log(abs(spec.J) / atol) + 10.0)


# ---------------------------------------------------------------------------
# jump mapping


@dataclass(frozen=True)
class JumpSpec:
    """Memory jump mapping gamma(m) = m + Gamma(m).

    translation        : gamma(m) = m + alpha_vec
    affine-contraction : gamma(m) = offset + (1 - alpha) * m, alpha in (0, 1)
    custom             : user callables fn / fn_inv (fn_inv optional)
    """

    family: str = "translation"
    alpha_vec: tuple = (0.0,)
    alpha: float = 0.5
    offset: tuple = None
    fn: object = None
    fn_inv: object = None

    def __post_init__(self):
        if self.family not in ("translation", "affine-contraction", "custom"):
            raise ConfigurationError(f"unknown jump family {self.family!r}")
        if self.family == "affine-contraction":
            if not (0.0 < self.alpha < 1.0):
                raise ConfigurationError("affine-contraction needs alpha in (0,1)")
            if self.offset is None:
                object.__setattr__(self, "offset", None)
        if self.family == "custom" and self.fn is None:
            raise ConfigurationError("custom jump needs fn")

    def offset_vec(self, d):
        if self.offset is not None:
            return np.asarray(self.offset, dtype=float)
        return np.full(d, self.alpha)


def jump_apply(j: JumpSpec, m):
    """gamma(m); m has the memory dimension last."""
    m = np.atleast_1d(np.asarray(m, dtype=float))
    d = m.shape[-1]
    if j.family == "translation":
        return m + np.asarray(j.alpha_vec, dtype=float)
    if j.family == "affine-contraction":
        return j.offset_vec(d) + (1.0 - j.alpha) * m
    return np.asarray(j.fn(m), dtype=float)


def jump_inverse(j: JumpSpec, m):
    """gamma^{-1}(m); round-trips with jump_apply to ~1e-12."""
    m = np.atleast_1d(np.asarray(m, dtype=float))
    d = m.shape[-1]
    if j.family == "translation":
        return m - np.asarray(j.alpha_vec, dtype=float)
    if j.family == "affine-contraction":
        return (m - j.offset_vec(d)) / (1.0 - j.alpha)
    if j.fn_inv is None:
        raise ConfigurationError("custom jump has no inverse")
    return np.asarray(j.fn_inv(m), dtype=float)


def jump_inverse_jacobian_logdet(j: JumpSpec, m):
    """log |det D gamma^{-1}(m)|; finite differences for custom specs."""
    m = np.atleast_1d(np.asarray(m, dtype=float))
    d = m.shape[-1]
    if j.family == "translation":
        return np.zeros(m.shape[:-1])
    if j.family == "affine-contraction":
        return np.full(m.shape[:-1], -d * math.log(1.0 - j.alpha))
    if j.fn_inv is None:
        raise ConfigurationError("custom jump has no inverse")
    scale = max(1.0, float(np.max(np.abs(m))))
    eps = 1e-6 * scale
    flat = m.reshape(-1, d)
    out = np.empty(flat.shape[0])
    for i, mi in enumerate(flat):
        J = np.empty((d, d))
        for k in range(d):
            e = np.zeros(d)
            e[k] = eps
            J[:, k] = (jump_inverse(j, mi + e) - jump_inverse(j, mi - e)) / (2 * eps)
        out[i] = math.log(abs(np.linalg.det(J)))
    return out.reshape(m.shape[:-1])


# ---------------------------------------------------------------------------
# initial law and baseline family


@dataclass(frozen=True)
class InitialLaw:
    """Product law for (A_0, M_0): a named age law times per-dimension memory laws.

    age: ("exponential", rate) or ("uniform", lo, hi)
    mem: tuple of per-dimension laws, each ("uniform", lo, hi) or
         ("truncnorm", mean, sd, lo, hi)
    """

    age: tuple = ("exponential", 1.0)
    mem: tuple = (("uniform", -1.0, 0.0),)

    @property
    def d(self):
        return len(self.mem)

    def sample(self, rng, n):
        kind = self.age[0]
        if kind == "exponential":
            ages = rng.exponential(1.0 / self.age[1], size=n)
        elif kind == "uniform":
            ages = rng.uniform(self.age[1], self.age[2], size=n)
        else:
            raise ConfigurationError(f"unknown age law {kind!r}")
        cols = []
        for law in self.mem:
            if law[0] == "uniform":
                cols.append(rng.uniform(law[1], law[2], size=n))
            elif law[0] == "truncnorm":
                mean, sd, lo, hi = law[1:]
                a, b = (lo - mean) / sd, (hi - mean) / sd
                cols.append(truncnorm.rvs(a, b, loc=mean, scale=sd, size=n, random_state=rng))
            else:
                raise ConfigurationError(f"unknown memory law {law[0]!r}")
        return ages, np.stack(cols, axis=-1)

    def density_age(self, a):
        a = np.asarray(a, dtype=float)
        kind = self.age[0]
        if kind == "exponential":
            r = self.age[1]
            return np.where(a >= 0, r * np.exp(-r * np.maximum(a, 0.0)), 0.0)
        lo, hi = self.age[1], self.age[2]
        return np.where((a >= lo) & (a <= hi), 1.0 / (hi - lo), 0.0)

    def density_mem(self, m):
        m = np.atleast_1d(np.asarray(m, dtype=float))
        out = np.ones(m.shape[:-1])
        for k, law in enumerate(self.mem):
            mk = m[..., k]
            if law[0] == "uniform":
                lo, hi = law[1], law[2]
                out = out * np.where((mk >= lo) & (mk <= hi), 1.0 / (hi - lo), 0.0)
            else:
                mean, sd, lo, hi = law[1:]
                a, b = (lo - mean) / sd, (hi - mean) / sd
                out = out * truncnorm.pdf(mk, a, b, loc=mean, scale=sd)
        return out

    def density(self, a, m):
        return self.density_age(a) * self.density_mem(m)

    def age_cutoff(self, tol=1e-10):
        """Age beyond which the initial age law carries less than tol mass."""
        if self.age[0] == "exponential":
            return -math.log(tol) / self.age[1]
        return self.age[2]

    def mem_mean(self):
        out = []
        for law in self.mem:
            if law[0] == "uniform":
                out.append(0.5 * (law[1] + law[2]))
            else:
                mean, sd, lo, hi = law[1:]
                a, b = (lo - mean) / sd, (hi - mean) / sd
                out.append(truncnorm.mean(a, b, loc=mean, scale=sd))
        return np.asarray(out)


@dataclass(frozen=True)
class BaselineSpec:
    """Family of i.i.d. baseline signals H_t(i).

    zero              : H_t(i) = 0
    constant-random   : H_t(i) = c_i with c_i ~ N(mean, std^2)
    exp-decay-from-M0 : H_t(i) = M_0(i) * exp(-Lambda t)   (d = 1 only)
    """

    family: str = "zero"
    mean: float = 0.0
    std: float = 0.0

    def __post_init__(self):
        if self.family not in ("zero", "constant-random", "exp-decay-from-M0"):
            raise ConfigurationError(f"unknown baseline family {self.family!r}")


# ---------------------------------------------------------------------------
# full model spec


@dataclass(frozen=True)
class ModelSpec:
    """Complete parametric description of one network model."""

    d: int = 1
    Lambda: tuple = (1.0,)
    psi: PsiParams = field(default_factory=PsiParams)
    f: IntensitySpec = field(default_factory=IntensitySpec)
    h: InteractionSpec = field(default_factory=InteractionSpec)
    jump: JumpSpec = field(default_factory=JumpSpec)
    init_law: InitialLaw = field(default_factory=InitialLaw)
    H: BaselineSpec = field(default_factory=BaselineSpec)

    def __post_init__(self):
        if self.d < 1 or len(self.Lambda) != self.d:
            raise ConfigurationError("Lambda must have length d >= 1")
        if any(l <= 0 for l in self.Lambda):
            raise ConfigurationError("decay rates must be positive")
        if self.init_law.d != self.d:
            raise ConfigurationError("init_law dimension mismatch")
        if self.f.family not in ("constant", "stp-composite") and len(self.f.c_m) != self.d:
            raise ConfigurationError("intensity c_m dimension mismatch")
        if self.H.family == "exp-decay-from-M0" and self.d != 1:
            raise ConfigurationError("exp-decay-from-M0 baseline requires d = 1")

    @property
    def lam(self):
        return np.asarray(self.Lambda, dtype=float)

    @property
    def f_max(self):
        return self.f.f_max

    @property
    def f_min(self):
        return self.f.f_min

    def intensity(self, a, m, x):
        return intensity_eval(self.f, self.psi, a, m, x)

    def interaction(self, t, a, m):
        return interaction_eval(self.h, t, a, m)

    def Hbar(self, t):
        """E[H_t], analytic per family."""
        t = np.asarray(t, dtype=float)
        if self.H.family == "zero":
            return np.zeros_like(t)
        if self.H.family == "constant-random":
            return np.full_like(t, self.H.mean)
        m0 = float(self.init_law.mem_mean()[0])
        return m0 * np.exp(-self.lam[0] * t)

    def sample_H_params(self, rng, n, mems0):
        """Per-neuron baseline parameters; mems0 is the matching M_0 draw."""
        if self.H.family == "zero":
            return np.zeros(n)
        if self.H.family == "constant-random":
            return self.H.mean + self.H.std * rng.standard_normal(n)
        return mems0[:, 0].copy()

    def H_emp_mean(self, params, t):
        """(1/N) sum_j H_t(j) given the per-neuron parameters."""
        if self.H.family == "exp-decay-from-M0":
            return float(np.mean(params)) * math.exp(-self.lam[0] * t)
        return float(np.mean(params))

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        def enc(obj):
            if dataclasses.is_dataclass(obj):
                d = {}
                for f_ in dataclasses.fields(obj):
                    v = getattr(obj, f_.name)
                    if callable(v) and v is not None:
                        raise ConfigurationError("custom callables are not serializable")
                    d[f_.name] = enc(v)
                return d
            if isinstance(obj, tuple):
                return [enc(v) for v in obj]
            return obj

        out = enc(self)
        out["schema_version"] = SCHEMA_VERSION
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def spec_hash(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    @staticmethod
    def from_dict(data):
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported schema_version {version}")

        def tup(x):
            return tuple(tup(v) if isinstance(v, list) else v for v in x)

        return ModelSpec(
            d=data["d"],
            Lambda=tuple(data["Lambda"]),
            psi=PsiParams(**data["psi"]),
            f=IntensitySpec(**{**data["f"], "c_m": tuple(data["f"]["c_m"])}),
            h=InteractionSpec(**data["h"]),
            jump=JumpSpec(
                **{
                    **data["jump"],
                    "alpha_vec": tuple(data["jump"]["alpha_vec"]),
                    "offset": None
                    if data["jump"]["offset"] is None
                    else tuple(data["jump"]["offset"]),
                }
            ),
            init_law=InitialLaw(age=tup(data["init_law"]["age"]), mem=tup(data["init_law"]["mem"])),
            H=BaselineSpec(**data["H"]),
        )

    @staticmethod
    def from_json(text):
        return ModelSpec.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# numerical validation of the standing assumptions


@dataclass
class ValidationReport:
    sup_f: float
    sup_h: float
    sup_gamma_jump: float
    omega: float
    lip_f: float
    lip_h: float
    lip_gamma: float
    inverse_roundtrip: float
    passes: dict

    @property
    def all_pass(self):
        return all(self.passes.values())

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _sample_states(spec: ModelSpec, rng, n):
    a = rng.exponential(2.0 * spec.psi.K / spec.psi.kappa, size=n)
    lo, hi = memory_box(spec)
    m = rng.uniform(lo, hi, size=(n, spec.d))
    x = rng.normal(0.0, 2.0, size=n)
    return a, m, x


def memory_box(spec: ModelSpec):
    """A box that the memory dynamics keep (approximately) invariant."""
    j = spec.jump
    d = spec.d
    if j.family == "affine-contraction":
        off = j.offset_vec(d)
        lo = np.minimum(0.0, off / j.alpha)
        hi = np.maximum(0.0, off / j.alpha)
        pad = 0.05 * (hi - lo + 1.0)
        return lo - pad, hi + pad
    if j.family == "translation":
        av = np.asarray(j.alpha_vec, dtype=float)
        span = 3.0 * (np.abs(av) + 1.0)
        lo = np.minimum(-span, 5.0 * np.minimum(av, 0.0))
        hi = np.maximum(span, 5.0 * np.maximum(av, 0.0))
        return lo, hi
    return np.full(d, -5.0), np.full(d, 5.0)


def validate_assumptions(spec: ModelSpec, n_samples: int = 10_000, seed: int = 0):
    """Sampled check of boundedness, Lipschitz bounds, the 1-Lipschitz jump
    mapping and its invertibility.  Failures land in the report, not in
    exceptions."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    a1, m1, x1 = _sample_states(spec, rng, n_samples)
    a2, m2, x2 = _sample_states(spec, rng, n_samples)

    f1 = spec.intensity(a1, m1, x1)
    f2 = spec.intensity(a2, m2, x2)
    t1 = rng.uniform(0.0, 10.0, n_samples)
    t2 = rng.uniform(0.0, 10.0, n_samples)
    h1 = spec.interaction(t1, a1, m1)
    h2 = spec.interaction(t2, a2, m2)

    p1 = psi_eval(a1, spec.psi)
    p2 = psi_eval(a2, spec.psi)
    dm = np.sum(np.abs(m1 - m2), axis=-1)
    den_f = np.abs(p1 - p2) + dm + np.abs(x1 - x2)
    den_h = np.abs(t1 - t2) + np.abs(p1 - p2) + dm
    with np.errstate(invalid="ignore", divide="ignore"):
        lip_f = float(np.nanmax(np.where(den_f > 1e-12, np.abs(f1 - f2) / den_f, 0.0)))
        lip_h = float(np.nanmax(np.where(den_h > 1e-12, np.abs(h1 - h2) / den_h, 0.0)))
        g1 = jump_apply(spec.jump, m1)
        g2 = jump_apply(spec.jump, m2)
        lip_g = float(
            np.nanmax(np.where(dm > 1e-12, np.sum(np.abs(g1 - g2), axis=-1) / dm, 0.0))
        )

    try:
        rt = float(np.max(np.abs(jump_apply(spec.jump, jump_inverse(spec.jump, m1)) - m1)))
        invertible = rt < 1e-9
    except ConfigurationError:
        rt = math.inf
        invertible = False

    sup_gamma = float(np.max(np.sum(np.abs(g1 - m1), axis=-1)))
    report = ValidationReport(
        sup_f=float(np.max(f1)),
        sup_h=float(np.max(np.abs(h1))),
        sup_gamma_jump=sup_gamma,
        omega=float(np.min(np.concatenate([f1, f2]))),
        lip_f=lip_f,
        lip_h=lip_h,
        lip_gamma=lip_g,
        inverse_roundtrip=rt,
        passes={
            "bounded": bool(
                np.isfinite(sup_gamma)
                and np.max(f1) <= spec.f_max + 1e-12
                and np.isfinite(np.max(np.abs(h1)))
            ),
            "lipschitz_f": math.isfinite(lip_f),
            "lipschitz_h": math.isfinite(lip_h),
            "lower_bound": bool(np.min(f1) >= spec.f_min - 1e-12 and spec.f_min > 0),
            "gamma_1_lipschitz": lip_g <= 1.0 + 1e-9,
            "gamma_diffeomorphism": invertible,
        },
    )
    return report
