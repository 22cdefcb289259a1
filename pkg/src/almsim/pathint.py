"""Path-integral representation of the limit density.

The density at time t is a sum over jump counts k of pushforwards of the
jump-time densities nu^k through explicit diffeomorphisms: the k-jump memory
flow theta^k (decay segments interleaved with the jump mapping) and the
coordinate map phi^k sending (jump times, initial memory) to (leading jump
times, age, memory).  Serves as an independent oracle for the grid solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.stats import poisson

from . import model as mdl


def _check_times(times, t):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1:
        raise ValueError("jump times must be a 1-d sequence")
    if times.size and (np.any(np.diff(times) <= 0) or times[0] <= 0 or times[-1] > t):
        raise ValueError("jump times must satisfy 0 < t1 < ... < tk <= t")
    return times


@dataclass
class PathIntegralConfig:
    K_max: int = 6
    gl_orders: dict = field(default_factory=lambda: {1: 24, 2: 12, 3: 8})
    mc_samples: int = 2000
    tail_epsilon: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.K_max < 0 or not (0.0 < self.tail_epsilon < 1.0):
            raise ValueError("need K_max >= 0 and tail_epsilon in (0, 1)")


# ---------------------------------------------------------------------------
# flow maps


def theta_k(times, t, spec: mdl.ModelSpec, m0):
    """Memory at time t given jumps at `times`, starting from m0 at time 0."""
    times = _check_times(times, t)
    lam = spec.lam
    m = np.atleast_1d(np.asarray(m0, dtype=float))
    prev = 0.0
    for tk in times:
        m = m * np.exp(-lam * (tk - prev))
        m = mdl.jump_apply(spec.jump, m)
        prev = tk
    return m * np.exp(-lam * (t - prev))


def theta_k_recursive(times, t, spec: mdl.ModelSpec, m0):
    """Same map via the recurrence theta^k_t = decay(t - t_k) o gamma o theta^{k-1}_{t_k}."""
    times = _check_times(times, t)
    lam = spec.lam
    if times.size == 0:
        return np.atleast_1d(np.asarray(m0, dtype=float)) * np.exp(-lam * t)
    inner = theta_k_recursive(times[:-1], times[-1], spec, m0)
    return mdl.jump_apply(spec.jump, inner) * np.exp(-lam * (t - times[-1]))


def phi_k_apply(times, m0, t, spec: mdl.ModelSpec):
    """(t1..tk, m0) -> (t1..t_{k-1}, a = t - tk, m = theta^k(m0)); k = 0 maps (a0, m0)."""
    times = _check_times(times, t)
    m = theta_k(times, t, spec, m0)
    if times.size == 0:
        raise ValueError("k = 0 has no jump coordinates; use phi_0_apply")
    return times[:-1], t - times[-1], m


def phi_0_apply(a0, m0, t, spec: mdl.ModelSpec):
    lam = spec.lam
    return a0 + t, np.atleast_1d(np.asarray(m0, dtype=float)) * np.exp(-lam * t)


def phi_0_inverse(a, m, t, spec: mdl.ModelSpec):
    if a < t:
        raise ValueError("no zero-jump preimage with age below t")
    lam = spec.lam
    return a - t, np.atleast_1d(np.asarray(m, dtype=float)) * np.exp(lam * t)


def _invert_chain(times, m, t, spec: mdl.ModelSpec):
    """Returns (m0, post_jump_points) walking the flow backwards from (t, m)."""
    lam = spec.lam
    cur = np.atleast_1d(np.asarray(m, dtype=float))
    t_hi = t
    posts = []
    for tk in times[::-1]:
        cur = cur * np.exp(lam * (t_hi - tk))
        posts.append(cur)
        cur = mdl.jump_inverse(spec.jump, cur)
        t_hi = tk
    m0 = cur * np.exp(lam * t_hi)
    return m0, posts


def phi_k_inverse(lead_times, a, m, t, spec: mdl.ModelSpec):
    """Recovers (t1..tk, m0) from (t1..t_{k-1}, a, m); tk = t - a."""
    lead_times = np.asarray(lead_times, dtype=float)
    tk = t - a
    if tk <= 0 or (lead_times.size and tk <= lead_times[-1]):
        raise ValueError("image point has no k-jump preimage")
    times = np.concatenate([lead_times, [tk]])
    _check_times(times, t)
    m0, _ = _invert_chain(times, m, t, spec)
    return times, m0


def phi_k_inverse_logdet(lead_times, a, m, t, spec: mdl.ModelSpec):
    """log |det D(phi^k_t)^{-1}| at the image point (t1..t_{k-1}, a, m).

    The Jacobian is block triangular in (times, memory); the time block has
    unit absolute determinant, leaving exp(t TrLambda) times the product of
    jump-inverse determinants along the backward chain.
    """
    lead_times = np.asarray(lead_times, dtype=float)
    lam = spec.lam
    base = t * float(np.sum(lam))
    if lead_times.size == 0 and a >= t:
        return base
    tk = t - a
    times = np.concatenate([lead_times, [tk]])
    _check_times(times, t)
    j = spec.jump
    if j.family == "translation":
        return base
    if j.family == "affine-contraction":
        return base - times.size * spec.d * math.log(1.0 - j.alpha)
    _, posts = _invert_chain(times, m, t, spec)
    extra = sum(float(mdl.jump_inverse_jacobian_logdet(j, p)) for p in posts)
    return base + extra


# ---------------------------------------------------------------------------
# jump-time densities


def _survival_integral(spec, x, t_a, t_b, age_at_a, mem_at_a):
    """int_{t_a}^{t_b} f along the drift flow started at (age_at_a, mem_at_a)."""
    lam = spec.lam
    mem = np.atleast_1d(np.asarray(mem_at_a, dtype=float))

    def ig(s):
        rel = s - t_a
        return float(spec.intensity(age_at_a + rel, mem * np.exp(-lam * rel),
                                    float(x(s))))

    val, _ = quad(ig, t_a, t_b, epsabs=1e-13, epsrel=1e-9, limit=200)
    return val


def _eta_chain(times, a0, m0, x, spec):
    """Product of inter-jump survival and rate factors; returns the running
    density together with the post-last-jump memory and last jump time."""
    lam = spec.lam
    eta = 1.0
    t_prev = 0.0
    age = float(a0)
    mem = np.atleast_1d(np.asarray(m0, dtype=float)).copy()
    for tk in times:
        I = _survival_integral(spec, x, t_prev, tk, age, mem)
        rel = tk - t_prev
        age_k = age + rel
        mem_k = mem * np.exp(-lam * rel)
        eta *= math.exp(-I) * float(spec.intensity(age_k, mem_k, float(x(tk))))
        mem = mdl.jump_apply(spec.jump, mem_k)
        age = 0.0
        t_prev = tk
    return eta, mem, t_prev


def eta_k(times, a0, m0, x, spec: mdl.ModelSpec):
    """Joint density of the first k jump times at the given instants."""
    times = np.asarray(times, dtype=float)
    if times.size and (np.any(np.diff(times) <= 0) or times[0] <= 0):
        raise ValueError("jump times must be strictly increasing and positive")
    return _eta_chain(times, a0, m0, x, spec)[0]


def nu_k(t, times, a0, m0, x, spec: mdl.ModelSpec):
    """eta^k times the no-further-jump survival on (t_k, t]."""
    times = np.asarray(times, dtype=float)
    if times.size and times[-1] > t:
        raise ValueError("need t >= t_k")
    eta, mem, t_prev = _eta_chain(times, a0, m0, x, spec)
    I = _survival_integral(spec, x, t_prev, t, 0.0 if times.size else float(a0),
                           mem)
    return eta * math.exp(-I)


def jump_count_tail(T, f_max, epsilon):
    """Smallest l with P(Poisson(f_max*T) > l) < epsilon / 2."""
    if not (0.0 < epsilon <= 1.0):
        raise ValueError("epsilon must lie in (0, 1]")
    mu = f_max * T
    l = 0
    while poisson.sf(l, mu) >= epsilon / 2.0:
        l += 1
    return l


# ---------------------------------------------------------------------------
# simplex quadrature helpers


def _simplex_nodes(dims, t_hi, cfg: PathIntegralConfig, rng):
    """Nodes and weights integrating over 0 < t1 < ... < t_dims < t_hi."""
    if dims == 0:
        return np.zeros((1, 0)), np.ones(1)
    if dims <= max(cfg.gl_orders):
        order = cfg.gl_orders.get(dims, 8)
        v, w = leggauss(order)
        v = 0.5 * (v + 1.0)
        w = 0.5 * w
        grids = np.meshgrid(*([v] * dims), indexing="ij")
        wg = np.meshgrid(*([w] * dims), indexing="ij")
        V = np.stack([g.ravel() for g in grids], axis=1)      # (S, dims)
        W = np.prod(np.stack([g.ravel() for g in wg], axis=1), axis=1)
        # map v -> ordered times t_j = t_hi * prod_{i>=j} v_i
        times = np.empty_like(V)
        acc = np.full(V.shape[0], t_hi)
        jacw = np.ones(V.shape[0])
        for j in range(dims - 1, -1, -1):
            acc = acc * V[:, j]
            times[:, j] = acc
            jacw = jacw * V[:, j] ** j
        weights = W * (t_hi ** dims) * jacw
        return times, weights
    n = cfg.mc_samples
    times = np.sort(rng.random((n, dims)) * t_hi, axis=1)
    vol = t_hi ** dims / math.factorial(dims)
    return times, np.full(n, vol / n)


# ---------------------------------------------------------------------------
# pointwise density


def density_at(t, a, m, u0: mdl.InitialLaw, x, cfg: PathIntegralConfig,
               spec: mdl.ModelSpec):
    """Density value at (t, a, m) summed over jump counts up to K_max.

    Returns (value, truncation_bound) with the bound the Poisson(f_max*t)
    tail beyond K_max.
    """
    lam = spec.lam
    trl = float(np.sum(lam))
    m = np.atleast_1d(np.asarray(m, dtype=float))
    trunc = float(poisson.sf(cfg.K_max, spec.f_max * t))
    if a >= t:
        a0 = a - t
        m0 = m * np.exp(lam * t)
        base = u0.density(a0, m0)
        if base <= 0.0:
            return 0.0, trunc
        I = _survival_integral_back(spec, x, t, a, m)
        return float(base * math.exp(t * trl - I)), trunc

    tk = t - a
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    cut = u0.age_cutoff(1e-12)
    gl_a, gl_w = leggauss(32)
    a0_nodes = 0.5 * (gl_a + 1.0) * cut
    a0_w = 0.5 * gl_w * cut
    total = 0.0
    for k in range(1, cfg.K_max + 1):
        nodes, weights = _simplex_nodes(k - 1, tk, cfg, rng)
        acc = 0.0
        for lead, wgt in zip(nodes, weights):
            times = np.concatenate([lead, [tk]])
            m0, posts = _invert_chain(times, m, t, spec)
            dens_m = float(u0.density_mem(m0))
            if dens_m <= 0.0:
                continue
            # factors independent of the initial age
            rest = 1.0
            mem = mdl.jump_apply(spec.jump, m0 * np.exp(-lam * times[0]))
            t_prev = times[0]
            for tj in times[1:]:
                I = _survival_integral(spec, x, t_prev, tj, 0.0, mem)
                rel = tj - t_prev
                rest *= math.exp(-I) * float(
                    spec.intensity(rel, mem * np.exp(-lam * rel), float(x(tj))))
                mem = mdl.jump_apply(spec.jump, mem * np.exp(-lam * rel))
                t_prev = tj
            rest *= math.exp(-_survival_integral(spec, x, t_prev, t, 0.0, mem))
            # initial-age integral over the first survival-and-rate factor
            first = 0.0
            for a0v, wv in zip(a0_nodes, a0_w):
                da = u0.density_age(a0v)
                if da <= 0.0:
                    continue
                I1 = _survival_integral(spec, x, 0.0, times[0], a0v, m0)
                first += wv * float(da) * math.exp(-I1) * float(
                    spec.intensity(a0v + times[0], m0 * np.exp(-lam * times[0]),
                                   float(x(times[0]))))
            logdet = t * trl
            if spec.jump.family == "affine-contraction":
                logdet += -k * spec.d * math.log(1.0 - spec.jump.alpha)
            elif spec.jump.family == "custom":
                logdet += sum(float(mdl.jump_inverse_jacobian_logdet(spec.jump, p))
                              for p in posts)
            acc += wgt * dens_m * first * rest * math.exp(logdet)
        total += acc
    return float(total), trunc


def _survival_integral_back(spec, x, t, a, m):
    """int_0^t f along the zero-jump characteristic ending at (a, m) at time t."""
    lam = spec.lam

    def ig(s):
        return float(spec.intensity(a - t + s, m * np.exp(lam * (t - s)),
                                    float(x(s))))

    val, _ = quad(ig, 0.0, t, epsabs=1e-13, epsrel=1e-9, limit=200)
    return val


# ---------------------------------------------------------------------------
# vectorized grid evaluation for separable one-dimensional benchmarks


def _mc_budget(k):
    return {5: 1500, 6: 500, 7: 250, 8: 120}.get(k, 100)


def density_on_grid(t, a_nodes, m_nodes, u0: mdl.InitialLaw, x0,
                    cfg: PathIntegralConfig, spec: mdl.ModelSpec):
    """Fast evaluation of the path-integral density on a (a, m) grid.

    Requires d = 1, a translation or affine-contraction jump, a memory- and
    signal-independent intensity (x frozen at the constant x0), and a product
    initial law.  Survival integrals reduce to a tabulated cumulative of f.
    """
    if spec.d != 1:
        raise NotImplementedError("grid fast path implemented for d = 1")
    f = spec.f
    if f.family in ("sigmoid-affine", "exp-saturating") and any(c != 0.0 for c in f.c_m):
        raise mdl.ConfigurationError("grid fast path needs memory-independent f")
    if spec.jump.family not in ("translation", "affine-contraction"):
        raise mdl.ConfigurationError("grid fast path needs an affine jump family")
    lam0 = float(spec.lam[0])
    a_nodes = np.asarray(a_nodes, dtype=float)
    m_nodes = np.asarray(m_nodes, dtype=float)

    def f_age(arr):
        return np.asarray(spec.intensity(np.asarray(arr, dtype=float),
                                         np.zeros(1), x0), dtype=float)

    cut = u0.age_cutoff(1e-12)
    s_max = cut + t + float(a_nodes.max()) + 1.0
    hs = min(2e-3, t / 50.0 if t > 0 else 2e-3)
    sgrid = np.arange(0.0, s_max + hs, hs)
    fvals = f_age(sgrid)
    Fcum = np.concatenate([[0.0], np.cumsum(0.5 * (fvals[1:] + fvals[:-1]) * np.diff(sgrid))])

    def F(v):
        return np.interp(v, sgrid, Fcum)

    def fv(v):
        return np.interp(v, sgrid, fvals)

    # first-segment kernel integrated against the initial age law
    gl_a, gl_w = leggauss(64)
    a0n = 0.5 * (gl_a + 1.0) * cut
    a0w = 0.5 * gl_w * cut
    da0 = np.asarray(u0.density_age(a0n), dtype=float)
    t1g = np.linspace(0.0, t, 600)
    A1tab = np.array([
        float(np.sum(a0w * da0 * fv(a0n + t1) * np.exp(-(F(a0n + t1) - F(a0n)))))
        for t1 in t1g])

    def A1(v):
        return np.interp(v, t1g, A1tab)

    def u0mem(v):
        return np.asarray(u0.density_mem(np.asarray(v)[..., None]), dtype=float)

    j = spec.jump
    if j.family == "translation":
        alpha = j.alpha_vec[0]
        ctr = 1.0
        beta = alpha
    else:
        ctr = 1.0 - j.alpha
        beta = float(j.offset_vec(1)[0])

    def chain_coeffs(times):
        """m0 = p*m + q for each row of jump times (S, k)."""
        S, k = times.shape
        p = math.exp(lam0 * t) / (ctr ** k)
        q = np.zeros(S)
        t_hi = np.full(S, t)
        pq = np.ones(S)
        for col in range(k - 1, -1, -1):
            tc = times[:, col]
            pq = pq * np.exp(lam0 * (t_hi - tc))
            q = q * np.exp(lam0 * (t_hi - tc))
            q = (q - beta) / ctr
            t_hi = tc
        q = q * np.exp(lam0 * t_hi)
        return p, q

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    out = np.zeros((a_nodes.shape[0], m_nodes.shape[0]))

    # zero-jump branch, all rows with a >= t at once
    hi = a_nodes >= t
    if hi.any():
        ah = a_nodes[hi]
        base_a = np.asarray(u0.density_age(ah - t), dtype=float) \
            * np.exp(-(F(ah) - F(ah - t)))
        base_m = u0mem(m_nodes * math.exp(lam0 * t)) * math.exp(lam0 * t)
        out[hi] = base_a[:, None] * base_m[None, :]

    lo_idx = np.nonzero(~hi)[0]
    for ridx in lo_idx:
        a = a_nodes[ridx]
        tk = t - a
        if tk <= 0:
            continue
        row = np.zeros(m_nodes.shape[0])
        surv_last = math.exp(-F(a))
        for k in range(1, cfg.K_max + 1):
            dims = k - 1
            if dims <= max(cfg.gl_orders):
                nodes, weights = _simplex_nodes(dims, tk, cfg, rng)
            else:
                n = _mc_budget(k)
                nodes = np.sort(rng.random((n, dims)) * tk, axis=1)
                weights = np.full(n, (tk ** dims) / math.factorial(dims) / n)
            times = np.concatenate([nodes, np.full((nodes.shape[0], 1), tk)], axis=1)
            amp = A1(times[:, 0])
            if k > 1:
                diffs = np.diff(times, axis=1)
                amp = amp * np.prod(fv(diffs) * np.exp(-F(diffs)), axis=1)
            amp = amp * weights * surv_last
            keep = amp > 0.0
            if not keep.any():
                continue
            p, q = chain_coeffs(times[keep])
            dens = u0mem(p * m_nodes[None, :] + q[keep][:, None])
            row += p * (amp[keep] @ dens)
        out[ridx] = row
    return out
