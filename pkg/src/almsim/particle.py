"""Event-driven simulation of the finite-N interacting system by thinning.

One global exponential candidate clock runs at rate N*f_max; each candidate
picks a uniform neuron and is accepted with probability f/f_max evaluated at
the pre-candidate state.  Between candidates ages grow linearly and memories
decay by exp(-Lambda*dt), both advanced lazily per neuron.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import model as mdl

EVENT_CAP_DEFAULT = 10_000_000

_validated_cache = {}


def _ensure_assumptions(spec: mdl.ModelSpec):
    try:
        key = spec.spec_hash()
    except mdl.ConfigurationError:
        key = id(spec)
    if key not in _validated_cache:
        report = mdl.validate_assumptions(spec, n_samples=4000, seed=1234)
        _validated_cache[key] = report
    report = _validated_cache[key]
    if not report.all_pass:
        bad = [k for k, v in report.passes.items() if not v]
        raise mdl.ConfigurationError(f"model fails assumption checks: {bad}")


@dataclass
class EventRecord:
    time: float
    neuron: int
    age_before: float
    memory_before: np.ndarray


@dataclass
class ParticleState:
    t: float
    ages: np.ndarray
    memories: np.ndarray
    X: float


@dataclass
class SimulationRecord:
    spec_hash: str
    N: int
    T: float
    seed: int
    events: list
    save_times: np.ndarray
    snapshots: list
    x_path_emp: np.ndarray
    H_params: np.ndarray


class _XTrace:
    """O(1) running evaluation of the shared signal for separable h.

    Exponential and erlang kernels keep decaying sufficient statistics; the
    finite-support kernel falls back to a pruned lazy sum.
    """

    def __init__(self, spec, N, H_params):
        self.spec = spec
        self.N = N
        self.H_params = H_params
        self.kernel = spec.h.kernel
        self.tau = spec.h.tau
        self.J = spec.h.J
        self.t = 0.0
        self.s0 = 0.0
        self.s1 = 0.0
        self.ev_t = []
        self.ev_g = []
        self._horizon = spec.h.tau

    def value(self, t):
        he = self.spec.H_emp_mean(self.H_params, t)
        if self.J == 0.0:
            return he
        dt = t - self.t
        r = math.exp(-dt / self.tau)
        if self.kernel == "exponential":
            return he + self.J * self.s0 * r / self.N
        if self.kernel == "erlang":
            s1 = r * (self.s1 + (dt / self.tau) * self.s0)
            return he + self.J * s1 / self.N
        # finite-support bump: lazy sum over recent events
        acc = 0.0
        for te, g in zip(reversed(self.ev_t), reversed(self.ev_g)):
            lag = t - te
            if lag >= self._horizon:
                break
            acc += g * float(mdl.kernel_eval(self.spec.h, lag))
        return he + self.J * acc / self.N

    def add_event(self, t, g):
        if self.J == 0.0:
            return
        if self.kernel in ("exponential", "erlang"):
            dt = t - self.t
            r = math.exp(-dt / self.tau)
            if self.kernel == "erlang":
                self.s1 = r * (self.s1 + (dt / self.tau) * self.s0)
            self.s0 = r * self.s0 + g
            self.t = t
        else:
            self.ev_t.append(t)
            self.ev_g.append(g)


def _scalar_modulation(spec):
    h = spec.h
    if h.modulation == "none":
        return lambda a, m: 1.0
    if h.modulation == "linear-in-m":
        return lambda a, m: h.mod_intercept + h.mod_slope * m
    return lambda a, m: float(h.mod_fn(np.asarray(a), np.asarray([m])))


def make_scalar_intensity(spec: mdl.ModelSpec):
    """Pure-python intensity closure for d=1 hot loops."""
    f = spec.f
    lo, hi = f.f_min, f.f_max - f.f_min
    K, kap = spec.psi.K, spec.psi.kappa
    if f.family == "constant":
        return lambda a, m, x: lo
    if f.family == "stp-composite":
        cx, b, amp, rate = f.c_x, f.b, f.psi_amp, f.psi_rate
        def fn(a, m, x):
            u = cx * (x - amp * math.exp(-rate * a)) + b
            return lo + hi / (1.0 + math.exp(-u)) if u > -500 else lo
        return fn
    ca, cx, b = f.c_a, f.c_x, f.b
    cm = f.c_m[0]
    if f.family == "sigmoid-affine":
        def fn(a, m, x):
            u = ca * K * (1.0 - math.exp(-a * kap / K)) + cm * m + cx * x + b
            return lo + hi / (1.0 + math.exp(-u)) if u > -500 else lo
        return fn
    def fn(a, m, x):
        u = ca * K * (1.0 - math.exp(-a * kap / K)) + cm * m + cx * x + b
        sp = math.log1p(math.exp(u)) if u < 30 else u
        return lo + hi * (1.0 - math.exp(-sp))
    return fn


def make_scalar_jump(j: mdl.JumpSpec):
    if j.family == "translation":
        a0 = j.alpha_vec[0]
        return lambda m: m + a0
    if j.family == "affine-contraction":
        off = float(j.offset_vec(1)[0])
        c = 1.0 - j.alpha
        return lambda m: off + c * m
    return lambda m: float(mdl.jump_apply(j, np.asarray([m]))[0])


def simulate_network(spec: mdl.ModelSpec, N: int, T: float, seed: int,
                     save_times=(), event_cap=EVENT_CAP_DEFAULT,
                     check_assumptions=True) -> SimulationRecord:
    """Exact thinning simulation of the N-neuron system on [0, T]."""
    if N < 1 or T <= 0:
        raise ValueError("need N >= 1 and T > 0")
    if check_assumptions:
        _ensure_assumptions(spec)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    ages0, mems0 = spec.init_law.sample(rng, N)
    H_params = spec.sample_H_params(rng, N, mems0)
    trace = _XTrace(spec, N, H_params)
    save_times = np.asarray(sorted(save_times), dtype=float)

    d = spec.d
    fmax = spec.f_max
    scale = 1.0 / (N * fmax)
    events = []
    snapshots = []
    x_emp = []
    save_idx = 0

    if d == 1:
        lam0 = float(spec.lam[0])
        fscal = make_scalar_intensity(spec)
        jscal = make_scalar_jump(spec.jump)
        gmod = _scalar_modulation(spec)
        t_ref = np.zeros(N)
        age_ref = ages0.copy()
        mem_ref = mems0[:, 0].copy()

        def take_snap(ts):
            el = ts - t_ref
            ages = age_ref + el
            mems = (mem_ref * np.exp(-lam0 * el)).reshape(N, 1)
            xv = trace.value(ts)
            snapshots.append(ParticleState(ts, ages, mems, xv))
            x_emp.append(xv)

        t = 0.0
        while True:
            t_cand = t + rng.exponential(scale)
            i = int(rng.integers(N))
            u = rng.random()
            lim = min(t_cand, T)
            while save_idx < len(save_times) and save_times[save_idx] <= lim:
                take_snap(save_times[save_idx])
                save_idx += 1
            if t_cand > T:
                break
            el = t_cand - t_ref[i]
            a = age_ref[i] + el
            m = mem_ref[i] * math.exp(-lam0 * el)
            x = trace.value(t_cand)
            if u * fmax <= fscal(a, m, x):
                events.append(EventRecord(t_cand, i, a, np.array([m])))
                if len(events) > event_cap:
                    raise RuntimeError(f"event cap {event_cap} exceeded")
                trace.add_event(t_cand, gmod(a, m))
                t_ref[i] = t_cand
                age_ref[i] = 0.0
                mem_ref[i] = jscal(m)
            t = t_cand
    else:
        lam = spec.lam
        t_ref = np.zeros(N)
        age_ref = ages0.copy()
        mem_ref = mems0.copy()

        def take_snap(ts):
            el = ts - t_ref
            ages = age_ref + el
            mems = mem_ref * np.exp(-lam[None, :] * el[:, None])
            xv = trace.value(ts)
            snapshots.append(ParticleState(ts, ages, mems, xv))
            x_emp.append(xv)

        t = 0.0
        while True:
            t_cand = t + rng.exponential(scale)
            i = int(rng.integers(N))
            u = rng.random()
            lim = min(t_cand, T)
            while save_idx < len(save_times) and save_times[save_idx] <= lim:
                take_snap(save_times[save_idx])
                save_idx += 1
            if t_cand > T:
                break
            el = t_cand - t_ref[i]
            a = age_ref[i] + el
            m = mem_ref[i] * np.exp(-lam * el)
            x = trace.value(t_cand)
            if u * fmax <= float(spec.intensity(a, m, x)):
                events.append(EventRecord(t_cand, i, a, m.copy()))
                if len(events) > event_cap:
                    raise RuntimeError(f"event cap {event_cap} exceeded")
                trace.add_event(t_cand, float(mdl.modulation_eval(spec.h, a, m)))
                t_ref[i] = t_cand
                age_ref[i] = 0.0
                mem_ref[i] = mdl.jump_apply(spec.jump, m)
            t = t_cand

    try:
        shash = spec.spec_hash()
    except mdl.ConfigurationError:
        shash = "unserializable"
    return SimulationRecord(shash, N, T, seed, events, save_times,
                            snapshots, np.asarray(x_emp), H_params)


def evaluate_X(spec: mdl.ModelSpec, record: SimulationRecord, t: float,
               horizon=None) -> float:
    """Lazy-sum evaluation of the shared signal from the full event log.

    Reference implementation cross-checked against the trace fast path.
    """
    he = spec.H_emp_mean(record.H_params, t)
    if spec.h.J == 0.0 or not record.events:
        return he
    if horizon is None:
        horizon = mdl.kernel_horizon(spec.h)
    acc = 0.0
    for e in record.events:
        lag = t - e.time
        if lag < 0 or lag > horizon:
            continue
        acc += float(spec.interaction(lag, e.age_before, e.memory_before))
    return he + acc / record.N


def empirical_measure(record: SimulationRecord, t: float):
    """N uniformly weighted (age, memory) points at a saved time."""
    for snap in record.snapshots:
        if abs(snap.t - t) < 1e-12:
            pts = np.column_stack([snap.ages, snap.memories])
            return pts, np.full(record.N, 1.0 / record.N)
    raise KeyError(f"time {t} not among save times")


# ---------------------------------------------------------------------------
# coupled finite-N / limit pair


@dataclass
class CoupledRunSummary:
    N: int
    T: float
    seed: int
    sup_distance: float
    n_replicas: int
    per_replica: np.ndarray = field(default=None)


def simulate_coupled_pair(spec: mdl.ModelSpec, N: int, T: float, x_path,
                          seed: int, n_replicas: int = 1,
                          check_assumptions=True) -> CoupledRunSummary:
    """N-system and N limit processes on shared candidate streams.

    Both systems share initial conditions and the (time, neuron, uniform)
    candidate triples; the limit side replaces the empirical signal with the
    deterministic x_path.  Returns the replica-and-neuron average of
    sup_t |psi(A^N) - psi(A)| + |M^N - M|_1.
    """
    if spec.d != 1:
        raise NotImplementedError("coupled pair implemented for d = 1")
    if check_assumptions:
        _ensure_assumptions(spec)
    xg = np.asarray(x_path.grid, dtype=float)
    xv = np.asarray(x_path.values, dtype=float)
    if xg[-1] < T - 1e-12:
        raise ValueError("x_path does not cover [0, T]")

    lam0 = float(spec.lam[0])
    fmax = spec.f_max
    fscal = make_scalar_intensity(spec)
    jscal = make_scalar_jump(spec.jump)
    gmod = _scalar_modulation(spec)
    K, kap = spec.psi.K, spec.psi.kappa

    def psi_s(a):
        return K * (1.0 - math.exp(-a * kap / K))

    vals = np.empty(n_replicas)
    for rep in range(n_replicas):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))
        ages0, mems0 = spec.init_law.sample(rng, N)
        H_params = spec.sample_H_params(rng, N, mems0)
        trace = _XTrace(spec, N, H_params)

        tN = np.zeros(N); aN = ages0.copy(); mN = mems0[:, 0].copy()
        tL = np.zeros(N); aL = ages0.copy(); mL = mems0[:, 0].copy()
        sup = np.zeros(N)
        scale = 1.0 / (N * fmax)
        t = 0.0
        while True:
            t_cand = t + rng.exponential(scale)
            i = int(rng.integers(N))
            u = rng.random()
            if t_cand > T:
                break
            # finite-N side
            elN = t_cand - tN[i]
            a1 = aN[i] + elN
            m1 = mN[i] * math.exp(-lam0 * elN)
            x1 = trace.value(t_cand)
            acc1 = u * fmax <= fscal(a1, m1, x1)
            # limit side
            elL = t_cand - tL[i]
            a2 = aL[i] + elL
            m2 = mL[i] * math.exp(-lam0 * elL)
            x2 = float(np.interp(t_cand, xg, xv))
            acc2 = u * fmax <= fscal(a2, m2, x2)
            if acc1:
                trace.add_event(t_cand, gmod(a1, m1))
                tN[i] = t_cand; aN[i] = 0.0; mN[i] = jscal(m1)
            if acc2:
                tL[i] = t_cand; aL[i] = 0.0; mL[i] = jscal(m2)
            if acc1 or acc2:
                an = 0.0 if acc1 else a1
                al = 0.0 if acc2 else a2
                mn = mN[i] if acc1 else m1
                ml = mL[i] if acc2 else m2
                diff = abs(psi_s(an) - psi_s(al)) + abs(mn - ml)
                if diff > sup[i]:
                    sup[i] = diff
            t = t_cand
        vals[rep] = float(np.mean(sup))
    return CoupledRunSummary(N, T, seed, float(np.mean(vals)), n_replicas, vals)


# ---------------------------------------------------------------------------
# pre-transformation simulation of the exponential self-interaction form


def simulate_equivalent_hawkes(spec: mdl.ModelSpec, N: int, T: float, seed: int,
                               save_times=(), event_cap=EVENT_CAP_DEFAULT,
                               check_assumptions=True) -> SimulationRecord:
    """Simulates the memory process in kernel form instead of state form.

    Each neuron's memory is reconstructed as M0*exp(-Lambda t) plus a sum of
    alpha*exp(-Lambda(t-s)) over its own event log, which for d=1 translation
    jumps is algebraically equal to the jump-and-decay state.  Under the same
    seed the candidate stream matches simulate_network, so the event logs
    must coincide.
    """
    if spec.d != 1 or spec.jump.family != "translation":
        raise mdl.ConfigurationError(
            "kernel-form simulation needs d=1 and a translation jump")
    if check_assumptions:
        _ensure_assumptions(spec)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    ages0, mems0 = spec.init_law.sample(rng, N)
    H_params = spec.sample_H_params(rng, N, mems0)
    trace = _XTrace(spec, N, H_params)
    save_times = np.asarray(sorted(save_times), dtype=float)

    lam0 = float(spec.lam[0])
    alpha = spec.jump.alpha_vec[0]
    fmax = spec.f_max
    fscal = make_scalar_intensity(spec)
    gmod = _scalar_modulation(spec)
    m0 = mems0[:, 0]
    own_events = [[] for _ in range(N)]
    last_event = np.zeros(N)
    age_off = ages0.copy()

    def mem_at(i, t):
        v = m0[i] * math.exp(-lam0 * t)
        for s in own_events[i]:
            v += alpha * math.exp(-lam0 * (t - s))
        return v

    events = []
    snapshots = []
    x_emp = []
    save_idx = 0
    scale = 1.0 / (N * fmax)

    def take_snap(ts):
        ages = age_off + ts - last_event
        mems = np.array([[mem_at(i, ts)] for i in range(N)])
        xv = trace.value(ts)
        snapshots.append(ParticleState(ts, ages, mems, xv))
        x_emp.append(xv)

    t = 0.0
    while True:
        t_cand = t + rng.exponential(scale)
        i = int(rng.integers(N))
        u = rng.random()
        lim = min(t_cand, T)
        while save_idx < len(save_times) and save_times[save_idx] <= lim:
            take_snap(save_times[save_idx])
            save_idx += 1
        if t_cand > T:
            break
        a = age_off[i] + t_cand - last_event[i]
        m = mem_at(i, t_cand)
        x = trace.value(t_cand)
        if u * fmax <= fscal(a, m, x):
            events.append(EventRecord(t_cand, i, a, np.array([m])))
            if len(events) > event_cap:
                raise RuntimeError(f"event cap {event_cap} exceeded")
            trace.add_event(t_cand, gmod(a, m))
            own_events[i].append(t_cand)
            last_event[i] = t_cand
            age_off[i] = 0.0
        t = t_cand

    try:
        shash = spec.spec_hash()
    except mdl.ConfigurationError:
        shash = "unserializable"
    return SimulationRecord(shash, N, T, seed, events, save_times,
                            snapshots, np.asarray(x_emp), H_params)


# ---------------------------------------------------------------------------
# artifact export


def events_to_csv(record: SimulationRecord, path):
    d = record.events[0].memory_before.shape[0] if record.events else 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "neuron", "age_before"] + [f"m{k+1}" for k in range(d)])
        for e in record.events:
            w.writerow([repr(float(e.time)), e.neuron, repr(float(e.age_before))]
                       + [repr(float(v)) for v in e.memory_before])


def snapshots_to_csv(record: SimulationRecord, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        d = record.snapshots[0].memories.shape[1] if record.snapshots else 1
        w.writerow(["t", "neuron", "age"] + [f"m{k+1}" for k in range(d)] + ["X"])
        for snap in record.snapshots:
            for i in range(len(snap.ages)):
                w.writerow([repr(snap.t), i, repr(float(snap.ages[i]))]
                           + [repr(float(v)) for v in snap.memories[i]]
                           + [repr(snap.X)])
