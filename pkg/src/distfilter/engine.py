"""Single trajectory execution for the 1-, 2- and s-device filtering protocol.

All protocol operators are diagonal or index permutations in the Hamiltonian
eigenbasis, so the joint s-device state is kept as a complex amplitude tensor
over eigenstate indices instead of a full computational-basis statevector.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .spectral import SpectralModel

MAX_DEVICES = 6
MAX_STATE_SIZE = 1 << 24
PROB_SUM_TOL = 1e-9
PRUNE_EPS = 1e-15


@dataclass
class AmplitudeState:
    """Joint state of s devices as an eigenbasis amplitude tensor."""

    s: int
    n: int
    amplitudes: np.ndarray  # shape (N,)*s

    @classmethod
    def from_single(cls, c: np.ndarray, s: int) -> "AmplitudeState":
        """Tensor product of s identical copies of the single-device state c."""
        n = int(round(np.log2(c.size)))
        amp = reduce(np.multiply.outer, [c] * s) if s > 1 else np.array(c, dtype=complex)
        return cls(s=s, n=n, amplitudes=amp)

    def norm_error(self) -> float:
        return abs(float(np.sum(np.abs(self.amplitudes) ** 2)) - 1.0)


@dataclass(frozen=True)
class PhaseSample:
    """Eigenphases for one iteration, shared by all devices."""

    phases: np.ndarray
    mode: str  # "iid-uniform" or "time-window"
    time: float | None = None


@dataclass(frozen=True)
class IterationOutcome:
    k: int
    top: int | None  # s-level qudit outcome; None for a single device
    bits: tuple[int, ...]
    probability: float
    accepted: bool = True


@dataclass(frozen=True)
class PostselectionPolicy:
    kind: str  # "none", "weak" or "strong"

    KINDS = ("none", "weak", "strong")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown postselection kind {self.kind!r}")

    def accepts(self, top: int | None, bits: tuple[int, ...]) -> bool:
        if top is None or self.kind == "none":
            return True
        if top != 0:
            return False
        if self.kind == "weak":
            return True
        # strong: all device bits equal (00..0 or 11..1)
        return len(set(bits)) == 1


@dataclass
class TrajectoryRecord:
    """Per-iteration observables and resource counters for one run."""

    energies: list[float] = field(default_factory=list)
    second_moments: list[float] = field(default_factory=list)
    variances: list[float] = field(default_factory=list)
    outcomes: list[IterationOutcome] = field(default_factory=list)
    restarts: int = 0
    ctrl_evolutions: int = 0
    bell_pairs: int = 0
    status: str = "completed"
    first_failure: int | None = None  # survival mode: iteration of first rejection
    attempts_at_k: list[int] = field(default_factory=list)  # restart mode: attempts consumed when k was first reached

    @property
    def accepted_iterations(self) -> int:
        return len(self.energies) - 1


def sample_phases(model: SpectralModel, mode: str, rng: np.random.Generator,
                  window: tuple[float, float] | None = None) -> PhaseSample:
    """Draw one iteration's eigenphase vector.

    iid-uniform draws each phase independently; time-window draws a single
    evolution time t from the window and sets phi_j = (-t * lambda_j) mod 2pi.
    A degenerate window (t_min == t_max) fixes t deterministically, which is
    useful for testing.
    """
    if mode == "iid-uniform":
        return PhaseSample(phases=rng.uniform(0.0, 2 * np.pi, size=model.dim), mode=mode)
    if mode == "time-window":
        if window is None:
            raise ValueError("time-window mode requires a window")
        t_min, t_max = window
        if not (t_max >= t_min > 0):
            raise ValueError(f"invalid time window [{t_min}, {t_max}]")
        t = t_min if t_max == t_min else rng.uniform(t_min, t_max)
        phases = np.mod(-t * model.eigenvalues, 2 * np.pi)
        return PhaseSample(phases=phases, mode=mode, time=t)
    raise ValueError(f"unknown phase mode {mode!r}")


def single_device_step(c: np.ndarray, phases: PhaseSample,
                       rng: np.random.Generator) -> tuple[np.ndarray, int, float]:
    """One Hadamard-test iteration: P_m = (1/2) sum |c_j|^2 (1 + (-1)^m cos phi_j)."""
    phi = phases.phases
    pops = np.abs(c) ** 2
    p0 = 0.5 * float(pops @ (1.0 + np.cos(phi)))
    p0 = min(max(p0, 0.0), 1.0)
    m = 0 if rng.uniform() < p0 else 1
    p_m = p0 if m == 0 else 1.0 - p0
    if p_m <= PRUNE_EPS:
        raise RuntimeError(f"sampled a zero-probability branch (m={m}, P={p_m})")
    sign = 1.0 if m == 0 else -1.0
    c_new = c * (1.0 + sign * np.exp(1j * phi)) / 2.0
    c_new /= np.linalg.norm(c_new)
    return c_new, m, p_m


def _rotate_bits(b: int, q: int, s: int) -> int:
    """Cyclic right-rotation by q of an s-bit string stored MSB-first."""
    q %= s
    if q == 0:
        return b
    return ((b >> q) | (b << (s - q))) & ((1 << s) - 1)


def _branch_amplitudes(state: AmplitudeState, phi: np.ndarray):
    """Unnormalized post-measurement tensors for every outcome (top, bits).

    For basis tuple (j_1..j_s) the amplitude factor of outcome (alpha, b) is
        (1 / (2^s s)) sum_q omega^(q alpha) prod_l u_{b_{l-q}}(phi_{j_l}),
    with u_0 = 1 + e^{i phi}, u_1 = 1 - e^{i phi} and omega = e^{2 pi i / s}.
    Returns (outcomes, branch_tensors, probabilities) in lexicographic
    (alpha, b) order.
    """
    s = state.s
    e = np.exp(1j * phi)
    u = (1.0 + e, 1.0 - e)
    nb = 1 << s
    # base[b] = outer product over device axes of u[bit_l], times the state;
    # built for all bit strings at once as one big outer product with the bit
    # axes moved in front (MSB first, matching the b index).
    u_stack = np.stack(u)
    full = reduce(np.multiply.outer, [u_stack] * s) if s > 1 else u_stack
    full = np.moveaxis(full, tuple(range(0, 2 * s, 2)), tuple(range(s)))
    base = full.reshape((nb,) + state.amplitudes.shape) * state.amplitudes
    rot = np.array([[_rotate_bits(b, q, s) for b in range(nb)] for q in range(s)])
    omega = np.exp(2j * np.pi * np.outer(np.arange(s), np.arange(s)) / s)  # [alpha, q]
    pref = 1.0 / (nb * s)
    # branches[alpha, b] = pref * sum_q omega[alpha, q] * base[rot[q, b]]
    branches = pref * np.tensordot(omega, base[rot], axes=([1], [0]))
    probs = np.sum(np.abs(branches) ** 2, axis=tuple(range(2, 2 + s)))
    outcomes = [(alpha, tuple((b >> (s - 1 - l)) & 1 for l in range(s)))
                for alpha in range(s) for b in range(nb)]
    return outcomes, branches.reshape((s * nb,) + state.amplitudes.shape), probs.ravel()


def multi_device_step(state: AmplitudeState, phases: PhaseSample,
                      rng: np.random.Generator, k: int = 0) -> tuple[AmplitudeState, IterationOutcome]:
    """One s-device iteration: sample an outcome (top qudit, device bits) and update."""
    s = state.s
    if s < 2:
        raise ValueError("multi_device_step requires s >= 2; use single_device_step")
    if s > MAX_DEVICES:
        raise ValueError(f"device count {s} exceeds outcome-enumeration cap {MAX_DEVICES}")
    if state.amplitudes.size > MAX_STATE_SIZE:
        raise ValueError("joint amplitude tensor exceeds the size guard")
    outcomes, branches, probs = _branch_amplitudes(state, phases.phases)
    total = float(probs.sum())
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise RuntimeError(f"outcome probabilities sum to {total}, expected 1")
    # Inverse CDF over lexicographic (alpha, bits); prune near-zero branches.
    r = rng.uniform() * total
    cum = 0.0
    chosen = None
    for i, p in enumerate(probs):
        if p <= PRUNE_EPS:
            continue
        cum += p
        if r <= cum:
            chosen = i
            break
    if chosen is None:
        chosen = int(np.argmax(probs))
    p = float(probs[chosen])
    amp = branches[chosen] / np.sqrt(p)
    alpha, bits = outcomes[chosen]
    new_state = AmplitudeState(s=s, n=state.n, amplitudes=amp)
    return new_state, IterationOutcome(k=k, top=alpha, bits=bits, probability=p)


def outcome_distribution(state: AmplitudeState, phases: PhaseSample) -> dict:
    """Exact outcome probabilities of one iteration, keyed by (top, bits)."""
    outcomes, _, probs = _branch_amplitudes(state, phases.phases)
    return {o: float(p) for o, p in zip(outcomes, probs)}


# Theta-factor weights for the two-device outcome probabilities:
# P^{ab}_s = (1/64) sum_{j,j'} |c_j|^2 |c_j'|^2 Theta^{ab}_s(phi_j, phi_j').
THETA_TABLE = {
    (0, (0, 0)): lambda a, b: 16.0 * (1 + np.cos(a)) * (1 + np.cos(b)),
    (0, (0, 1)): lambda a, b: 8.0 * (1 - np.cos(a + b)),
    (0, (1, 0)): lambda a, b: 8.0 * (1 - np.cos(a + b)),
    (0, (1, 1)): lambda a, b: 16.0 * (1 - np.cos(a)) * (1 - np.cos(b)),
    (1, (0, 0)): lambda a, b: np.zeros(np.broadcast_shapes(np.shape(a), np.shape(b))),
    (1, (0, 1)): lambda a, b: 8.0 * (1 - np.cos(a - b)),
    (1, (1, 0)): lambda a, b: 8.0 * (1 - np.cos(a - b)),
    (1, (1, 1)): lambda a, b: np.zeros(np.broadcast_shapes(np.shape(a), np.shape(b))),
}


def theta_outcome_distribution(state: AmplitudeState, phases: PhaseSample) -> dict:
    """Two-device outcome probabilities via the closed-form Theta weights.

    Only valid for product-population states (|c_jj'|^2 factorizes implicitly
    through the joint populations), which holds for any state since the
    weights act on the joint populations directly.
    """
    if state.s != 2:
        raise ValueError("Theta-table path is specific to s = 2")
    phi = phases.phases
    pop = np.abs(state.amplitudes) ** 2  # (N, N) joint populations
    a, b = np.meshgrid(phi, phi, indexing="ij")
    return {key: float(np.sum(pop * fn(a, b)) / 64.0) for key, fn in THETA_TABLE.items()}


def two_device_kraus_diagonals(phi: np.ndarray) -> dict:
    """Diagonals of the two-device Kraus operators over |phi_j phi_j'>.

    E^{ab}_s = (1/8) [ u_a(phi_j) u_b(phi_j') + (-1)^s u_b(phi_j) u_a(phi_j') ].
    """
    e = np.exp(1j * phi)
    u = (1.0 + e, 1.0 - e)
    out = {}
    for top in (0, 1):
        sign = 1.0 if top == 0 else -1.0
        for a in (0, 1):
            for b in (0, 1):
                diag = (np.multiply.outer(u[a], u[b]) + sign * np.multiply.outer(u[b], u[a])) / 8.0
                out[(top, (a, b))] = diag
    return out


def apply_postselection(outcome: IterationOutcome, policy: PostselectionPolicy) -> bool:
    return policy.accepts(outcome.top, outcome.bits)


def reduced_observables(state: AmplitudeState, model: SpectralModel) -> tuple[float, float, float]:
    """(energy, <H^2>, variance) of device 1 from its marginal populations."""
    amp = state.amplitudes
    if state.s == 1:
        pops = np.abs(amp) ** 2
    else:
        pops = np.sum(np.abs(amp) ** 2, axis=tuple(range(1, state.s)))
    lam = model.eigenvalues
    energy = float(lam @ pops)
    h2 = float((lam**2) @ pops)
    return energy, h2, h2 - energy**2


def marginal_populations(state: AmplitudeState, axis: int = 0) -> np.ndarray:
    other = tuple(i for i in range(state.s) if i != axis)
    if not other:
        return np.abs(state.amplitudes) ** 2
    return np.sum(np.abs(state.amplitudes) ** 2, axis=other)


def run_trajectory(config, model: SpectralModel, rng: np.random.Generator,
                   initial_amplitudes: np.ndarray | None = None) -> TrajectoryRecord:
    """Run one protocol trajectory to K accepted iterations.

    ``config`` needs: devices, iterations, policy (PostselectionPolicy),
    phase_mode, window, restart_mode ("restart" or "survival"), max_restarts.
    In restart mode a rejected iteration resets the state to the initial
    product and keeps consuming resources; in survival mode the trajectory
    stops at its first rejection.
    """
    from .spectral import project_initial  # local import to avoid cycle at module load

    s = config.devices
    K = config.iterations
    policy = config.policy if isinstance(config.policy, PostselectionPolicy) else PostselectionPolicy(config.policy)
    if initial_amplitudes is None:
        initial_amplitudes = project_initial(config.initial, model)
    if model.min_gap() < 1e-9:
        warnings.warn("Hamiltonian spectrum is (near-)degenerate; phase randomization "
                      "cannot separate degenerate eigenstates", stacklevel=2)

    def fresh_state() -> AmplitudeState:
        return AmplitudeState.from_single(initial_amplitudes, s)

    record = TrajectoryRecord()
    state = fresh_state()
    e0, h20, v0 = reduced_observables(state, model)
    record.energies.append(e0)
    record.second_moments.append(h20)
    record.variances.append(v0)
    record.attempts_at_k.append(0)

    attempts = 0
    k = 0
    while k < K:
        phases = sample_phases(model, config.phase_mode, rng, window=config.window)
        attempts += 1
        record.ctrl_evolutions += s
        record.bell_pairs += s - 1
        if s == 1:
            c_new, m, p = single_device_step(state.amplitudes, phases, rng)
            state = AmplitudeState(s=1, n=state.n, amplitudes=c_new)
            outcome = IterationOutcome(k=k + 1, top=None, bits=(m,), probability=p)
            accepted = True
        else:
            state_new, outcome = multi_device_step(state, phases, rng, k=k + 1)
            accepted = apply_postselection(outcome, policy)
            if accepted:
                state = state_new
        record.outcomes.append(IterationOutcome(k=outcome.k, top=outcome.top, bits=outcome.bits,
                                                probability=outcome.probability, accepted=accepted))
        if accepted:
            k += 1
            e, h2, v = reduced_observables(state, model)
            record.energies.append(e)
            record.second_moments.append(h2)
            record.variances.append(v)
            if len(record.attempts_at_k) <= k:
                record.attempts_at_k.append(attempts)
        else:
            if config.restart_mode == "survival":
                record.first_failure = k + 1
                record.status = "completed"
                return record
            record.restarts += 1
            if record.restarts > config.max_restarts:
                record.status = "aborted-max-restarts"
                return record
            state = fresh_state()
            k = 0
            del record.energies[1:], record.second_moments[1:], record.variances[1:]
    return record


def phase_uniformity_diagnostic(model: SpectralModel, window: tuple[float, float],
                                draws: int, rng: np.random.Generator,
                                mode: str = "time-window") -> tuple[np.ndarray, float]:
    """Check the i.i.d.-uniform phase approximation for a model and window.

    Returns per-eigenvalue Kolmogorov-Smirnov distances from Uniform(0, 2pi)
    and the maximum absolute pairwise correlation among the phase marginals
    (computed on the (cos, sin) embedding to respect circularity). Small
    values certify the approximation; values near 1 flag spectra where phase
    randomization fails, such as exactly symmetric eigenvalue pairs.
    """
    from scipy import stats

    samples = np.empty((draws, model.dim))
    for i in range(draws):
        samples[i] = sample_phases(model, mode, rng, window=window).phases
    ks = np.array([stats.kstest(samples[:, j] / (2 * np.pi), "uniform").statistic
                   for j in range(model.dim)])
    feats = np.concatenate([np.cos(samples), np.sin(samples)], axis=1)
    corr = np.corrcoef(feats, rowvar=False)
    d = model.dim
    max_corr = 0.0
    for j in range(d):
        for j2 in range(j + 1, d):
            block = np.abs([corr[j, j2], corr[j, d + j2], corr[d + j, j2], corr[d + j, d + j2]])
            max_corr = max(max_corr, float(np.nanmax(block)))
    return ks, max_corr
