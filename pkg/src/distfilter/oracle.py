"""Literal statevector simulation of the filtering circuit, used for validation.

Simulates the full register per iteration: an s-level top qudit, one auxiliary
qubit per device and s device registers (kept in the Hamiltonian eigenbasis,
where the controlled evolution is diagonal). Intentionally written as a
straightforward gate-by-gate simulation, independent of the fast engine path.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .engine import AmplitudeState, PhaseSample

MAX_EQUIVALENT_QUBITS = 14


def _check_size(s: int, n: int):
    # s*n system qubits + s auxiliary qubits + one top control (qudit ~ 1 unit)
    units = s * n + s + (1 if s > 1 else 0)
    if units > MAX_EQUIVALENT_QUBITS:
        raise ValueError(f"oracle register of {units} qubit-equivalents exceeds cap {MAX_EQUIVALENT_QUBITS}")


def oracle_step(state: AmplitudeState, phases: PhaseSample):
    """Exact outcome distribution and post-measurement device states.

    Returns a dict mapping (top, bits) -> (probability, post-measurement
    device amplitude tensor). For s = 1 the key is (None, (m,)).
    """
    s, n = state.s, state.n
    _check_size(s, n)
    phi = phases.phases
    N = phi.size

    if s == 1:
        return _single_oracle(state.amplitudes, phi)

    # Register layout: psi[alpha, a_1..a_s, j_1..j_s]
    top_dim = s
    shape = (top_dim,) + (2,) * s + (N,) * s
    psi = np.zeros(shape, dtype=complex)

    # Top qudit Fourier transform of |0>, Hadamard on every auxiliary qubit.
    aux_amp = (1.0 / math.sqrt(2)) ** s
    top_amp = 1.0 / math.sqrt(top_dim)
    for alpha in range(top_dim):
        for a in np.ndindex(*(2,) * s):
            psi[(alpha,) + a] = top_amp * aux_amp * state.amplitudes

    # Controlled evolution: device l picks up e^{i phi_{j_l}} when a_l = 1.
    e = np.exp(1j * phi)
    for l in range(s):
        idx = [slice(None)] * (1 + 2 * s)
        idx[1 + l] = 1
        bshape = [1] * (1 + 2 * s)
        bshape[1 + s + l] = N
        psi[tuple(idx)] *= e.reshape(bshape[:1] + bshape[2:])

    # Controlled derangement D^q on the auxiliary qubits: for top value q,
    # the cyclic permutation is applied q times, so the new wire l carries the
    # old wire (l+q) mod s.
    out = np.empty_like(psi)
    for q in range(top_dim):
        block = psi[q]
        out[q] = np.moveaxis(block, [(l + q) % s for l in range(s)], list(range(s)))
    psi = out

    # Inverse Fourier transform on the top qudit (convention matching the
    # engine: amplitude for outcome alpha gets omega^{q alpha}).
    omega = cmath.exp(2j * cmath.pi / s)
    f = np.array([[omega ** (q * alpha) for q in range(top_dim)] for alpha in range(top_dim)],
                 dtype=complex) / math.sqrt(top_dim)
    psi = np.tensordot(f, psi, axes=([1], [0]))

    # Hadamard on every auxiliary qubit (measurement in the +/- basis).
    h = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2)
    for l in range(s):
        psi = np.moveaxis(np.tensordot(h, psi, axes=([1], [1 + l])), 0, 1 + l)

    result = {}
    for alpha in range(top_dim):
        for a in np.ndindex(*(2,) * s):
            branch = psi[(alpha,) + a]
            p = float(np.sum(np.abs(branch) ** 2))
            result[(alpha, a)] = (p, branch)
    return result


def _single_oracle(c: np.ndarray, phi: np.ndarray):
    """Hadamard test on one auxiliary qubit plus the system register."""
    N = c.size
    psi = np.zeros((2, N), dtype=complex)
    # Hadamard on aux, controlled diagonal evolution, Hadamard again.
    psi[0] = c / math.sqrt(2)
    psi[1] = c * np.exp(1j * phi) / math.sqrt(2)
    h = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2)
    psi = h @ psi
    return {(None, (m,)): (float(np.sum(np.abs(psi[m]) ** 2)), psi[m]) for m in (0, 1)}


def oracle_distribution(state: AmplitudeState, phases: PhaseSample) -> dict:
    return {key: p for key, (p, _) in oracle_step(state, phases).items()}
