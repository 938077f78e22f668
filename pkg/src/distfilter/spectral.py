"""Ising-chain Hamiltonian construction, eigendecomposition and initial states.

The running-example Hamiltonian is an open chain of nearest-neighbour ZZ
couplings with uniform transverse and longitudinal fields, optionally shifted
by a multiple of the identity to break symmetric spectra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 8

_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_ID = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Parameters of the ZZ + transverse/longitudinal field chain."""

    n: int
    coupling: float = 1.0
    field_x: float = 1.0
    field_z: float = 1.0
    shift: float = 0.0

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"qubit count must be a positive integer, got {self.n}")
        if self.n > MAX_QUBITS:
            raise ValueError(f"qubit count {self.n} exceeds dense-solver cap {MAX_QUBITS}")
        for name in ("coupling", "field_x", "field_z", "shift"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")


@dataclass(frozen=True)
class SpectralModel:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""

    n: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return 2**self.n

    def min_gap(self) -> float:
        return float(np.min(np.diff(self.eigenvalues)))

    def energy_of(self, populations: np.ndarray) -> float:
        return float(np.real(self.eigenvalues @ populations))


@dataclass(frozen=True)
class InitialStateSpec:
    """Initial product state (or explicit vector) for one device.

    ``theta-product`` is (cos(theta)|0> + sin(theta)|1>)^n; plus/minus products
    are its theta = +-pi/4 special cases.
    """

    kind: str
    theta: float = 0.0
    index: int = 0
    amplitudes: np.ndarray | None = field(default=None)

    KINDS = ("plus-product", "minus-product", "theta-product", "eigenstate-index", "explicit-amplitudes")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown initial state kind {self.kind!r}; expected one of {self.KINDS}")
        if self.kind == "explicit-amplitudes":
            if self.amplitudes is None:
                raise ValueError("explicit-amplitudes requires an amplitude vector")
            norm = np.linalg.norm(self.amplitudes)
            if abs(norm - 1.0) > 1e-10:
                raise ValueError(f"explicit amplitudes not normalized: |psi| = {norm}")


def _kron_chain(ops) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def _site_op(n: int, site: int, op: np.ndarray) -> np.ndarray:
    return _kron_chain([op if i == site else _ID for i in range(n)])


def _bond_op(n: int, site: int) -> np.ndarray:
    ops = [_ID] * n
    ops[site] = _SZ
    ops[site + 1] = _SZ
    return _kron_chain(ops)


def build_hamiltonian(spec: HamiltonianSpec) -> np.ndarray:
    """Dense matrix of coupling*sum ZZ + field_x*sum X + field_z*sum Z + shift*I."""
    n = spec.n
    dim = 2**n
    h = np.zeros((dim, dim), dtype=complex)
    for j in range(n - 1):
        h += spec.coupling * _bond_op(n, j)
    for j in range(n):
        h += spec.field_x * _site_op(n, j, _SX)
        h += spec.field_z * _site_op(n, j, _SZ)
    h += spec.shift * np.eye(dim)
    return h


def decompose(h: np.ndarray, n: int | None = None) -> SpectralModel:
    """Eigendecompose a Hermitian matrix into a SpectralModel.

    Eigenvector global phases are fixed by making the largest-magnitude
    component of each column real and positive, so repeated runs are
    reproducible.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    herm_err = np.max(np.abs(h - h.conj().T))
    if herm_err > 1e-10:
        raise ValueError(f"matrix is not Hermitian: max |H - H^dag| = {herm_err:.3e}")
    if n is None:
        n = int(round(math.log2(h.shape[0])))
        if 2**n != h.shape[0]:
            raise ValueError(f"dimension {h.shape[0]} is not a power of two")
    eigvals, eigvecs = np.linalg.eigh(h)
    order = np.argsort(eigvals)
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    # Phase convention: largest-magnitude component real-positive.
    for j in range(eigvecs.shape[1]):
        col = eigvecs[:, j]
        k = int(np.argmax(np.abs(col)))
        phase = col[k] / abs(col[k])
        eigvecs[:, j] = col / phase
    return SpectralModel(n=n, eigenvalues=eigvals, eigenvectors=eigvecs)


def build_model(spec: HamiltonianSpec) -> SpectralModel:
    return decompose(build_hamiltonian(spec), n=spec.n)


def product_state_vector(n: int, theta: float) -> np.ndarray:
    """Computational-basis vector of (cos(theta)|0> + sin(theta)|1>)^n."""
    single = np.array([math.cos(theta), math.sin(theta)], dtype=complex)
    vec = np.array([1.0 + 0.0j])
    for _ in range(n):
        vec = np.kron(vec, single)
    return vec


def project_initial(state: InitialStateSpec, model: SpectralModel) -> np.ndarray:
    """Eigenbasis amplitudes c_j = <phi_j|psi> of the initial state."""
    dim = model.dim
    if state.kind == "eigenstate-index":
        if not 0 <= state.index < dim:
            raise ValueError(f"eigenstate index {state.index} out of range for dim {dim}")
        c = np.zeros(dim, dtype=complex)
        c[state.index] = 1.0
        return c
    if state.kind == "explicit-amplitudes":
        psi = np.asarray(state.amplitudes, dtype=complex)
        if psi.shape != (dim,):
            raise ValueError(f"amplitude vector has shape {psi.shape}, expected ({dim},)")
    else:
        theta = {"plus-product": math.pi / 4, "minus-product": -math.pi / 4}.get(state.kind, state.theta)
        psi = product_state_vector(model.n, theta)
    c = model.eigenvectors.conj().T @ psi
    norm = np.linalg.norm(c)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"projected amplitudes not normalized: {norm}")
    return c
