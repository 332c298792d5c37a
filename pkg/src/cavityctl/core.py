"""Hilbert spaces, operators and states for spin ensembles coupled to one cavity mode.

Conventions (fixed once, used everywhere):

* hbar = 1 and all rates are expressed in units of the nominal spin-cavity
  coupling g, all times as g*t.
* Cavity Fock basis |0>, ..., |fock_cutoff>; mode dimension is fock_cutoff + 1.
* Single-spin basis is (|down>, |up>) so that sigma_z = diag(-1, +1) and
  sigma_+ = |up><down|.  The all-down state |G> therefore has index 0.
* Composite index = fock_index * spin_dim + spin_index, with spin 1 the most
  significant factor of the spin product basis.
* Collective operators use Pauli normalization, J_a = sum_n sigma_a^(n), so
  [J_z, J_+] = 2 J_+ and a rotation of every spin by an angle theta is
  exp(-i theta J_axis / 2).
* In the symmetric-multiplet ("Dicke reduced") basis the spin factor is the
  J = n_spins/2 multiplet ordered by increasing magnetization, index 0 = |G>.
  States that never couple to the symmetric sector at resonance (e.g. the
  two-spin singlet) are not part of this basis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import comb, sqrt
from typing import Iterable

import numpy as np

__all__ = [
    "SpinBasis",
    "SpaceSpec",
    "SystemParams",
    "Operator",
    "DensityMatrix",
    "build_mode_ops",
    "build_spin_ops",
    "build_collective",
    "build_h0",
    "build_controls",
    "excitation_number",
    "dicke_states",
    "state_label_index",
    "basis_state",
    "partial_trace_cavity",
    "expectation",
    "commutator",
    "HERMITIAN_TOL",
]

HERMITIAN_TOL = 1e-12
STATE_HERMITIAN_TOL = 1e-10
STATE_TRACE_TOL = 1e-10
STATE_EIG_TOL = 1e-8


class SpinBasis(enum.Enum):
    FULL_PRODUCT = "full_product"
    DICKE_SYMMETRIC_REDUCED = "dicke_symmetric_reduced"


@dataclass(frozen=True)
class SpaceSpec:
    """Truncated composite Hilbert space of one bosonic mode and n_spins spin-1/2."""

    n_spins: int
    fock_cutoff: int
    spin_basis: SpinBasis = SpinBasis.FULL_PRODUCT

    def __post_init__(self) -> None:
        if self.n_spins < 0:
            raise ValueError("n_spins must be >= 0")
        # fock_cutoff 0 (mode dimension 1) only appears in spin-only reduced
        # spaces returned by partial_trace_cavity.
        if self.fock_cutoff < 0:
            raise ValueError("fock_cutoff must be a positive integer")
        if (
            self.spin_basis is SpinBasis.DICKE_SYMMETRIC_REDUCED
            and self.n_spins < 1
        ):
            raise ValueError("Dicke reduced basis needs at least one spin")

    @property
    def mode_dim(self) -> int:
        return self.fock_cutoff + 1

    @property
    def spin_dim(self) -> int:
        if self.spin_basis is SpinBasis.FULL_PRODUCT:
            return 2**self.n_spins
        return self.n_spins + 1

    @property
    def dim(self) -> int:
        return self.mode_dim * self.spin_dim


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the uncontrolled model: coupling g, cavity damping
    kappa and per-spin detunings, all in units of the nominal coupling."""

    g: float = 1.0
    kappa: float = 0.0
    deltas: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        if self.g <= 0:
            raise ValueError("g must be > 0")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")

    def validate_for(self, spec: SpaceSpec) -> None:
        if len(self.deltas) != spec.n_spins:
            raise ValueError(
                f"deltas has length {len(self.deltas)}, expected {spec.n_spins}"
            )
        if spec.spin_basis is SpinBasis.DICKE_SYMMETRIC_REDUCED and any(
            d != self.deltas[0] for d in self.deltas
        ):
            raise ValueError(
                "Dicke reduced basis is only valid when all detunings are equal"
            )

    def resonant(self) -> bool:
        return all(d == 0.0 for d in self.deltas)


@dataclass(frozen=True)
class Operator:
    """Dense operator on a composite space.  Thin wrapper used to keep the
    space spec attached to the matrix; arithmetic stays within one space."""

    space: SpaceSpec
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise ValueError(
                f"matrix shape {m.shape} does not match space dim {self.space.dim}"
            )
        object.__setattr__(self, "matrix", m)

    def _check(self, other: "Operator") -> None:
        if other.space != self.space:
            raise ValueError("operators live on different spaces")

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix @ other.matrix)

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)


def commutator(a: Operator, b: Operator) -> Operator:
    return Operator(a.space, a.matrix @ b.matrix - b.matrix @ a.matrix)


@dataclass(frozen=True)
class DensityMatrix:
    """System state.  Validation is opt-in so propagation loops stay cheap."""

    space: SpaceSpec
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise ValueError(
                f"matrix shape {m.shape} does not match space dim {self.space.dim}"
            )
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_state_vector(cls, space: SpaceSpec, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        if psi.shape != (space.dim,):
            raise ValueError("state vector length does not match space dimension")
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            raise ValueError("zero state vector")
        psi = psi / nrm
        return cls(space, np.outer(psi, psi.conj()))

    def validate(
        self,
        herm_tol: float = STATE_HERMITIAN_TOL,
        trace_tol: float = STATE_TRACE_TOL,
        eig_tol: float = STATE_EIG_TOL,
    ) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > trace_tol or abs(np.trace(m).imag) > trace_tol:
            raise ValueError("density matrix trace differs from 1")
        if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -eig_tol:
            raise ValueError("density matrix has a significantly negative eigenvalue")

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def purity(self) -> float:
        return float(np.einsum("ij,ji->", self.matrix, self.matrix).real)

    def min_eigenvalue(self) -> float:
        h = (self.matrix + self.matrix.conj().T) / 2
        return float(np.linalg.eigvalsh(h).min())

    def fock_populations(self) -> np.ndarray:
        """Populations of the cavity Fock levels (spins traced out)."""
        s = self.space
        t = self.matrix.reshape(s.mode_dim, s.spin_dim, s.mode_dim, s.spin_dim)
        return np.einsum("iaia->i", t).real

    def leakage(self) -> float:
        """Population of the two highest retained Fock levels."""
        pops = self.fock_populations()
        return float(pops[-2:].sum()) if len(pops) >= 2 else float(pops[-1])


# ---------------------------------------------------------------------------
# operator builders
# ---------------------------------------------------------------------------

_SIGMA_P = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # |up><down|
_SIGMA_M = _SIGMA_P.conj().T
_SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)


def _mode_annihilator(mode_dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, mode_dim, dtype=float)), k=1).astype(complex)


def _spin_embed(spec: SpaceSpec, n: int, local: np.ndarray) -> np.ndarray:
    """Embed a single-spin operator at (1-based) position n of the product basis."""
    op = np.eye(1, dtype=complex)
    for k in range(1, spec.n_spins + 1):
        op = np.kron(op, local if k == n else np.eye(2, dtype=complex))
    return op


def _collective_spin_matrices(spec: SpaceSpec) -> dict[str, np.ndarray]:
    """Pauli-normalized collective matrices on the spin factor alone."""
    if spec.spin_basis is SpinBasis.FULL_PRODUCT:
        d = spec.spin_dim
        jp = np.zeros((d, d), dtype=complex)
        jz = np.zeros((d, d), dtype=complex)
        for n in range(1, spec.n_spins + 1):
            jp += _spin_embed(spec, n, _SIGMA_P)
            jz += _spin_embed(spec, n, _SIGMA_Z)
        jm = jp.conj().T
    else:
        # symmetric multiplet with J = n_spins/2, basis ordered by M ascending
        j = spec.n_spins / 2.0
        d = spec.spin_dim
        ms = np.array([-j + k for k in range(d)])
        ladder = np.array(
            [sqrt(j * (j + 1) - m * (m + 1)) for m in ms[:-1]], dtype=float
        )
        jp = np.diag(ladder, k=-1).astype(complex)  # raises M: |M> -> |M+1>
        jm = jp.conj().T
        jz = np.diag(2.0 * ms).astype(complex)
    jx = jp + jm
    jy = -1j * (jp - jm)
    return {"jp": jp, "jm": jm, "jz": jz, "jx": jx, "jy": jy}


def _lift_mode(spec: SpaceSpec, mode_op: np.ndarray) -> np.ndarray:
    return np.kron(mode_op, np.eye(spec.spin_dim, dtype=complex))


def _lift_spin(spec: SpaceSpec, spin_op: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(spec.mode_dim, dtype=complex), spin_op)


def build_mode_ops(spec: SpaceSpec) -> tuple[Operator, Operator]:
    """Annihilation and creation operators of the cavity mode on the composite space."""
    a = _mode_annihilator(spec.mode_dim)
    return (
        Operator(spec, _lift_mode(spec, a)),
        Operator(spec, _lift_mode(spec, a.conj().T)),
    )


def build_spin_ops(spec: SpaceSpec, n: int) -> tuple[Operator, Operator, Operator]:
    """(sigma_+, sigma_-, sigma_z) of spin n (1-based) on the composite space.

    Individual spins are only addressable in the full product basis.
    """
    if spec.spin_basis is not SpinBasis.FULL_PRODUCT:
        raise ValueError("individual spin operators require the full product basis")
    if not 1 <= n <= spec.n_spins:
        raise ValueError(f"spin index {n} out of range 1..{spec.n_spins}")
    sp = _lift_spin(spec, _spin_embed(spec, n, _SIGMA_P))
    sm = _lift_spin(spec, _spin_embed(spec, n, _SIGMA_M))
    sz = _lift_spin(spec, _spin_embed(spec, n, _SIGMA_Z))
    return Operator(spec, sp), Operator(spec, sm), Operator(spec, sz)


def build_collective(
    spec: SpaceSpec,
) -> tuple[Operator, Operator, Operator, Operator, Operator]:
    """Collective spin operators (J_x, J_y, J_z, J_+, J_-) on the composite space."""
    mats = _collective_spin_matrices(spec)
    return tuple(
        Operator(spec, _lift_spin(spec, mats[k])) for k in ("jx", "jy", "jz", "jp", "jm")
    )


def build_h0(spec: SpaceSpec, params: SystemParams) -> Operator:
    """Drift Hamiltonian: detuning term plus excitation-conserving spin-cavity exchange.

    H0 = sum_n (Delta_n/2) sigma_z^(n) + g sum_n (a^dag sigma_-^(n) + a sigma_+^(n)).
    """
    params.validate_for(spec)
    a = _mode_annihilator(spec.mode_dim)
    ad = a.conj().T
    mats = _collective_spin_matrices(spec)
    h = params.g * (
        np.kron(ad, mats["jm"]) + np.kron(a, mats["jp"])
    )
    if spec.spin_basis is SpinBasis.FULL_PRODUCT:
        for n, delta in enumerate(params.deltas, start=1):
            if delta != 0.0:
                h += (delta / 2.0) * _lift_spin(spec, _spin_embed(spec, n, _SIGMA_Z))
    else:
        if spec.n_spins and params.deltas and params.deltas[0] != 0.0:
            h += (params.deltas[0] / 2.0) * _lift_spin(spec, mats["jz"])
    return Operator(spec, h)


def build_controls(spec: SpaceSpec) -> tuple[Operator, Operator, Operator]:
    """Control generators (V_x, V_y, V_s) = (J_x/2, J_y/2, (i/2)[(a^dag)^2 - a^2])."""
    mats = _collective_spin_matrices(spec)
    a = _mode_annihilator(spec.mode_dim)
    ad = a.conj().T
    vx = _lift_spin(spec, mats["jx"]) / 2.0
    vy = _lift_spin(spec, mats["jy"]) / 2.0
    vs = _lift_mode(spec, 0.5j * (ad @ ad - a @ a))
    return Operator(spec, vx), Operator(spec, vy), Operator(spec, vs)


def excitation_number(spec: SpaceSpec) -> Operator:
    """Total excitation number N = a^dag a + sum_n (sigma_z^(n) + 1)/2."""
    a = _mode_annihilator(spec.mode_dim)
    num = _lift_mode(spec, a.conj().T @ a)
    jz = _collective_spin_matrices(spec)["jz"]
    num += _lift_spin(spec, (jz + spec.n_spins * np.eye(spec.spin_dim)) / 2.0)
    return Operator(spec, num)


# ---------------------------------------------------------------------------
# named states
# ---------------------------------------------------------------------------


def _spin_label_vectors(spec: SpaceSpec) -> dict[str, np.ndarray]:
    """Named collective spin states on the spin factor.

    |G>: all spins down.  |E>: all spins up.  For two spins |S> and |A> are the
    one-excitation triplet/singlet states.  For four spins |S> is the symmetric
    two-excitation Dicke state and |A> the alternating-phase two-excitation
    state sum_{n<m} (-1)^(n+m) |n,m up> / sqrt(6): the pairwise-antisymmetrized
    analogue of the two-spin singlet.  Note that for four spins this |A> is not
    orthogonal to |S> (<S|A> = -1/3) and is a superposition of total-J 0 and 2;
    a state drawn purely from the J = 0 sector would be orthogonal to |S> but
    carries a different pair-correlation sum.
    """
    d = spec.spin_dim
    out: dict[str, np.ndarray] = {}
    if spec.spin_basis is SpinBasis.DICKE_SYMMETRIC_REDUCED:
        g = np.zeros(d, dtype=complex)
        g[0] = 1.0
        e = np.zeros(d, dtype=complex)
        e[-1] = 1.0
        out["G"] = g
        out["E"] = e
        if spec.n_spins % 2 == 0:
            s = np.zeros(d, dtype=complex)
            s[spec.n_spins // 2] = 1.0  # M = 0 member of the symmetric multiplet
            out["S"] = s
        return out

    n = spec.n_spins
    g = np.zeros(d, dtype=complex)
    g[0] = 1.0
    e = np.zeros(d, dtype=complex)
    e[-1] = 1.0
    out["G"] = g
    out["E"] = e

    def bit_state(up_positions: Iterable[int]) -> int:
        # spin 1 most significant; up = 1
        idx = 0
        ups = set(up_positions)
        for k in range(1, n + 1):
            idx = (idx << 1) | (1 if k in ups else 0)
        return idx

    if n == 2:
        s = np.zeros(d, dtype=complex)
        s[bit_state([1])] = 1.0 / sqrt(2)
        s[bit_state([2])] = 1.0 / sqrt(2)
        a_state = np.zeros(d, dtype=complex)
        a_state[bit_state([1])] = 1.0 / sqrt(2)
        a_state[bit_state([2])] = -1.0 / sqrt(2)
        out["S"] = s
        out["A"] = a_state
    elif n == 4:
        pairs = [(i, j) for i in range(1, 5) for j in range(i + 1, 5)]
        s = np.zeros(d, dtype=complex)
        a_state = np.zeros(d, dtype=complex)
        for i, j in pairs:
            s[bit_state([i, j])] = 1.0 / sqrt(6)
            a_state[bit_state([i, j])] = (-1.0) ** (i + j) / sqrt(6)
        out["S"] = s
        out["A"] = a_state
    return out


def dicke_states(spec: SpaceSpec) -> dict[str, np.ndarray]:
    """Named spin states lifted to the composite space with zero photons.

    Returns state vectors |0, X> for the labels available on this space.
    """
    if spec.spin_basis is SpinBasis.FULL_PRODUCT and spec.n_spins not in (2, 4):
        raise ValueError(
            f"named Dicke states are provided for 2 or 4 spins, not {spec.n_spins}"
        )
    labels = _spin_label_vectors(spec)
    vac = np.zeros(spec.mode_dim, dtype=complex)
    vac[0] = 1.0
    return {k: np.kron(vac, v) for k, v in labels.items()}


def state_label_index(spec: SpaceSpec, label: str) -> np.ndarray:
    """State vector for a label of the form 'n,X' (photon number, spin label)
    or 'n,#k' with a raw spin-basis index k."""
    try:
        fock_str, spin_str = label.split(",", 1)
        fock = int(fock_str.strip())
    except ValueError as exc:
        raise ValueError(f"bad state label {label!r}; expected 'n,X'") from exc
    if not 0 <= fock <= spec.fock_cutoff:
        raise ValueError(f"photon number {fock} outside 0..{spec.fock_cutoff}")
    spin_str = spin_str.strip()
    if spin_str.startswith("#"):
        spin_idx = int(spin_str[1:])
        if not 0 <= spin_idx < spec.spin_dim:
            raise ValueError(f"spin index {spin_idx} outside 0..{spec.spin_dim - 1}")
        spin_vec = np.zeros(spec.spin_dim, dtype=complex)
        spin_vec[spin_idx] = 1.0
    else:
        labels = _spin_label_vectors(spec)
        if spin_str not in labels:
            raise ValueError(
                f"unknown spin label {spin_str!r}; available: {sorted(labels)}"
            )
        spin_vec = labels[spin_str]
    mode_vec = np.zeros(spec.mode_dim, dtype=complex)
    mode_vec[fock] = 1.0
    return np.kron(mode_vec, spin_vec)


def basis_state(spec: SpaceSpec, label: str) -> DensityMatrix:
    """Pure density matrix for a label such as '0,G'."""
    return DensityMatrix.from_state_vector(spec, state_label_index(spec, label))


# ---------------------------------------------------------------------------
# reductions and expectations
# ---------------------------------------------------------------------------


def partial_trace_cavity(rho: DensityMatrix) -> DensityMatrix:
    """Trace out the cavity mode, returning the spin-only reduced state.

    The reduced state lives on a space with fock_cutoff = 0 (mode dimension 1).
    """
    s = rho.space
    t = rho.matrix.reshape(s.mode_dim, s.spin_dim, s.mode_dim, s.spin_dim)
    red = np.einsum("iaib->ab", t)
    spin_space = SpaceSpec(n_spins=s.n_spins, fock_cutoff=0, spin_basis=s.spin_basis)
    return DensityMatrix(spin_space, red)


def expectation(rho: DensityMatrix, op: Operator) -> complex:
    """Tr[O rho]; real up to numerical noise when O is Hermitian."""
    if op.matrix.shape != rho.matrix.shape:
        raise ValueError("operator and state dimensions do not match")
    return complex(np.einsum("ij,ji->", op.matrix, rho.matrix))


def expectation_vec(psi: np.ndarray, op_matrix: np.ndarray) -> complex:
    """<psi|O|psi> for raw vectors; fast path used by the optimizer."""
    return complex(np.vdot(psi, op_matrix @ psi))
