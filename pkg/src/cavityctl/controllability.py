"""Dimension growth of the dynamical Lie algebra spanned by the generators.

The algebra is built layer by layer: order 0 holds the traceless parts of
i * (the generator set); order k adds commutators that nest one level deeper.
Dimensions are real dimensions of the real span of anti-Hermitian traceless
matrices, computed by rank-revealing orthogonalization of the vectorized
elements.  The controllability verdict compares the saturated dimension with
dim su(N) = N^2 - 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import Operator, SpaceSpec

__all__ = [
    "GeneratorSet",
    "AlgebraGrowth",
    "lie_algebra_growth",
    "is_controllable",
]

DEFAULT_RANK_TOL = 1e-9
_ZERO_NORM = 1e-13
_CHUNK = 4096


@dataclass(frozen=True)
class GeneratorSet:
    """Hermitian control/drift generators on one space."""

    space: SpaceSpec
    operators: tuple[Operator, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "operators", tuple(self.operators))
        if not self.operators:
            raise ValueError("generator set is empty")
        for k, op in enumerate(self.operators):
            if op.space != self.space:
                raise ValueError(f"generator {k} lives on a different space")
            if not op.is_hermitian(1e-10):
                raise ValueError(f"generator {k} is not Hermitian to 1e-10")


@dataclass
class AlgebraGrowth:
    """Cumulative algebra dimension per commutator order."""

    dims: list[int]
    converged: bool
    target_dim: int
    basis: np.ndarray = field(repr=False, default=None)

    @property
    def dimension(self) -> int:
        return self.dims[-1] if self.dims else 0

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("order,dimension\n")
            for k, d in enumerate(self.dims):
                fh.write(f"{k},{d}\n")


def _vectorize(mats: np.ndarray) -> np.ndarray:
    """Real vectorization of a stack of matrices: (n, N, N) -> (n, 2 N^2).

    Real span of anti-Hermitian matrices is what su(N) dimension counts, so
    the rank must be taken over the reals.
    """
    flat = mats.reshape(mats.shape[0], -1)
    return np.concatenate([flat.real, flat.imag], axis=1)


class _RealSpan:
    """Incremental orthonormal basis of a real vector span."""

    def __init__(self, ambient_dim: int, rank_tol: float):
        self.q = np.zeros((0, ambient_dim))
        self.rank_tol = rank_tol

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    def add(self, vecs: np.ndarray) -> np.ndarray:
        """Add row vectors; returns the newly added orthonormal rows."""
        added = []
        for start in range(0, vecs.shape[0], _CHUNK):
            chunk = vecs[start : start + _CHUNK]
            norms = np.linalg.norm(chunk, axis=1)
            chunk = chunk[norms > _ZERO_NORM]
            if chunk.size == 0:
                continue
            chunk = chunk / np.linalg.norm(chunk, axis=1, keepdims=True)
            # two-pass projection against the accumulated basis
            for _ in range(2):
                if self.dim:
                    chunk = chunk - (chunk @ self.q.T) @ self.q
            # rank-revealing QR inside the chunk
            q, r, _ = scipy.linalg.qr(
                chunk.T, mode="economic", pivoting=True
            )
            diag = np.abs(np.diag(r))
            keep = diag > self.rank_tol
            new_rows = q.T[keep]
            if new_rows.size:
                # final cleanup pass against the basis, then re-normalize
                if self.dim:
                    new_rows = new_rows - (new_rows @ self.q.T) @ self.q
                norms = np.linalg.norm(new_rows, axis=1)
                new_rows = new_rows[norms > self.rank_tol]
                if new_rows.size:
                    new_rows = new_rows / np.linalg.norm(
                        new_rows, axis=1, keepdims=True
                    )
                    self.q = np.vstack([self.q, new_rows])
                    added.append(new_rows)
        return np.vstack(added) if added else np.zeros((0, vecs.shape[1]))


def _devectorize(rows: np.ndarray, n: int) -> np.ndarray:
    half = rows.shape[1] // 2
    return (rows[:, :half] + 1j * rows[:, half:]).reshape(-1, n, n)


def _commutators(layer: np.ndarray, against: np.ndarray) -> np.ndarray:
    """All pairwise commutators [x, y], x in layer, y in against."""
    # stack of X @ Y minus Y @ X via batched matmul
    xs = layer[:, None, :, :]
    ys = against[None, :, :, :]
    prods = xs @ ys - ys @ xs
    n = layer.shape[-1]
    return prods.reshape(-1, n, n)


def lie_algebra_growth(
    gens: GeneratorSet,
    max_order: int = 10,
    rank_tol: float = DEFAULT_RANK_TOL,
    nesting: str = "full",
) -> AlgebraGrowth:
    """Dimension of the span of recursive commutators, one entry per order.

    nesting='full' (default) commutes each new layer with every basis element
    found so far; 'generators' commutes it with the order-0 generators only.
    The two agree on the closure but grow at different rates per order; the
    per-order dimensions of the reference growth tables follow 'full'.
    """
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    if nesting not in ("generators", "full"):
        raise ValueError("nesting must be 'generators' or 'full'")
    n = gens.space.dim
    target = n * n - 1
    eye = np.eye(n)

    g0 = []
    for op in gens.operators:
        m = 1j * op.matrix
        m = m - (np.trace(m) / n) * eye  # su(N) is traceless
        g0.append(m)
    g0 = np.asarray(g0)

    span = _RealSpan(2 * n * n, rank_tol)
    new_rows = span.add(_vectorize(g0))
    dims = [span.dim]
    layer = _devectorize(new_rows, n)

    for _ in range(max_order):
        if span.dim >= target or layer.shape[0] == 0:
            dims.append(span.dim)
            continue
        against = g0 if nesting == "generators" else _devectorize(span.q, n)
        # bound the temporary commutator stack to ~64 MB
        rows_per = max(1, (1 << 22) // max(1, against.shape[0] * n * n))
        added = []
        for start in range(0, layer.shape[0], rows_per):
            cands = _commutators(layer[start : start + rows_per], against)
            rows = span.add(_vectorize(cands))
            if rows.size:
                added.append(rows)
        dims.append(span.dim)
        layer = (
            _devectorize(np.vstack(added), n)
            if added
            else np.zeros((0, n, n), dtype=complex)
        )

    converged = span.dim >= target or (
        len(dims) >= 2 and dims[-1] == dims[-2]
    )
    return AlgebraGrowth(
        dims=dims, converged=converged, target_dim=target, basis=span.q
    )


def is_controllable(
    gens: GeneratorSet,
    rank_tol: float = DEFAULT_RANK_TOL,
    max_order: int = 10,
    nesting: str = "full",
) -> tuple[bool, int]:
    """True iff the algebra saturates dim su(N) within max_order; also
    returns the achieved dimension."""
    growth = lie_algebra_growth(
        gens, max_order=max_order, rank_tol=rank_tol, nesting=nesting
    )
    return growth.dimension >= growth.target_dim, growth.dimension
