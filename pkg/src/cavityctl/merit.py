"""Figures of merit and diagnostic observables of the controlled state.

The non-classicality measure sums connected pair correlators
<sigma_+^(n) sigma_-^(m)>_c over distinct spin pairs n > m, scaled by 8/N_s^2
so that the half-excited symmetric Dicke state scores exactly 1.  Only the
distinct-pair sum has that normalization and vanishes on every product state;
including the n = m self-terms would add the (always nonnegative) excitation
fraction and break both properties.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, asdict
from typing import Callable

import numpy as np

from .core import (
    DensityMatrix,
    Operator,
    SpaceSpec,
    SpinBasis,
    SystemParams,
    build_mode_ops,
    build_spin_ops,
    partial_trace_cavity,
)

__all__ = [
    "MeritSpec",
    "MeritReport",
    "SEMI_CLASSICAL_THRESHOLD",
    "fidelity",
    "cumulant_measure",
    "jpjm",
    "jpjm_corr",
    "jpjm_norm",
    "jpjm_corr_norm",
    "g2",
    "cooperativity",
    "merit_report",
]

SEMI_CLASSICAL_THRESHOLD = 0.15


def _psd_sqrt(m: np.ndarray, neg_tol: float = 1e-8) -> np.ndarray:
    """Square root of a Hermitian PSD matrix; clips eigenvalue noise above
    -neg_tol, rejects anything more negative as an invalid state."""
    h = (m + m.conj().T) / 2.0
    evals, evecs = np.linalg.eigh(h)
    if evals.min() < -neg_tol:
        raise ValueError(
            f"matrix has eigenvalue {evals.min():.3e} below -{neg_tol:.0e}; "
            "not a valid density matrix"
        )
    evals = np.clip(evals, 0.0, None)
    return (evecs * np.sqrt(evals)) @ evecs.conj().T


def fidelity(rho: DensityMatrix, target: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(target) rho sqrt(target)))^2 in [0, 1].

    Reduces to <psi|rho|psi> for a pure target.
    """
    if rho.matrix.shape != target.matrix.shape:
        raise ValueError("state dimensions do not match")
    # pure-target shortcut: rank-1 target makes the full formula collapse
    tm = (target.matrix + target.matrix.conj().T) / 2.0
    purity = np.einsum("ij,ji->", tm, tm).real
    if purity > 1.0 - 1e-12:
        val = np.einsum("ij,ji->", tm, rho.matrix).real
        return float(min(max(val, 0.0), 1.0))
    rt = _psd_sqrt(tm)
    inner = _psd_sqrt(rt @ rho.matrix @ rt)
    val = np.trace(inner).real ** 2
    return float(min(max(val, 0.0), 1.0))


def _pair_expectations(rho: DensityMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Matrix P[n, m] = <sigma_+^(n+1) sigma_-^(m+1)> and vector of
    <sigma_+^(n+1)> on the full state (cavity traced implicitly)."""
    spec = rho.space
    if spec.spin_basis is not SpinBasis.FULL_PRODUCT:
        raise ValueError("individual spin correlators need the full product basis")
    n = spec.n_spins
    sps = [build_spin_ops(spec, k)[0].matrix for k in range(1, n + 1)]
    sms = [m.conj().T for m in sps]
    pair = np.zeros((n, n), dtype=complex)
    single = np.zeros(n, dtype=complex)
    rm = rho.matrix
    for i in range(n):
        single[i] = np.einsum("ij,ji->", sps[i], rm)
        for j in range(n):
            pair[i, j] = np.einsum("ij,jk,ki->", sps[i], sms[j], rm)
    return pair, single


def cumulant_measure(rho: DensityMatrix) -> float:
    """Connected pair-correlator measure, 8/N_s^2 sum_{n>m} <s+_n s-_m>_c.

    1 for the half-excited symmetric Dicke state, 0 for any product state,
    negative for subradiant states.
    """
    spec = rho.space
    if spec.n_spins < 1:
        raise ValueError("cumulant measure needs at least one spin")
    pair, single = _pair_expectations(rho)
    n = spec.n_spins
    total = 0.0
    for i in range(n):
        for j in range(i):
            c = pair[i, j] - single[i] * np.conj(single[j])
            total += c.real
    return float(8.0 / n**2 * total)


def jpjm(rho: DensityMatrix) -> float:
    """<J+ J->, the collective dipole-dipole expectation."""
    pair, _ = _pair_expectations(rho)
    return float(pair.sum().real)


def jpjm_corr(rho: DensityMatrix) -> float:
    """<J+ J-> minus the single-spin excitation sum: pure pair correlations."""
    pair, _ = _pair_expectations(rho)
    return float((pair.sum() - np.trace(pair)).real)


def _jpjm_max(n_spins: int) -> float:
    j = n_spins / 2.0
    return j * (j + 1.0)


def _jpjm_corr_max(n_spins: int) -> float:
    return (n_spins / 2.0) ** 2


def jpjm_norm(rho: DensityMatrix) -> float:
    """<J+ J-> normalized by its maximum (6 for four spins)."""
    return jpjm(rho) / _jpjm_max(rho.space.n_spins)


def jpjm_corr_norm(rho: DensityMatrix) -> float:
    """Correlator normalized by its maximum (4 for four spins)."""
    return jpjm_corr(rho) / _jpjm_corr_max(rho.space.n_spins)


def g2(rho: DensityMatrix) -> float:
    """Second-order photon correlation <ad ad a a> / <ad a>^2; NaN on vacuum."""
    a, ad = build_mode_ops(rho.space)
    am, adm = a.matrix, ad.matrix
    n_mean = np.einsum("ij,ji->", adm @ am, rho.matrix).real
    if n_mean <= 1e-12:
        return float("nan")
    num = np.einsum("ij,ji->", adm @ adm @ am @ am, rho.matrix).real
    return float(num / n_mean**2)


def cooperativity(params: SystemParams, n_spins: int | None = None) -> float:
    """2 g^2 N_s / (kappa * Omega) with Omega the full offset-distribution width.

    Infinite when kappa or the width vanishes (fully cooperative limit).
    """
    ns = len(params.deltas) if n_spins is None else n_spins
    omega = (max(params.deltas) - min(params.deltas)) if params.deltas else 0.0
    if params.kappa <= 0.0 or omega <= 0.0:
        return float("inf")
    return float(2.0 * params.g**2 * ns / (params.kappa * omega))


# ---------------------------------------------------------------------------
# merit specification and report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeritSpec:
    """Which figure of merit an optimization maximizes, evaluated at t_f.

    kind 'fidelity' compares against `target` (optionally after tracing out
    the cavity from both states); kind 'cumulant' maximizes sign * C; kind
    'custom' wraps an arbitrary callable.
    """

    kind: str
    target: DensityMatrix | None = None
    trace_out_cavity: bool = False
    sign: int = 1
    custom: Callable[[DensityMatrix], float] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("fidelity", "cumulant", "custom"):
            raise ValueError(f"unknown merit kind {self.kind!r}")
        if self.kind == "fidelity":
            if self.target is None:
                raise ValueError("fidelity merit needs a target state")
            tr = np.trace(self.target.matrix)
            if abs(tr - 1.0) > 1e-8:
                raise ValueError("target state trace differs from 1")
        if self.kind == "cumulant" and self.sign not in (-1, 1):
            raise ValueError("cumulant sign must be +1 or -1")
        if self.kind == "custom" and self.custom is None:
            raise ValueError("custom merit needs a callable")

    def evaluate(self, rho: DensityMatrix) -> float:
        if self.kind == "fidelity":
            target = self.target
            state = rho
            if self.trace_out_cavity:
                state = partial_trace_cavity(state)
                if target.space.dim != state.space.dim:
                    target = partial_trace_cavity(target)
            return fidelity(state, target)
        if self.kind == "cumulant":
            return self.sign * cumulant_measure(rho)
        return float(self.custom(rho))


@dataclass
class MeritReport:
    """Scalar diagnostics of one state; unavailable entries stay None."""

    F: float | None = None
    C: float | None = None
    jpjm_norm: float | None = None
    jpjm_corr_norm: float | None = None
    g2: float | None = None
    cooperativity: float | None = None
    beyond_semi_classical: bool | None = None

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, float) and (math.isnan(v) or math.isinf(v)):
                out[k] = None
            else:
                out[k] = v
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


def merit_report(
    rho: DensityMatrix,
    params: SystemParams,
    target: DensityMatrix | None = None,
    trace_out_cavity: bool = False,
) -> MeritReport:
    """Evaluate the full diagnostic set on one state."""
    rep = MeritReport()
    if target is not None:
        spec = MeritSpec(
            kind="fidelity", target=target, trace_out_cavity=trace_out_cavity
        )
        rep.F = spec.evaluate(rho)
    if rho.space.spin_basis is SpinBasis.FULL_PRODUCT and rho.space.n_spins >= 1:
        rep.C = cumulant_measure(rho)
        rep.jpjm_norm = jpjm_norm(rho)
        rep.jpjm_corr_norm = jpjm_corr_norm(rho)
        rep.beyond_semi_classical = bool(rep.C > SEMI_CLASSICAL_THRESHOLD)
    if rho.space.fock_cutoff >= 1:
        val = g2(rho)
        rep.g2 = None if math.isnan(val) else val
    coop = cooperativity(params)
    rep.cooperativity = coop
    return rep
