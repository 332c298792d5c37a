"""Published reference pulse sequences, replayed as regression anchors.

Each entry bundles the control table with the system it was derived for.
The two-spin sequences regenerate their quoted fidelities; the four-spin
sequence is kept verbatim from its source table, which does not regenerate
its quoted merit figures under the model equations (see the bundled config
and the regression test that freezes what it actually produces).
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import SpaceSpec, SystemParams
from .dynamics import PulseSequence

__all__ = [
    "PublishedSequence",
    "SYMMETRIC_TWO_SPIN",
    "ANTISYMMETRIC_TWO_SPIN",
    "NONCLASSICAL_FOUR_SPIN",
    "PUBLISHED_SEQUENCES",
]


@dataclass(frozen=True)
class PublishedSequence:
    name: str
    n_spins: int
    kappa: float
    deltas: tuple[float, ...]
    rows: tuple[tuple[float, float, float, float], ...]
    target_label: str | None
    quoted: dict

    def sequence(self) -> PulseSequence:
        return PulseSequence.from_rows(self.rows)

    def params(self, g: float = 1.0) -> SystemParams:
        return SystemParams(g=g, kappa=self.kappa, deltas=self.deltas)

    def space(self, fock_cutoff: int) -> SpaceSpec:
        return SpaceSpec(n_spins=self.n_spins, fock_cutoff=fock_cutoff)


SYMMETRIC_TWO_SPIN = PublishedSequence(
    name="symmetric_two_spin",
    n_spins=2,
    kappa=0.0,
    deltas=(0.0, 0.0),
    rows=(
        (5.42, 4.41, 0.0, 5.51),
        (1.16, 1.34, 0.0, 0.15),
        (1.62, 4.33, 0.0, 3.18),
        (0.23, 6.28, 0.0, 4.24),
        (5.52, 2.68, 0.0, 2.17),
    ),
    target_label="0,S",
    quoted={"F": 0.998},
)

ANTISYMMETRIC_TWO_SPIN = PublishedSequence(
    name="antisymmetric_two_spin",
    n_spins=2,
    kappa=0.0,
    deltas=(-1.0, 1.0),
    rows=(
        (2.49, 4.69, 0.0, 2.40),
        (3.06, 3.16, 0.0, 4.83),
        (1.62, 5.61, 0.0, 2.38),
        (4.77, 1.57, 0.0, 0.00),
        (4.74, 3.16, 0.0, 1.21),
    ),
    target_label="0,A",
    quoted={"F": 0.99998},
)

NONCLASSICAL_FOUR_SPIN = PublishedSequence(
    name="nonclassical_four_spin",
    n_spins=4,
    kappa=1.0,
    deltas=(-1.0, -0.5, 0.5, 1.0),
    rows=(
        (3.14, 0.36, 0.5, 1.17),
        (3.14, -3.14, 0.5, 0.40),
        (3.14, -2.82, 0.5, 0.01),
        (-3.14, 2.84, 0.5, 0.63),
        (1.55, 1.66, 0.5, 0.35),
        (3.14, 3.14, -0.06, 0.00),
        (0.99, -3.02, 0.5, 0.00),
    ),
    target_label=None,
    quoted={"C": 0.74, "jpjm_norm": 0.87, "jpjm_corr_norm": 0.76, "g2": 1.84},
)

PUBLISHED_SEQUENCES = {
    s.name: s
    for s in (SYMMETRIC_TWO_SPIN, ANTISYMMETRIC_TWO_SPIN, NONCLASSICAL_FOUR_SPIN)
}
