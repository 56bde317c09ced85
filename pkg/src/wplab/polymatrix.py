"""Rectangular matrices of polynomials and the product ``Psi^T Phi``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .space_core import Poly


@dataclass(frozen=True, eq=False)
class PolyMatrix:
    entries: tuple[tuple[Poly, ...], ...]

    def __post_init__(self) -> None:
        if not self.entries or not self.entries[0]:
            raise ValueError("empty polynomial matrix")
        cols = len(self.entries[0])
        if any(len(r) != cols for r in self.entries):
            raise ValueError("ragged polynomial matrix")
        ds = {p.d for r in self.entries for p in r}
        if len(ds) != 1:
            raise ValueError(f"mixed space dimensions {sorted(ds)}")

    @classmethod
    def of(cls, rows: Sequence[Sequence[Poly]]) -> PolyMatrix:
        return cls(tuple(tuple(r) for r in rows))

    @classmethod
    def column(cls, polys: Sequence[Poly]) -> PolyMatrix:
        return cls.of([[p] for p in polys])

    @classmethod
    def row(cls, polys: Sequence[Poly]) -> PolyMatrix:
        return cls.of([list(polys)])

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0])

    @property
    def d(self) -> int:
        return self.entries[0][0].d

    def __getitem__(self, ij: tuple[int, int]) -> Poly:
        i, j = ij
        return self.entries[i][j]

    def transpose(self) -> PolyMatrix:
        return PolyMatrix.of([[self.entries[i][j] for i in range(self.rows)] for j in range(self.cols)])

    def __eq__(self, other) -> bool:
        return isinstance(other, PolyMatrix) and self.entries == other.entries

    __hash__ = None

    def to_json(self) -> list[list[list[dict]]]:
        return [[p.to_json() for p in r] for r in self.entries]


def psi_T_phi(psi: PolyMatrix, phi: PolyMatrix) -> PolyMatrix:
    """``(Psi^T Phi)_{ij} = sum_k phi_{kj} psi_{ki}``."""
    if psi.rows != phi.rows:
        raise ValueError(f"row counts differ: Psi has {psi.rows}, Phi has {phi.rows}")
    if psi.d != phi.d:
        raise ValueError("Psi and Phi live in different dimensions")
    out = []
    for i in range(psi.cols):
        row = []
        for j in range(phi.cols):
            acc = Poly.zero(psi.d)
            for k in range(psi.rows):
                acc = acc + phi[k, j] * psi[k, i]
            row.append(acc)
        out.append(row)
    return PolyMatrix.of(out)
