from dataclasses import dataclass
import itertools
import logging
from typing import Callable

from .hyperreal import GeneratorRegistry, Hyperreal, MagnitudeClass


logger = logging.getLogger(__name__)

# Table symbols: the Zero class is counted as infinitesimal, as 0 is infinitesimal.
EPS = "eps"
APP = "a"
INF = "inf"
AMBIGUOUS = "?"
SYMBOLS = (EPS, APP, INF)

_SYMBOL_OF_CLASS = {
    MagnitudeClass.ZERO: EPS,
    MagnitudeClass.INFINITESIMAL: EPS,
    MagnitudeClass.APPRECIABLE: APP,
    MagnitudeClass.INFINITE: INF,
}

# Reference tables, rows and columns in SYMBOLS order. The division table
# reads column / row.
REFERENCE_TABLES: dict[str, tuple[tuple[str, ...], ...]] = {
    "add": ((EPS, APP, INF), (APP, AMBIGUOUS, INF), (INF, INF, AMBIGUOUS)),
    "mul": ((EPS, EPS, AMBIGUOUS), (EPS, APP, INF), (AMBIGUOUS, INF, INF)),
    "div": ((AMBIGUOUS, INF, INF), (EPS, APP, INF), (EPS, EPS, AMBIGUOUS)),
}


@dataclass(frozen=True, slots=True)
class CellWitness:
    left: Hyperreal
    right: Hyperreal
    result: Hyperreal
    magnitude: MagnitudeClass


@dataclass(frozen=True, slots=True)
class TableCell:
    row: str
    column: str
    symbol: str
    witnesses: tuple[CellWitness, ...]

    def classes(self) -> set[MagnitudeClass]:
        return {w.magnitude for w in self.witnesses}


@dataclass(frozen=True, slots=True)
class InteractionTable:
    operation: str
    cells: tuple[tuple[TableCell, ...], ...]

    def symbols(self) -> tuple[tuple[str, ...], ...]:
        return tuple(tuple(cell.symbol for cell in row) for row in self.cells)

    def cell(self, row: str, column: str) -> TableCell:
        return self.cells[SYMBOLS.index(row)][SYMBOLS.index(column)]

    def render(self) -> str:
        width = 5
        header = "".join(s.center(width) for s in (self.operation, *SYMBOLS))
        lines = [header]
        for symbol, row in zip(SYMBOLS, self.cells):
            lines.append("".join(s.center(width) for s in (symbol, *(cell.symbol for cell in row))))
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "operation": self.operation,
            "rows": list(SYMBOLS),
            "columns": list(SYMBOLS),
            "cells": [[{"symbol": cell.symbol,
                        "classes": sorted(c.value for c in cell.classes())} for cell in row]
                      for row in self.cells],
        }


def class_witnesses(registry: GeneratorRegistry) -> dict[str, tuple[Hyperreal, ...]]:
    """Concrete members of each table class, both signs and several orders."""
    eps = registry.generator(0)
    one = registry.one()
    omega = eps.reciprocal()
    return {
        EPS: (eps, -eps, eps ** 2, 2 * eps),
        APP: (one, -one, registry.constant(3), one + eps),
        INF: (omega, -omega, omega ** 2, omega + 1),
    }


def _operations() -> dict[str, Callable[[Hyperreal, Hyperreal], list[Hyperreal]]]:
    return {
        "add": lambda x, y: [x + y, x - y],
        "mul": lambda x, y: [x * y],
        "div": lambda row, column: [column / row],
    }


def interaction_table(operation: str, registry: GeneratorRegistry) -> InteractionTable:
    """Class-interaction table of an operation computed from witness instantiations.

    A cell whose witnesses land in more than one class symbol is marked "?".
    """
    operations = _operations()
    if operation not in operations:
        raise ValueError(f"operation must be one of {sorted(operations)}. Got {operation}")
    apply = operations[operation]
    witnesses = class_witnesses(registry)
    rows = []
    for row in SYMBOLS:
        cells = []
        for column in SYMBOLS:
            cell_witnesses = []
            for x, y in itertools.product(witnesses[row], witnesses[column]):
                for result in apply(x, y):
                    cell_witnesses.append(CellWitness(x, y, result, result.magnitude_class()))
            symbols = {_SYMBOL_OF_CLASS[w.magnitude] for w in cell_witnesses}
            symbol = symbols.pop() if len(symbols) == 1 else AMBIGUOUS
            cells.append(TableCell(row, column, symbol, tuple(cell_witnesses)))
        rows.append(tuple(cells))
    logger.debug(f"Computed {operation} interaction table.")
    return InteractionTable(operation, tuple(rows))
