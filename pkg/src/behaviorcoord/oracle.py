"""Brute-force reference: exhaustive enumeration over an initialized table.

Shares the independent full checker and the objective function with the rest
of the system but none of the search or propagation code, so solver bugs
cannot hide behind it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .csp import Assignment, DomainTable, check_assignment
from .optimizer import ObjectiveVector, objective_vector

DEFAULT_CAP = 1_000_000


class OracleCapExceeded(RuntimeError):
    """The domain product is too large to enumerate."""


@dataclass
class OracleResult:
    best: Assignment | None
    best_vector: ObjectiveVector | None
    valid_count: int
    enumerated: int


def enumerate_optimal(table: DomainTable, state, cap: int = DEFAULT_CAP) -> OracleResult:
    """Try every assignment in the table's Cartesian product.

    Keeps those the full checker accepts and returns the lexicographic
    maximum of the objective vector; exact ties resolve to the first in
    enumeration order.
    """
    names = list(table.keys())
    size = math.prod(len(table[name]) for name in names)
    if size > cap:
        raise OracleCapExceeded(f"domain product {size} exceeds cap {cap}")

    catalog = state.catalog
    best: Assignment | None = None
    best_vector: ObjectiveVector | None = None
    valid = 0
    for combo in itertools.product(*(table[name] for name in names)):
        assignment = dict(zip(names, combo))
        if check_assignment(assignment, catalog, state.situation):
            continue
        valid += 1
        vector = objective_vector(assignment, state)
        if best_vector is None or vector > best_vector:
            best, best_vector = assignment, vector

    return OracleResult(best, best_vector, valid, size)
