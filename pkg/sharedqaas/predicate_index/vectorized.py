"""numpy evaluation of trees and predicates over whole columns, for exhaustive sweeps."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..errors import MissingAttributeError
from ..relational_ir import Atom, ColumnRef, PredicateNF, like_regex
from .tree import LinearFallback, PredicateIndexTree, ResultSet, Split


def _column(columns: Mapping[ColumnRef, np.ndarray], attribute: ColumnRef) -> np.ndarray:
    try:
        return columns[attribute]
    except KeyError:
        raise MissingAttributeError(f"no column values for {attribute}") from None


def atom_mask(atom: Atom, values: np.ndarray) -> np.ndarray:
    match atom.op:
        case "=":
            mask = values == atom.value
        case "<":
            mask = values < atom.value
        case "<=":
            mask = values <= atom.value
        case ">":
            mask = values > atom.value
        case ">=":
            mask = values >= atom.value
        case "BETWEEN":
            mask = (values >= atom.values[0]) & (values <= atom.values[1])
        case "IN":
            mask = np.isin(values, np.array(atom.values, dtype=values.dtype))
        case "LIKE":
            pattern = like_regex(atom.value)
            mask = np.fromiter((pattern.fullmatch(v) is not None for v in values), dtype=bool, count=len(values))
        case _:
            raise ValueError(f"Unknown operator: {atom.op}")
    return np.asarray(mask, dtype=bool)


def predicate_mask(predicate: PredicateNF, columns: Mapping[ColumnRef, np.ndarray], n_rows: int) -> np.ndarray:
    result = np.zeros(n_rows, dtype=bool)
    for conjunction in predicate.disjuncts:
        term = np.ones(n_rows, dtype=bool)
        for atom in conjunction:
            term &= atom_mask(atom, _column(columns, atom.column))
        result |= term
    return result


def eval_linear_matrix(
        preds: Mapping[int, PredicateNF], columns: Mapping[ColumnRef, np.ndarray], n_rows: int
) -> dict[int, np.ndarray]:
    """Per query, the boolean mask of rows its predicate accepts."""
    return {q: predicate_mask(p, columns, n_rows) for q, p in preds.items()}


def eval_tree_matrix(
        tree: PredicateIndexTree,
        columns: Mapping[ColumnRef, np.ndarray],
        n_rows: int,
        query_ids: list[int],
) -> dict[int, np.ndarray]:
    """Per query, the boolean mask of rows the tree routes to a leaf accepting that query."""
    result = {q: np.zeros(n_rows, dtype=bool) for q in query_ids}

    def visit(node: PredicateIndexTree, mask: np.ndarray) -> None:
        if not mask.any():
            return
        match node:
            case Split():
                values = _column(columns, node.attribute)
                below = np.asarray(values < node.value if node.comparison == "<" else values <= node.value, dtype=bool)
                visit(node.left, mask & below)
                visit(node.right, mask & ~below)
            case ResultSet():
                for q in node.queries:
                    result[q] |= mask
            case LinearFallback():
                for q in node.known:
                    result[q] |= mask
                for q, residual in node.residuals:
                    result[q] |= mask & predicate_mask(residual, columns, n_rows)

    visit(tree, np.ones(n_rows, dtype=bool))
    return result
