"""Token-level F1 between entity spans and optimal one-to-one entity matching.

Spans are whitespace-tokenized. The F1 of a pair reduces to
``2w / (n + m)`` (``w`` the longest contiguous token overlap, ``n`` and
``m`` the span lengths), so the assignment is solved on exact integer
weights scaled by a common denominator. Exact weights make ties real
ties, which the lexicographic tie-break below depends on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import EntityTriple


def tokenize(text: str) -> list[str]:
    return text.split()


def longest_contiguous_overlap(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common run of tokens shared by ``a`` and ``b``."""
    if not a or not b:
        return 0
    best = 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best:
                    best = cur[j]
        prev = cur
    return best


@dataclass(frozen=True)
class TokenF1:
    overlap: int
    n_pred: int
    n_gold: int

    @property
    def precision(self) -> float:
        return self.overlap / self.n_pred if self.n_pred else 0.0

    @property
    def recall(self) -> float:
        return self.overlap / self.n_gold if self.n_gold else 0.0

    @property
    def exact(self) -> Fraction:
        """The F1 value as an exact fraction."""
        if self.overlap == 0:
            return Fraction(0)
        return Fraction(2 * self.overlap, self.n_pred + self.n_gold)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        if p + r == 0:
            return 0.0
        return 2 * p * r / (p + r)


def token_f1(pred: str, gold: str) -> TokenF1:
    pt, gt = tokenize(pred), tokenize(gold)
    if not pt or not gt:
        return TokenF1(0, len(pt), len(gt))
    return TokenF1(longest_contiguous_overlap(pt, gt), len(pt), len(gt))


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int, TokenF1], ...]
    n_pred: int
    n_gold: int
    unmatched_pred: tuple[int, ...] = field(init=False)
    unmatched_gold: tuple[int, ...] = field(init=False)

    def __post_init__(self) -> None:
        used_p = {i for i, _, _ in self.pairs}
        used_g = {j for _, j, _ in self.pairs}
        object.__setattr__(self, "unmatched_pred", tuple(i for i in range(self.n_pred) if i not in used_p))
        object.__setattr__(self, "unmatched_gold", tuple(j for j in range(self.n_gold) if j not in used_g))

    @property
    def k(self) -> int:
        return len(self.pairs)

    def total_f1(self) -> Fraction:
        return sum((s.exact for _, _, s in self.pairs), Fraction(0))


def _hungarian_max(weights: list[list[int]]) -> int:
    """Maximum total weight of a partial one-to-one assignment.

    ``weights`` is rectangular with non-negative integer entries. The
    matrix is zero-padded to square, so leaving a row unmatched costs
    nothing. Shortest augmenting path variant with potentials, O(n^3).
    """
    rows = len(weights)
    cols = len(weights[0]) if rows else 0
    n = max(rows, cols)
    if n == 0:
        return 0
    big = max((w for r in weights for w in r), default=0)
    # cost = big - weight keeps every entry non-negative
    cost = [[big] * (n + 1) for _ in range(n + 1)]
    for i in range(rows):
        ci = cost[i + 1]
        wi = weights[i]
        for j in range(cols):
            ci[j + 1] = big - wi[j]
    inf = math.inf
    u = [0] * (n + 1)
    v = [0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            ci0 = cost[i0]
            ui0 = u[i0]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = ci0[j] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    total_cost = sum(cost[p[j]][j] for j in range(1, n + 1))
    return n * big - total_cost


def _submatrix(weights, rows, cols):
    return [[weights[i][j] for j in cols] for i in rows]


def optimal_assignment(weights: list[list[int]]) -> list[tuple[int, int]]:
    """Optimal positive-weight pairs, lexicographically smallest among ties.

    Rows are fixed in index order; each row takes the smallest column
    index that still admits an optimal completion, and is left
    unmatched only when no positive-weight column does.
    """
    rows = len(weights)
    cols = len(weights[0]) if rows else 0
    if rows == 0 or cols == 0:
        return []
    best = _hungarian_max(weights)
    pairs: list[tuple[int, int]] = []
    free_cols = list(range(cols))
    remaining = best
    for i in range(rows):
        rest_rows = list(range(i + 1, rows))
        chosen = None
        for j in free_cols:
            w = weights[i][j]
            if w <= 0 or w > remaining:
                continue
            others = [c for c in free_cols if c != j]
            sub = _submatrix(weights, rest_rows, others) if rest_rows and others else []
            if w + _hungarian_max(sub) == remaining:
                chosen = j
                break
        if chosen is not None:
            pairs.append((i, chosen))
            free_cols.remove(chosen)
            remaining -= weights[i][chosen]
    return pairs


def match_entities(preds: Sequence[EntityTriple | str], golds: Sequence[EntityTriple | str]) -> Matching:
    """Hungarian matching of predicted to gold entities on token-level F1.

    Assigned pairs with no token overlap are not part of the matched set.
    Among assignments with the same total F1, pairs whose type and
    location also agree are preferred; remaining ties go to the
    lexicographically smallest assignment.
    """
    ptext = [p.entity if isinstance(p, EntityTriple) else p for p in preds]
    gtext = [g.entity if isinstance(g, EntityTriple) else g for g in golds]
    scores = [[token_f1(a, b) for b in gtext] for a in ptext]
    if not ptext or not gtext:
        return Matching((), len(ptext), len(gtext))
    denom = 1
    for row in scores:
        for s in row:
            if s.overlap:
                denom = math.lcm(denom, s.exact.denominator)
    # the agreement bonus sums to at most min(n, m) < scale, so it only breaks F1 ties
    scale = min(len(ptext), len(gtext)) + 1
    weights = []
    for i, row in enumerate(scores):
        wrow = []
        for j, s in enumerate(row):
            w = int(s.exact * denom) * scale
            if w and _agree(preds[i], golds[j]):
                w += 1
            wrow.append(w)
        weights.append(wrow)
    pairs = tuple((i, j, scores[i][j]) for i, j in optimal_assignment(weights))
    return Matching(pairs, len(ptext), len(gtext))


def _agree(p, g) -> bool:
    return isinstance(p, EntityTriple) and isinstance(g, EntityTriple) and p.etype == g.etype and p.loc == g.loc
