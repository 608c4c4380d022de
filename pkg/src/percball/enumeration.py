"""Exact law comparison on a tiny window by exhaustive enumeration.

The particle record read off cross-model distances should be distributed
exactly like the parallel-update particle system with the same jump
probability.  On a 3-column window with edge rows -5..5 and eps = 1/2
this is checkable exactly: all 2^22 horizontal-edge configurations are
equally likely, so the distribution of the (time 1, time 2) occupation
pair over sites -5..5 is a table of dyadic rationals, and the direct
dynamics produce the same table by branching over mover coin flips.

The distance sweep runs on rows -9..9 so that the extracted sites are
exact regardless of the configuration; edges outside the enumerated rows
cannot influence the record (the dynamics only read edges at
particle-below-hole sites, which stay within rows -1..1 here), and this
is verified by enumerating with those edges once all open and once all
closed.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .backend import njit, select

N_EDGE_COLS = 2  # vertex columns 0..2
EDGE_ROW_LO, EDGE_ROW_HI = -5, 5  # enumerated edge rows (11 per column)
SWEEP_ROW_LO, SWEEP_ROW_HI = -9, 9
N_EDGE_ROWS = EDGE_ROW_HI - EDGE_ROW_LO + 1
N_BITS = N_EDGE_COLS * N_EDGE_ROWS
_ROWS = SWEEP_ROW_HI - SWEEP_ROW_LO + 1
_ORG = -SWEEP_ROW_LO
_INF = np.int32(1 << 20)


@njit
def _law_keys_loop(outside_open):
    total = 1 << N_BITS
    keys = np.empty(total, dtype=np.uint32)
    rows = _ROWS
    d_prev = np.empty(rows, dtype=np.int32)
    d_cur = np.empty(rows, dtype=np.int32)
    d0 = np.empty(rows, dtype=np.int32)
    for r in range(rows):
        d0[r] = abs(r - _ORG)
    lo_off = _ORG + EDGE_ROW_LO
    hi_off = _ORG + EDGE_ROW_HI
    for cfg in range(total):
        key = np.uint32(0)
        for r in range(rows):
            d_prev[r] = d0[r]
        for col in range(N_EDGE_COLS):
            base = col * N_EDGE_ROWS
            for r in range(rows):
                if lo_off <= r <= hi_off:
                    open_edge = (cfg >> (base + (r - lo_off))) & 1 == 1
                else:
                    open_edge = outside_open
                best = d_prev[r] + 1 if open_edge else _INF
                if r > 0 and d_prev[r - 1] + 2 < best:
                    best = d_prev[r - 1] + 2
                if r + 1 < rows and d_prev[r + 1] + 2 < best:
                    best = d_prev[r + 1] + 2
                d_cur[r] = best
            for r in range(1, rows):
                if d_cur[r - 1] + 1 < d_cur[r]:
                    d_cur[r] = d_cur[r - 1] + 1
            for r in range(rows - 2, -1, -1):
                if d_cur[r + 1] + 1 < d_cur[r]:
                    d_cur[r] = d_cur[r + 1] + 1
            for b in range(N_EDGE_ROWS):
                r = lo_off + b
                if d_cur[r] < d_cur[r - 1]:
                    key |= np.uint32(1) << np.uint32(base + b)
            for r in range(rows):
                d_prev[r] = d_cur[r]
        keys[cfg] = key
    return keys


def _law_keys_vec(outside_open):
    total = 1 << N_BITS
    chunk = 1 << 16
    keys = np.empty(total, dtype=np.uint32)
    rows = _ROWS
    lo_off = _ORG + EDGE_ROW_LO
    d0 = np.abs(np.arange(rows, dtype=np.int32) - _ORG)
    for start in range(0, total, chunk):
        ids = np.arange(start, start + chunk, dtype=np.uint32)
        d_prev = np.broadcast_to(d0, (chunk, rows)).copy()
        key = np.zeros(chunk, dtype=np.uint32)
        for col in range(N_EDGE_COLS):
            base = col * N_EDGE_ROWS
            open_e = np.full((chunk, rows), outside_open, dtype=bool)
            for b in range(N_EDGE_ROWS):
                open_e[:, lo_off + b] = (ids >> np.uint32(base + b)) & 1 == 1
            cand = np.where(open_e, d_prev + np.int32(1), _INF)
            cand[:, 1:] = np.minimum(cand[:, 1:], d_prev[:, :-1] + np.int32(2))
            cand[:, :-1] = np.minimum(cand[:, :-1], d_prev[:, 1:] + np.int32(2))
            r_idx = np.arange(rows, dtype=np.int32)
            up = np.minimum.accumulate(cand - r_idx, axis=1) + r_idx
            down = np.minimum.accumulate((cand + r_idx)[:, ::-1], axis=1)[:, ::-1] - r_idx
            d_cur = np.minimum(up, down)
            for b in range(N_EDGE_ROWS):
                r = lo_off + b
                bit = (d_cur[:, r] < d_cur[:, r - 1]).astype(np.uint32)
                key |= bit << np.uint32(base + b)
            d_prev = d_cur
        keys[start : start + chunk] = key
    return keys


_law_keys = select(_law_keys_loop, _law_keys_vec)


def cross_law_table(outside_open: bool = True) -> dict[int, Fraction]:
    """Exact trajectory distribution from edge enumeration at eps = 1/2.

    Keys pack the time-1 and time-2 occupations of sites -5..5 into 22
    bits; values are exact dyadic probabilities summing to 1.
    """
    keys = _law_keys(outside_open)
    uniq, counts = np.unique(keys, return_counts=True)
    total = 1 << N_BITS
    return {int(k): Fraction(int(c), total) for k, c in zip(uniq, counts)}


def _movers(state: tuple[bool, ...]) -> list[int]:
    return [i for i in range(len(state) - 1) if state[i] and not state[i + 1]]


def direct_law_table(eps: Fraction = Fraction(1, 2)) -> dict[int, Fraction]:
    """Exact trajectory distribution of the parallel dynamics.

    Two steps from the step profile on rows -9..9 (ample margin for two
    steps), branching over every subset of movers; the key packs the same
    two-column window as :func:`cross_law_table`.
    """
    sites = list(range(SWEEP_ROW_LO + 1, SWEEP_ROW_HI + 1))
    start = tuple(j <= 0 for j in sites)

    def step_outcomes(state):
        movers = _movers(state)
        out = []
        for mask in range(1 << len(movers)):
            prob = Fraction(1)
            new = list(state)
            for b, idx in enumerate(movers):
                if (mask >> b) & 1:
                    prob *= eps
                    new[idx] = False
                    new[idx + 1] = True
                else:
                    prob *= 1 - eps
            out.append((tuple(new), prob))
        return out

    def window_bits(state) -> int:
        bits = 0
        for b in range(N_EDGE_ROWS):
            j = EDGE_ROW_LO + b
            if state[sites.index(j)]:
                bits |= 1 << b
        return bits

    table: dict[int, Fraction] = {}
    for y1, p1 in step_outcomes(start):
        k1 = window_bits(y1)
        for y2, p2 in step_outcomes(y1):
            key = k1 | (window_bits(y2) << N_EDGE_ROWS)
            table[key] = table.get(key, Fraction(0)) + p1 * p2
    return table


def law_tables_match() -> bool:
    """Exact equality of the enumerated and direct trajectory laws.

    Also checks that the non-enumerated outside rows are irrelevant by
    running the edge enumeration with them all open and all closed.
    """
    via_open = cross_law_table(outside_open=True)
    via_closed = cross_law_table(outside_open=False)
    if via_open != via_closed:
        return False
    return via_open == direct_law_table()
