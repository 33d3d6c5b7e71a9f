"""Discrete-time reference simulator of the PE array, used as the cycle oracle.

Every cycle moves data between explicit registers: WS streams skewed inputs
left-to-right while partial sums hop down registered column links, with a
shadow weight bank that fills one row per cycle; OS broadcasts one
input/weight vector pair per cycle into stationary accumulators and then
drains one output row per cycle. Cycle counts emerge from the register
activity rather than from closed forms, and the computed product is checked
against the reference GEMM before the count is returned.

Intended for small instances; the exhaustive cross-check against the
analytical models runs arrays up to 8x8.
"""

from __future__ import annotations

import numpy as np

from lorasim.errors import InvariantError
from lorasim.simcore import ArrayConfig, Dataflow, tile_extents
from lorasim.workload import GemmOp


def _tile_offsets(extents: tuple[int, ...]) -> list[int]:
    offs, acc = [], 0
    for e in extents:
        offs.append(acc)
        acc += e
    return offs


def _ws_cycles(x: list[list[float]], w: list[list[float]], m: int, k: int, n: int,
               rows: int, cols: int, double_buffered: bool,
               out: list[list[float]]) -> int:
    k_ext = tile_extents(k, rows)
    n_ext = tile_extents(n, cols)
    k_off = _tile_offsets(k_ext)
    n_off = _tile_offsets(n_ext)
    tiles = [(k0, kt, n0, nt)
             for n0, nt in zip(n_off, n_ext)
             for k0, kt in zip(k_off, k_ext)]

    def weight_rows(tile):
        k0, kt, n0, nt = tile
        return [[w[k0 + kk][n0 + nn] for nn in range(nt)] for kk in range(kt)]

    cycles = 0
    # First tile loads with nothing to hide behind: one weight row per cycle.
    shadow = []
    for row in weight_rows(tiles[0]):
        shadow.append(row)
        cycles += 1

    for ti, (k0, kt, n0, nt) in enumerate(tiles):
        active = shadow
        pending = weight_rows(tiles[ti + 1]) if ti + 1 < len(tiles) else []
        shadow = []

        x_reg = [[0.0] * nt for _ in range(kt)]
        p_reg = [[0.0] * nt for _ in range(kt)]
        collected = 0
        t = 0
        while collected < m * nt:
            new_x = [[0.0] * nt for _ in range(kt)]
            new_p = [[0.0] * nt for _ in range(kt)]
            for kk in range(kt):
                for nn in range(nt):
                    if nn == 0:
                        mm_in = t - kk  # row kk enters kk cycles late (skew)
                        x_in = x[mm_in][k0 + kk] if 0 <= mm_in < m else 0.0
                    else:
                        x_in = x_reg[kk][nn - 1]
                    p_in = p_reg[kk - 1][nn] if kk > 0 else 0.0
                    p_out = p_in + x_in * active[kk][nn]
                    new_x[kk][nn] = x_in
                    new_p[kk][nn] = p_out
                    if kk == kt - 1:
                        mm = t - (kt - 1) - nn
                        if 0 <= mm < m:
                            out[mm][n0 + nn] += p_out
                            collected += 1
            x_reg, p_reg = new_x, new_p
            cycles += 1
            t += 1
            if double_buffered and pending:
                shadow.append(pending.pop(0))
        # Preload cycles the stream could not hide (all of them without
        # double buffering).
        while pending:
            shadow.append(pending.pop(0))
            cycles += 1
    return cycles


def _os_cycles(x: list[list[float]], w: list[list[float]], m: int, k: int, n: int,
               rows: int, cols: int, out: list[list[float]]) -> int:
    m_ext = tile_extents(m, rows)
    n_ext = tile_extents(n, cols)
    cycles = 0
    for m0, mt in zip(_tile_offsets(m_ext), m_ext):
        for n0, nt in zip(_tile_offsets(n_ext), n_ext):
            acc = [[0.0] * nt for _ in range(mt)]
            for kk in range(k):  # one broadcast pair per cycle
                xcol = [x[m0 + i][kk] for i in range(mt)]
                wrow = [w[kk][n0 + j] for j in range(nt)]
                for i in range(mt):
                    xi = xcol[i]
                    row = acc[i]
                    for j in range(nt):
                        row[j] += xi * wrow[j]
                cycles += 1
            for i in range(mt):  # drain one row per cycle, same accumulator set
                for j in range(nt):
                    out[m0 + i][n0 + j] = acc[i][j]
                cycles += 1
    return cycles


def reference_event_sim(op: GemmOp, array: ArrayConfig, dataflow: Dataflow,
                        double_buffered: bool = True) -> int:
    """Run the register-level simulation and return its cycle count.

    Raises InvariantError if the simulated array does not reproduce the
    reference matrix product exactly (the data is integer-valued, so the
    comparison is exact).
    """
    m, k, n = op.m, op.k, op.n
    rng = np.random.default_rng(1_000_003 * m + 1_009 * k + n)
    x = rng.integers(-4, 5, size=(m, k)).astype(float)
    w = rng.integers(-4, 5, size=(k, n)).astype(float)
    out = [[0.0] * n for _ in range(m)]
    if dataflow == Dataflow.WS:
        cycles = _ws_cycles(x.tolist(), w.tolist(), m, k, n,
                            array.rows, array.cols, double_buffered, out)
    else:
        cycles = _os_cycles(x.tolist(), w.tolist(), m, k, n,
                            array.rows, array.cols, out)
    expect = x @ w
    if not np.array_equal(np.asarray(out), expect):
        raise InvariantError(
            f"event simulation produced a wrong product for {m}x{k}x{n} {dataflow.value}"
        )
    return cycles
