"""Compiled inner loop for Brownian segment integration.

Pieces are the intervals between compound-Poisson jump epochs inside a
segment.  Each piece is integrated by the trapezoid rule on an equal
subdivision with step <= h; the Gaussian increments are consumed from a
pre-drawn flat array so all randomness stays with the numpy generator.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(nogil=True, cache=False)
def brownian_pieces(
    draw_ofs,      # int64[n_draws+1]: piece range of each draw
    piece_dur,     # float64[n_pieces]
    jump_after,    # float64[n_pieces]: jump applied at the end of the piece (0 on last)
    piece_steps,   # int64[n_pieces]: trapezoid steps per piece
    norm_ofs,      # int64[n_pieces]: offset of each piece's normals
    normals,       # float64[total_steps]
    drift,
    sigma,
    out_end,       # float64[n_draws]
    out_integ,     # float64[n_draws]
    out_sup,       # float64[n_draws]
    want_sup,      # bool
):
    n_draws = draw_ofs.shape[0] - 1
    for i in range(n_draws):
        xi = 0.0
        integ = 0.0
        sup = 0.0
        for p in range(draw_ofs[i], draw_ofs[i + 1]):
            d = piece_dur[p]
            nsteps = piece_steps[p]
            if d > 0.0 and nsteps > 0:
                dt = d / nsteps
                sdt = sigma * math.sqrt(dt)
                mdt = drift * dt
                e_prev = math.exp(xi)
                base = norm_ofs[p]
                for k in range(nsteps):
                    xi = xi + mdt + sdt * normals[base + k]
                    e_new = math.exp(xi)
                    integ += 0.5 * (e_prev + e_new) * dt
                    e_prev = e_new
                    if want_sup and xi > sup:
                        sup = xi
            xi += jump_after[p]
            if want_sup and xi > sup:
                sup = xi
        out_end[i] = xi
        out_integ[i] = integ
        out_sup[i] = sup
