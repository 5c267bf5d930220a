"""Pure-Python event loop; same arithmetic and random stream as the compiled core.

Categories c < N are right-jump attempts of particle c (0-based, rightmost first);
c >= N are left moves of particle c - N. Positions are strictly decreasing.
"""
from __future__ import annotations

import math

import numpy as np

TWO_M53 = 1.0 / 9007199254740992.0
BACKEND = "python"


def _uniform(raw: int) -> float:
    return (raw >> 11) * TWO_M53


def _category(raw: int, prob, alias, m: int) -> int:
    y = _uniform(raw) * m
    j = int(y)
    return j if y - j < prob[j] else int(alias[j])


def _apply(x, n: int, c: int) -> int:
    """Apply category c; returns the displaced block length (0 if blocked)."""
    if c < n:
        i = c
        if i == 0 or x[i - 1] > x[i] + 1:
            x[i] += 1
            return 1
        return 0
    i = c - n
    x[i] -= 1
    j = i
    while j + 1 < n and x[j + 1] == x[j]:
        x[j + 1] -= 1
        j += 1
    return j - i + 1


def advance(x: np.ndarray, prob: np.ndarray, alias: np.ndarray, n_events: int, bitgen) -> int:
    """Apply n_events uniformized events in place; returns the number that moved particles."""
    n, m = len(x), len(prob)
    raws = bitgen.random_raw(n_events) if n_events else ()
    xs = x.tolist()
    pr, al = prob.tolist(), alias.tolist()
    moved = 0
    for raw in (raws.tolist() if n_events else ()):
        if _apply(xs, n, _category(raw, pr, al, m)):
            moved += 1
    x[:] = xs
    return moved


def advance_uniform(x: np.ndarray, lo: int, p_right: float, n_events: int, bitgen) -> int:
    """Unit speeds on the active particles lo..n-1 (particle lo-1, if any, is frozen and
    acts as a wall): particle uniform, right move with probability p_right, one draw per event."""
    n = len(x)
    active = n - lo
    xs = x.tolist()
    moved = 0
    for raw in (bitgen.random_raw(n_events).tolist() if n_events else ()):
        y = _uniform(raw) * active
        i = int(y)
        if _apply(xs, n, lo + i if y - i < p_right else lo + i + n):
            moved += 1
    x[:] = xs
    return moved


def advance_epochs(x: np.ndarray, los: np.ndarray, counts: np.ndarray, p_right: float, bitgen) -> int:
    """advance_uniform over consecutive epochs; epoch k has active set los[k].. and counts[k] events."""
    moved = 0
    for lo, cnt in zip(los.tolist(), counts.tolist()):
        moved += advance_uniform(x, lo, p_right, cnt, bitgen)
    return moved


def run_logged(x: np.ndarray, prob: np.ndarray, alias: np.ndarray, t0: float, t_end: float,
               total_rate: float, bitgen):
    """Gillespie run on [t0, t_end] with exponential waiting times; returns the
    effective events as arrays (time, particle, direction, block)."""
    n, m = len(x), len(prob)
    xs = x.tolist()
    pr, al = prob.tolist(), alias.tolist()
    times, parts, dirs, blocks = [], [], [], []
    t = t0
    while True:
        t += -math.log1p(-_uniform(int(bitgen.random_raw()))) / total_rate
        if t > t_end:
            break
        c = _category(int(bitgen.random_raw()), pr, al, m)
        b = _apply(xs, n, c)
        if b:
            times.append(t)
            parts.append(c if c < n else c - n)
            dirs.append(1 if c < n else -1)
            blocks.append(b)
    x[:] = xs
    return (np.array(times, dtype=float), np.array(parts, dtype=np.int64),
            np.array(dirs, dtype=np.int8), np.array(blocks, dtype=np.int64))
