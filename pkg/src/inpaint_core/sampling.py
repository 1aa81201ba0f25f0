"""
Frame index sampling for sliding-window inference and training samples.
"""
from __future__ import annotations

import logging
from typing import List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)


def local_window(length: int, t: int, radius: int) -> List[int]:
    """2 * radius + 1 consecutive indices around t, shifted (not shrunk) at the sequence ends.

    Sequences shorter than the window return every index.
    """
    if not 0 <= t < length:
        raise IndexError(f"target {t} outside [0, {length})")
    size = 2 * radius + 1
    if length <= size:
        return list(range(length))
    start = min(max(t - radius, 0), length - size)
    return list(range(start, start + size))


def global_indices(length: int, interval: int, exclude=()) -> List[int]:
    """Multiples of ``interval`` from 0 within [0, length), minus ``exclude``."""
    excluded = set(exclude)
    return [g for g in range(0, length, max(1, interval)) if g not in excluded]


def sliding_window_sampler(length: int, t: int, radius: int, interval: int) -> Tuple[List[int], List[int]]:
    """(local indices, global indices) for target frame t."""
    local = local_window(length, t, radius)
    return local, global_indices(length, interval, exclude=local)


def window_targets(length: int) -> List[int]:
    """Targets visited by inference: every frame exactly once, in order."""
    return list(range(length))


def training_indices(length: int, rng: np.random.Generator, radius: int, interval: int,
                     num_global: int) -> Tuple[List[int], List[int]]:
    """Random window position with up to ``num_global`` of its global frames (sorted)."""
    t = int(rng.integers(0, length))
    local, candidates = sliding_window_sampler(length, t, radius, interval)
    if len(candidates) > num_global:
        picked = rng.choice(len(candidates), size=num_global, replace=False)
        candidates = sorted(candidates[i] for i in picked)
    return local, candidates


def lafc_flow_indices(num_flows: int, t: int, radius: int, interval: int) -> List[int]:
    """Indices of the 2n+1 flows feeding the flow-completion network for target flow t (clamped)."""
    if not 0 <= t < num_flows:
        raise IndexError(f"target flow {t} outside [0, {num_flows})")
    return [min(max(t + k * interval, 0), num_flows - 1) for k in range(-radius, radius + 1)]


def target_position(local: List[int], t: int) -> int:
    return local.index(t)


def clip_choice(rng: np.random.Generator, count: int, exclude: Optional[int] = None) -> int:
    index = int(rng.integers(0, count))
    if exclude is not None and count > 1 and index == exclude:
        index = (index + 1) % count
    return index
