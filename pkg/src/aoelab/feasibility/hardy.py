"""Search for two-qubit Hardy configurations.

Designated cells (Chidi's qubit first):
  zero:   C=+1,D=+1   A=+1,D=-1   C=-1,B=+1
  target: A=+1,B=+1  (maximised)

Given the four angles, the three zero conditions are three linear constraints
on a real 4-vector, so the state is their common null vector. With the state
fixed instead, choosing the Chidi angle determines the other three.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from aoelab import quantum as q
from aoelab.feasibility.possibilistic import ZERO_THRESHOLD

TWO_PI = 2 * math.pi
ANGLE_NAMES = ("c", "d", "a", "b")
ZERO_CELLS = (("C", "D", 1, 1), ("A", "D", 1, -1), ("C", "B", -1, 1))
TARGET_CELL = ("A", "B", 1, 1)
HARDY_MAXIMUM = (5 * math.sqrt(5) - 11) / 2


@dataclass(frozen=True)
class HardyConfiguration:
    found: bool
    amplitudes: tuple[float, float, float, float]
    angles: dict[str, float]
    forbidden_probability: float
    zero_cells: dict[str, float] = field(default_factory=dict)
    evaluations: int = 0

    def state(self) -> q.PureState:
        return q.PureState.from_amplitudes(("S_C", "S_D"), self.amplitudes)

    def angle_kwargs(self) -> dict[str, float]:
        return {f"{k}_angle": self.angles[k] for k in ANGLE_NAMES}

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "amplitudes": list(self.amplitudes),
            "angles": dict(self.angles),
            "forbidden_probability": self.forbidden_probability,
            "zero_cells": dict(self.zero_cells),
            "evaluations": self.evaluations,
        }


def _plus(theta):
    return np.stack([np.cos(theta / 2), np.sin(theta / 2)], axis=-1)


def _minus(theta):
    return np.stack([-np.sin(theta / 2), np.cos(theta / 2)], axis=-1)


def _kron(u, v):
    return (u[..., :, None] * v[..., None, :]).reshape(u.shape[:-1] + (4,))


def _family_objective(params: np.ndarray):
    """params (N, 4) = (c, d, a, b); returns (target probability, states)."""
    c, d, a, b = params.T
    rows = np.stack([
        _kron(_plus(c), _plus(d)),
        _kron(_plus(a), _minus(d)),
        _kron(_minus(c), _plus(b)),
    ], axis=1)  # (N, 3, 4)
    null = np.empty((len(params), 4))
    for i in range(4):
        cols = [j for j in range(4) if j != i]
        null[:, i] = (-1) ** i * np.linalg.det(rows[:, :, cols])
    norm = np.linalg.norm(null, axis=1)
    ok = norm > 1e-10
    states = np.zeros_like(null)
    states[ok] = null[ok] / norm[ok, None]
    target = np.einsum("ni,ni->n", _kron(_plus(a), _plus(b)), states) ** 2
    target[~ok] = -1.0
    return target, states


def _angle_of(v):
    """theta with e_+(theta) parallel to v (v real, nonzero)."""
    return 2 * np.arctan2(v[..., 1], v[..., 0])


def _fixed_state_objective(matrix: np.ndarray, c: np.ndarray):
    """For each Chidi angle c, the forced d, a, b and the target probability."""
    phi = _plus(c) @ matrix  # Divya's conditional on C=+1
    d = _angle_of(phi) + math.pi
    chi = (matrix @ _minus(d).T).T  # Chidi's conditional on D=-1
    a = _angle_of(chi) + math.pi
    omega = _minus(c) @ matrix  # Divya's conditional on C=-1
    b = _angle_of(omega) + math.pi
    target = np.einsum("ni,ij,nj->n", _plus(a), matrix, _plus(b)) ** 2
    degenerate = ((np.linalg.norm(phi, axis=-1) < 1e-10) | (np.linalg.norm(chi, axis=-1) < 1e-10)
                  | (np.linalg.norm(omega, axis=-1) < 1e-10))
    target = np.where(degenerate, -1.0, target)
    params = np.stack([c, d, a, b], axis=-1)
    return target, params


def _pick(values: np.ndarray, params: np.ndarray) -> int:
    """Index of the best candidate: highest value, then lexicographically smallest parameters."""
    best = values.max()
    idx = np.flatnonzero(values == best)
    if len(idx) == 1:
        return int(idx[0])
    wrapped = np.mod(params[idx], TWO_PI)
    order = np.lexsort(wrapped.T[::-1])
    return int(idx[order[0]])


def _grid(center, half_width, points):
    offsets = np.linspace(-half_width, half_width, points)
    axes = [cval + offsets for cval in center]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def _real_amplitudes(state: q.PureState) -> np.ndarray:
    amps = np.asarray(state.amplitudes)
    phase = amps[np.argmax(np.abs(amps))]
    amps = amps * (abs(phase) / phase)
    if np.abs(amps.imag).max() > 1e-9:
        raise ValueError("Hardy search needs real amplitudes")
    return amps.real


def hardy_search(resolution: int = 16, refinement_steps: int = 40,
                 state: q.PureState | None = None) -> HardyConfiguration:
    """Maximise the target cell subject to the three zero cells.

    Without ``state`` the search runs over the whole real family (four angles,
    state solved); with ``state`` only the angles are searched. Returns a
    configuration with ``found=False`` when no positive target probability exists.
    """
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    grid = np.arange(resolution) * (TWO_PI / resolution)
    if state is None:
        mesh = np.meshgrid(grid, grid, grid, grid, indexing="ij")
        params = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        values, _ = _family_objective(params)
        evals = len(params)
        best = params[_pick(values, params)]
        half = TWO_PI / resolution
        for _ in range(refinement_steps):
            cand = _grid(best, half, 7)
            vals, _ = _family_objective(cand)
            evals += len(cand)
            best = cand[_pick(vals, cand)]
            half *= 0.6
        value, states = _family_objective(best[None, :])
        amplitudes = states[0]
        params = best
    else:
        matrix = _real_amplitudes(state).reshape(2, 2)
        values, params_all = _fixed_state_objective(matrix, grid)
        evals = len(grid)
        best_c = grid[_pick(values, params_all)]
        half = TWO_PI / resolution
        for _ in range(refinement_steps):
            cand = best_c + np.linspace(-half, half, 21)
            vals, pars = _fixed_state_objective(matrix, cand)
            evals += len(cand)
            best_c = cand[_pick(vals, pars)]
            half *= 0.6
        value, pars = _fixed_state_objective(matrix, np.array([best_c]))
        params = pars[0]
        amplitudes = matrix.reshape(-1)
    angles = {k: float(np.mod(v, TWO_PI)) for k, v in zip(ANGLE_NAMES, params)}
    prob = float(value[0])
    zero = _verify_cells(amplitudes, angles)
    found = prob > ZERO_THRESHOLD and all(v <= ZERO_THRESHOLD for v in zero.values())
    return HardyConfiguration(
        found=found,
        amplitudes=tuple(float(x) for x in amplitudes),
        angles=angles,
        forbidden_probability=max(prob, 0.0),
        zero_cells=zero,
        evaluations=evals,
    )


def _verify_cells(amplitudes, angles) -> dict[str, float]:
    """Zero-cell probabilities recomputed with the Born rule on the state."""
    if np.linalg.norm(amplitudes) < 0.5:
        return {f"{x}{y}({vx:+d},{vy:+d})": math.nan for x, y, vx, vy in ZERO_CELLS}
    state = q.PureState.from_amplitudes(("S_C", "S_D"), amplitudes)
    angle_of = {"A": angles["a"], "B": angles["b"], "C": angles["c"], "D": angles["d"]}
    out = {}
    for x, y, vx, vy in ZERO_CELLS:
        m = q.product_measurement([
            q.QubitObservable(angle_of[x]).measurement("S_C"),
            q.QubitObservable(angle_of[y]).measurement("S_D"),
        ])
        out[f"{x}{y}({vx:+d},{vy:+d})"] = q.born_probabilities(state, m)[(vx, vy)]
    return out


@lru_cache(maxsize=1)
def default_hardy_configuration() -> HardyConfiguration:
    cfg = hardy_search()
    if not cfg.found:
        raise RuntimeError("Hardy search failed to find a configuration")
    return cfg
