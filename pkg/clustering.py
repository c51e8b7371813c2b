#!/usr/bin/env python3
"""
clustering.py — Subspace LBG clustering

Lloyd-style LBG with a fixed codebook size: assign every subspace to its
nearest center by chordal distance, then replace each center by a prototype
(flag median, flag mean or l2-median) of the subspaces assigned to it.

Rounds stop when the relative change in distortion drops below 1e-6 or after
max_rounds. An empty cluster is reseeded with the point lying farthest from
its own center.

Codebook directory format:
    <dir>/center_00.csv ...   one CSV matrix per center
    <dir>/codebook.json       {method, r, seed, assignments, distortion_trace, purity?}
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np
from sklearn.metrics.cluster import contingency_matrix

from grassmann_core import (
    DimensionMismatch,
    EmptyDataset,
    GrassmannError,
    TooManyCenters,
    chordal_distance,
    save_subspace,
)
from prototypes import Init, SolverConfig, flag_mean, solve
from synth import as_points, derive_rng

# ─── Constants ────────────────────────────────────────────────────────────────
LBG_METHODS = ('flag_median', 'flag_mean', 'l2_median')
DEFAULT_MAX_ROUNDS = 50
DISTORTION_RTOL = 1e-6
CODEBOOK_FILE = 'codebook.json'


@dataclass
class Codebook:
    centers: list
    assignments: np.ndarray
    distortion: float
    method: str
    distortion_trace: list = field(default_factory=list)
    rounds: int = 0

    @property
    def size(self):
        return len(self.centers)


def _distances_to_centers(points, centers):
    return np.array([[chordal_distance(X, C) for C in centers] for X in points])


def assign_to_centers(data, centers):
    """(assignments, distances to the assigned center). Ties go to the lowest center index."""
    points = as_points(data)
    D = _distances_to_centers(points, centers)
    assignments = np.argmin(D, axis=1)
    return assignments, D[np.arange(len(points)), assignments]


def _update_center(method, members, center, r, solver_cfg):
    if method == 'flag_mean':
        return flag_mean(members, r).subspace
    cfg = solver_cfg.with_overrides(init=Init.explicit(center))
    return solve(method, members, cfg).subspace


def lbg_cluster(data, codebook_size, method='flag_median', r=1, seed=0,
                max_rounds=DEFAULT_MAX_ROUNDS, solver_cfg=None, init_indices=None):
    """LBG rounds from codebook_size seeded random datapoints, or from the
    datapoints at init_indices when given."""
    points = as_points(data)
    method = method.replace('-', '_')
    if method not in LBG_METHODS:
        raise GrassmannError(f"Unknown LBG method {method!r}; choose from {', '.join(LBG_METHODS)}")
    if codebook_size > len(points):
        raise TooManyCenters(f"Codebook size {codebook_size} exceeds {len(points)} data points")
    if codebook_size < 1:
        raise TooManyCenters(f"Codebook size must be >= 1, got {codebook_size}")
    solver_cfg = solver_cfg or SolverConfig(r=r)
    if solver_cfg.r != r:
        solver_cfg = solver_cfg.with_overrides(r=r)

    if init_indices is None:
        rng = derive_rng(seed, 'lbg_init')
        chosen = rng.choice(len(points), size=codebook_size, replace=False)
    else:
        chosen = [int(i) for i in init_indices]
        if len(chosen) != codebook_size or len(set(chosen)) != codebook_size:
            raise TooManyCenters(f"Need {codebook_size} distinct initial indices, got {chosen}")
    short = [i for i, X in enumerate(points) if X.sub_dim < r]
    if short:
        raise DimensionMismatch(
            f"LBG centers are {r}-dimensional; point {short[0]} has dimension {points[short[0]].sub_dim}")
    centers = [points[i].leading(r) for i in chosen]

    assignments, dists = assign_to_centers(points, centers)
    trace = [float(dists.sum())]
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        new_centers = []
        for j, center in enumerate(centers):
            members = [points[i] for i in np.flatnonzero(assignments == j)]
            if members:
                new_centers.append(_update_center(method, members, center, r, solver_cfg))
            else:
                far = int(np.argmax(dists))
                new_centers.append(points[far].leading(r))
                # the reseeded point now sits on its own center
                dists[far] = 0.0
        centers = new_centers
        assignments, dists = assign_to_centers(points, centers)
        trace.append(float(dists.sum()))
        previous, current = trace[-2], trace[-1]
        if abs(previous - current) <= DISTORTION_RTOL * max(previous, np.finfo(float).tiny):
            break
    return Codebook(centers, assignments, trace[-1], method, trace, rounds)


def cluster_purity(assignments, labels):
    """Sum over clusters of the majority label count, over the total."""
    assignments = np.asarray(assignments)
    labels = np.asarray(labels)
    if assignments.shape[0] != labels.shape[0]:
        raise DimensionMismatch(f"{assignments.shape[0]} assignments for {labels.shape[0]} labels")
    if assignments.shape[0] == 0:
        raise EmptyDataset("Cannot score an empty clustering")
    table = contingency_matrix(labels, assignments)
    return float(table.max(axis=0).sum() / table.sum())


def save_codebook(codebook, directory, labels=None, seed=None, r=None):
    os.makedirs(directory, exist_ok=True)
    paths = []
    for j, C in enumerate(codebook.centers):
        name = f"center_{j:02d}.csv"
        save_subspace(os.path.join(directory, name), C)
        paths.append(name)
    payload = {
        'method': codebook.method,
        'r': r if r is not None else codebook.centers[0].sub_dim,
        'seed': seed,
        'codebook_size': codebook.size,
        'centers': paths,
        'assignments': [int(a) for a in codebook.assignments],
        'distortion': codebook.distortion,
        'distortion_trace': codebook.distortion_trace,
        'rounds': codebook.rounds,
    }
    if labels is not None:
        payload['purity'] = cluster_purity(codebook.assignments, labels)
    with open(os.path.join(directory, CODEBOOK_FILE), 'w') as f:
        json.dump(payload, f, indent=2, sort_keys=True)
    print(f"[✓] Saved codebook ({codebook.size} centers) to {directory}")
    return payload
