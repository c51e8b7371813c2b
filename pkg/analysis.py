#!/usr/bin/env python3
"""
analysis.py — Experiment instrumentation

  distance_matrix      pairwise chordal / geodesic distances
  verify_local_min     random "test points" around a candidate minimizer
  outlier_robustness   chordal distance of each prototype to the true center
  classical_mds        Torgerson MDS of a distance matrix
  prototype_drift      how far each prototype moves as a dataset is contaminated
"""

import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from grassmann_core import (
    DimensionMismatch,
    GrassmannError,
    chordal_distance,
    geodesic_distance,
    orthonormalize,
    write_matrix_csv,
)
from prototypes import (
    Init,
    SolverConfig,
    objective_chordal_sq_sum,
    objective_chordal_sum,
    objective_geodesic_sum,
    solve,
)
from synth import as_points, contaminated_pair_dataset, derive_rng, outlier_dataset

# ─── Constants ────────────────────────────────────────────────────────────────
METRICS = {'chordal': chordal_distance, 'geodesic': geodesic_distance}
OBJECTIVES = {
    'chordal_sum': objective_chordal_sum,
    'chordal_sq_sum': objective_chordal_sq_sum,
    'geodesic_sum': objective_geodesic_sum,
}
ROBUSTNESS_METHODS = ('flag_median', 'l2_median', 'flag_mean')
DEFAULT_TEST_POINTS = 100
DEFAULT_TEST_SCALE = 1e-5
VERIFY_RTOL = 1e-12
SYMMETRY_TOL = 1e-12


# ═══════════════════════════════════════════════════════════════════════════════
#  DISTANCE MATRICES
# ═══════════════════════════════════════════════════════════════════════════════

@dataclass
class DistanceMatrix:
    values: np.ndarray
    metric: str

    def __post_init__(self):
        V = np.asarray(self.values, dtype=float)
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise DimensionMismatch(f"Distance matrix must be square, got shape {V.shape}")
        if np.max(np.abs(V - V.T), initial=0.0) > SYMMETRY_TOL:
            raise GrassmannError("Distance matrix is not symmetric")
        if np.any(np.diag(V) != 0) or np.any(V < 0):
            raise GrassmannError("Distance matrix needs a zero diagonal and nonnegative entries")
        self.values = V

    @property
    def size(self):
        return self.values.shape[0]

    def to_csv(self, path):
        write_matrix_csv(path, self.values)


def distance_matrix(data, metric='chordal'):
    if metric not in METRICS:
        raise GrassmannError(f"Unknown metric {metric!r}; use one of {', '.join(METRICS)}")
    points = as_points(data)
    distance = METRICS[metric]
    p = len(points)
    D = np.zeros((p, p))
    for i in range(p):
        for j in range(i + 1, p):
            D[i, j] = D[j, i] = distance(points[i], points[j])
    return DistanceMatrix(D, metric)


# ═══════════════════════════════════════════════════════════════════════════════
#  TEST-POINT VERIFICATION
# ═══════════════════════════════════════════════════════════════════════════════

@dataclass
class Verification:
    verified: bool
    violations: int
    n_test_points: int
    candidate_objective: float
    best_test_objective: float

    def to_dict(self):
        return {
            'verified': self.verified,
            'violations': self.violations,
            'n_test_points': self.n_test_points,
            'candidate_objective': self.candidate_objective,
            'best_test_objective': self.best_test_objective,
        }


def verify_local_min(data, candidate, objective='chordal_sum', n_test_points=DEFAULT_TEST_POINTS,
                     scale=DEFAULT_TEST_SCALE, seed=0):
    """Perturb the candidate basis n_test_points times; a test point with a
    strictly lower objective counts as a violation."""
    if objective not in OBJECTIVES:
        raise GrassmannError(f"Unknown objective {objective!r}; use one of {', '.join(OBJECTIVES)}")
    if not scale > 0:
        raise GrassmannError(f"Test-point scale must be > 0, got {scale}")
    points = as_points(data)
    f = OBJECTIVES[objective]
    value = f(points, candidate)
    slack = VERIFY_RTOL * max(1.0, abs(value))
    rng = derive_rng(seed, 'test_points')
    n, r = candidate.basis.shape
    violations, best = 0, np.inf
    for _ in range(n_test_points):
        Z = orthonormalize(candidate.basis + scale * rng.uniform(-0.5, 0.5, size=(n, r)))
        test = f(points, Z)
        best = min(best, test)
        if test < value - slack:
            violations += 1
    return Verification(violations == 0, violations, n_test_points, value, float(best))


# ═══════════════════════════════════════════════════════════════════════════════
#  OUTLIER ROBUSTNESS
# ═══════════════════════════════════════════════════════════════════════════════

def outlier_robustness(inliers=180, outliers=20, n=20, k=3, noise_scale=0.01, seed=0, solver_cfg=None):
    """Chordal distance from each prototype to the cluster center.

    Returns a DataFrame indexed by method: chordal_distance, iterations, termination.
    """
    dataset, center = outlier_dataset(seed, inliers=inliers, outliers=outliers,
                                      n=n, k=k, noise_scale=noise_scale)
    cfg = (solver_cfg or SolverConfig(r=k)).with_overrides(r=k, init=Init.random(seed))
    rows = []
    for method in ROBUSTNESS_METHODS:
        result = solve(method, dataset, cfg)
        rows.append({
            'method': method,
            'chordal_distance': chordal_distance(result.subspace, center),
            'iterations': result.iterations,
            'termination': result.termination.value,
        })
    return pd.DataFrame(rows).set_index('method')


# ═══════════════════════════════════════════════════════════════════════════════
#  CLASSICAL MDS
# ═══════════════════════════════════════════════════════════════════════════════

@dataclass
class MdsEmbedding:
    coords: np.ndarray
    eigenvalues: np.ndarray
    padded: bool = False

    def to_csv(self, path, labels=None):
        df = pd.DataFrame(self.coords, columns=[f"x{j + 1}" for j in range(self.coords.shape[1])])
        if labels is not None:
            df.insert(0, 'label', list(labels))
        df.to_csv(path, index=False, float_format=lambda v: format(v, '.17g'))


def _squared_distances(D):
    V = D.values if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)
    return V * V


def _gram(D):
    sq = _squared_distances(D)
    p = sq.shape[0]
    J = np.eye(p) - np.full((p, p), 1.0 / p)
    return -0.5 * J @ sq @ J


def classical_mds(D, out_dim=2):
    B = _gram(D)
    p = B.shape[0]
    if not 1 <= out_dim <= p:
        raise DimensionMismatch(f"Need 1 <= out_dim <= {p}, got {out_dim}")
    B = 0.5 * (B + B.T)
    eigenvalues, vectors = np.linalg.eigh(B)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues, vectors = eigenvalues[order], vectors[:, order]
    tol = np.abs(eigenvalues).max(initial=0.0) * p * np.finfo(float).eps
    positive = int(np.sum(eigenvalues > tol))
    used = min(out_dim, positive)
    coords = np.zeros((p, out_dim))
    if used:
        coords[:, :used] = vectors[:, :used] * np.sqrt(eigenvalues[:used])
        for j in range(used):
            col = coords[:, j]
            if col[np.argmax(np.abs(col))] < 0:
                coords[:, j] = -col
    padded = used < out_dim
    if padded:
        print(f"[!] MDS: only {positive} positive eigenvalues, padded {out_dim - used} zero columns")
    return MdsEmbedding(coords, eigenvalues[:out_dim], padded)


def mds_strain(D, coords):
    """||B - X X^T||_F for the double-centered Gram matrix B."""
    X = np.asarray(coords, dtype=float)
    return float(np.linalg.norm(_gram(D) - X @ X.T))


def mds_stress(D, coords):
    """Kruskal stress-1 of the embedded pairwise distances."""
    target = np.sqrt(_squared_distances(D))
    X = np.asarray(coords, dtype=float)
    diff = X[:, None, :] - X[None, :, :]
    embedded = np.sqrt(np.sum(diff * diff, axis=-1))
    denom = np.sum(target * target)
    return float(np.sqrt(np.sum((target - embedded) ** 2) / denom)) if denom > 0 else 0.0


# ═══════════════════════════════════════════════════════════════════════════════
#  PROTOTYPE DRIFT
# ═══════════════════════════════════════════════════════════════════════════════

@dataclass
class DriftResult:
    table: pd.DataFrame
    embedding: MdsEmbedding
    row_labels: list

    def save(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        self.table.to_csv(os.path.join(out_dir, 'prototype_drift.csv'), index=False)
        self.embedding.to_csv(os.path.join(out_dir, 'mds_coords.csv'), labels=self.row_labels)


def prototype_drift(seed=0, contamination_levels=(0, 5, 10, 15, 20), base_count=20,
                    n=50, noise_scale=0.5, methods=ROBUSTNESS_METHODS, solver_cfg=None):
    """Prototypes of a base class as points of a second class are mixed in.

    Each method's prototype at every contamination level is compared with its
    prototype on the clean data. The most contaminated dataset and all
    prototypes are embedded together in 2-D with geodesic-distance MDS.
    """
    levels = sorted(set(int(c) for c in contamination_levels))
    if not levels or levels[0] < 0:
        raise GrassmannError("Contamination levels must be nonnegative and nonempty")
    cfg = (solver_cfg or SolverConfig(r=1)).with_overrides(r=1, init=Init.datapoint(0))
    rows, prototypes, proto_labels = [], [], []
    clean = {}
    for level in levels:
        dataset = contaminated_pair_dataset(seed, base_count=base_count, contamination=level,
                                            n=n, k=1, noise_scale=noise_scale)
        for method in methods:
            Y = solve(method, dataset, cfg).subspace
            clean.setdefault(method, Y)
            rows.append({
                'contamination': level,
                'method': method,
                'drift_chordal': chordal_distance(Y, clean[method]),
                'drift_geodesic': geodesic_distance(Y, clean[method]),
            })
            prototypes.append(Y)
            proto_labels.append(f"{method}@{level}")
    embedded = list(dataset.points) + prototypes
    row_labels = [f"data_{label}" for label in dataset.labels] + proto_labels
    embedding = classical_mds(distance_matrix(embedded, 'geodesic'), out_dim=2)
    return DriftResult(pd.DataFrame(rows), embedding, row_labels)
