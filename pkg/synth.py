#!/usr/bin/env python3
"""
synth.py — Seeded synthetic subspace datasets

Generators for every synthetic dataset the experiments use, plus the
frame-stack ingestion that turns a video (frames as columns) into a point
on the Grassmannian. Every generator draws from its own named random stream
derived from (seed, tag), so adding a generator never reshuffles another.

Sampling recipe: an n x k matrix with entries from U[-0.5, 0.5), then the
Q factor of its QR decomposition.

Dataset directory format:
    <dir>/manifest.json   {ambient_dim, entries: [{path, k, label?}], provenance}
    <dir>/point_0000.csv  one CSV matrix per entry
"""

import json
import os
import zlib
from dataclasses import dataclass, field

import numpy as np

from grassmann_core import (
    DatasetFormatError,
    DimensionMismatch,
    EmptyDataset,
    GrassmannError,
    Subspace,
    load_subspace,
    orthonormalize,
    save_subspace,
)

# ─── Constants ────────────────────────────────────────────────────────────────
MANIFEST_FILE = 'manifest.json'
UNIFORM_LOW, UNIFORM_HIGH = -0.5, 0.5


@dataclass
class SubspaceDataset:
    """Ordered subspaces sharing one ambient dimension, with optional labels."""
    points: list
    labels: list = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = list(self.points)
        if self.points:
            n = self.points[0].ambient_dim
            odd = [i for i, X in enumerate(self.points) if X.ambient_dim != n]
            if odd:
                raise DimensionMismatch(
                    f"Point {odd[0]} lives in R^{self.points[odd[0]].ambient_dim}, dataset in R^{n}")
        if self.labels is not None:
            self.labels = list(self.labels)
            if len(self.labels) != len(self.points):
                raise DimensionMismatch(
                    f"{len(self.labels)} labels for {len(self.points)} points")

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    @property
    def ambient_dim(self):
        if not self.points:
            raise EmptyDataset("Dataset has no points")
        return self.points[0].ambient_dim


def as_points(data):
    """Accept a SubspaceDataset or any iterable of Subspaces."""
    points = data.points if isinstance(data, SubspaceDataset) else list(data)
    if not points:
        raise EmptyDataset("Dataset has no points")
    n = points[0].ambient_dim
    for i, X in enumerate(points):
        if X.ambient_dim != n:
            raise DimensionMismatch(f"Point {i} lives in R^{X.ambient_dim}, expected R^{n}")
    return points


# ═══════════════════════════════════════════════════════════════════════════════
#  RANDOM STREAMS & GENERATORS
# ═══════════════════════════════════════════════════════════════════════════════

def derive_rng(seed, tag):
    """Independent generator for (seed, purpose tag)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(tag.encode())]))


def _uniform_matrix(rng, n, k):
    return rng.uniform(UNIFORM_LOW, UNIFORM_HIGH, size=(n, k))


def uniform_point(n, k, seed, tag='uniform_point'):
    if not 1 <= k <= n:
        raise DimensionMismatch(f"Need 1 <= k <= n, got k={k}, n={n}")
    rng = derive_rng(seed, tag)
    return orthonormalize(_uniform_matrix(rng, n, k), context=f"uniform_point seed={seed}")


def perturbed_cluster(center, count, noise_scale, seed, label=None, tag='perturbed_cluster'):
    """count points orthonormalize(center + noise_scale * U[-0.5, 0.5))."""
    if noise_scale < 0:
        raise GrassmannError(f"noise_scale must be >= 0, got {noise_scale}")
    rng = derive_rng(seed, tag)
    n, k = center.basis.shape
    points = [orthonormalize(center.basis + noise_scale * _uniform_matrix(rng, n, k))
              for _ in range(count)]
    labels = [label] * count if label is not None else None
    return SubspaceDataset(points, labels, {
        'generator': 'perturbed_cluster', 'count': count, 'noise_scale': noise_scale,
        'n': n, 'k': k, 'seed': seed,
    })


def mixed_dim_dataset(seed, n=20, dims=(3, 5), per_dim=10):
    """per_dim uniform points for each dimension in dims (default 10 on Gr(3,20), 10 on Gr(5,20))."""
    rng = derive_rng(seed, 'mixed_dim_dataset')
    points, labels = [], []
    for k in dims:
        for _ in range(per_dim):
            points.append(orthonormalize(_uniform_matrix(rng, n, k)))
            labels.append(f"gr{k}")
    return SubspaceDataset(points, labels, {
        'generator': 'mixed_dim_dataset', 'n': n, 'dims': list(dims), 'per_dim': per_dim, 'seed': seed,
    })


def outlier_dataset(seed, inliers=180, outliers=20, n=20, k=3, noise_scale=0.01):
    """Tight cluster around a random center plus uniform outliers.

    Returns (dataset labeled 'inlier'/'outlier', center).
    """
    if inliers < 1:
        raise GrassmannError(f"Need at least one inlier, got {inliers}")
    center = uniform_point(n, k, seed, tag='outlier_center')
    cluster = perturbed_cluster(center, inliers, noise_scale, seed, tag='outlier_cluster')
    rng = derive_rng(seed, 'outlier_points')
    extra = [orthonormalize(_uniform_matrix(rng, n, k)) for _ in range(outliers)]
    dataset = SubspaceDataset(
        cluster.points + extra,
        ['inlier'] * inliers + ['outlier'] * outliers,
        {'generator': 'outlier_dataset', 'inliers': inliers, 'outliers': outliers,
         'n': n, 'k': k, 'noise_scale': noise_scale, 'seed': seed},
    )
    return dataset, center


def _ring_frame(seed, n, k):
    if not 1 <= k < n:
        raise DimensionMismatch(f"Need 1 <= k < n for a class ring, got k={k}, n={n}")
    return uniform_point(n, k + 1, seed, tag='class_ring_frame').basis


def _ring_basis(frame, theta):
    lead = np.cos(theta) * frame[:, :1] + np.sin(theta) * frame[:, 1:2]
    return np.hstack([lead, frame[:, 2:]])


def class_ring_centers(seed, n_classes=5, n=20, k=3):
    """Class centers spaced evenly around a ring.

    The leading direction turns by pi / n_classes from one class to the next
    inside a random plane; the other k - 1 directions are shared. Neighbors
    sit at chordal distance sin(pi / n_classes).
    """
    if n_classes < 1:
        raise GrassmannError(f"Need at least one class, got {n_classes}")
    frame = _ring_frame(seed, n, k)
    return [Subspace(_ring_basis(frame, c * np.pi / n_classes)) for c in range(n_classes)]


def class_mixture_dataset(seed, n_classes=5, per_class=20, outlier_fraction=0.2,
                          n=20, k=3, noise_scale=0.01, outlier_reach=0.96):
    """Tight labeled classes around class_ring_centers, each with boundary outliers.

    A class's outliers sit outlier_reach of the way toward the midpoint with a
    neighboring class, alternating sides, so every point stays nearest its own
    class center while the outliers of two neighbors crowd together.
    """
    if not 0 < outlier_reach < 1:
        raise GrassmannError(f"outlier_reach must lie in (0, 1), got {outlier_reach}")
    if noise_scale < 0:
        raise GrassmannError(f"noise_scale must be >= 0, got {noise_scale}")
    if n_classes < 1:
        raise GrassmannError(f"Need at least one class, got {n_classes}")
    frame = _ring_frame(seed, n, k)
    rng = derive_rng(seed, 'class_mixture')
    step = np.pi / n_classes
    n_outliers = int(round(outlier_fraction * per_class))
    offsets = [0.0] * (per_class - n_outliers)
    offsets += [outlier_reach * step / 2 * (-1) ** j for j in range(n_outliers)]
    points, labels = [], []
    for c in range(n_classes):
        for offset in offsets:
            anchor = _ring_basis(frame, c * step + offset)
            points.append(orthonormalize(anchor + noise_scale * _uniform_matrix(rng, n, k)))
            labels.append(c)
    return SubspaceDataset(points, labels, {
        'generator': 'class_mixture_dataset', 'n_classes': n_classes, 'per_class': per_class,
        'outlier_fraction': outlier_fraction, 'outlier_reach': outlier_reach,
        'n': n, 'k': k, 'noise_scale': noise_scale, 'seed': seed,
    })


def contaminated_pair_dataset(seed, base_count=20, contamination=0, n=50, k=1, noise_scale=0.5):
    """base_count points of class 'a' plus `contamination` points of class 'b'.

    The two class centers are shared across contamination levels for one seed,
    so prototypes from different levels can be compared directly.
    """
    center_a = uniform_point(n, k, seed, tag='pair_center_a')
    center_b = uniform_point(n, k, seed, tag='pair_center_b')
    a = perturbed_cluster(center_a, base_count, noise_scale, seed, label='a', tag='pair_class_a')
    b = perturbed_cluster(center_b, contamination, noise_scale, seed, label='b', tag='pair_class_b')
    return SubspaceDataset(a.points + b.points, a.labels + (b.labels or []), {
        'generator': 'contaminated_pair_dataset', 'base_count': base_count,
        'contamination': contamination, 'n': n, 'k': k, 'noise_scale': noise_scale, 'seed': seed,
    })


# ═══════════════════════════════════════════════════════════════════════════════
#  INGESTION
# ═══════════════════════════════════════════════════════════════════════════════

def ingest_frame_stack(frames, k):
    """First k columns of Q from the QR of an n x T frame matrix.

    Without pivoting those columns span the first k frames, so only those
    need full rank.
    """
    F = np.asarray(frames, dtype=float)
    if F.ndim != 2:
        raise DimensionMismatch(f"Frame stack must be n x T, got shape {F.shape}")
    n, T = F.shape
    if not 1 <= k <= min(n, T):
        raise DimensionMismatch(f"Need 1 <= k <= min(n, T) = {min(n, T)}, got k={k}")
    return orthonormalize(F[:, :k], context=f"frame stack, first {k} of {T} frames")


def ingest_vector(vector):
    """A single vectorized image as a point on Gr(1, n)."""
    v = np.asarray(vector, dtype=float).ravel()
    norm = np.linalg.norm(v)
    if norm == 0:
        raise DimensionMismatch("Cannot ingest an all-zero vector")
    return Subspace((v / norm).reshape(-1, 1))


# ═══════════════════════════════════════════════════════════════════════════════
#  DATASET DIRECTORY I/O
# ═══════════════════════════════════════════════════════════════════════════════

def _json_label(label):
    return label.item() if isinstance(label, np.generic) else label


def save_dataset(dataset, directory):
    os.makedirs(directory, exist_ok=True)
    entries = []
    for i, X in enumerate(dataset.points):
        name = f"point_{i:04d}.csv"
        save_subspace(os.path.join(directory, name), X)
        entry = {'path': name, 'k': X.sub_dim}
        if dataset.labels is not None:
            entry['label'] = _json_label(dataset.labels[i])
        entries.append(entry)
    manifest = {
        'ambient_dim': dataset.ambient_dim,
        'entries': entries,
        'provenance': dataset.provenance,
    }
    with open(os.path.join(directory, MANIFEST_FILE), 'w') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    print(f"[✓] Saved {len(entries)} subspaces to {directory}")


def load_dataset(directory):
    path = os.path.join(directory, MANIFEST_FILE)
    if not os.path.exists(path):
        raise DatasetFormatError(path, "manifest not found")
    try:
        with open(path) as f:
            manifest = json.load(f)
    except json.JSONDecodeError as e:
        raise DatasetFormatError(path, f"JSON parse error: {e}")
    entries = manifest.get('entries')
    if not isinstance(entries, list) or not entries:
        raise DatasetFormatError(path, 'missing or empty "entries"')
    points, labels, corrected = [], [], 0
    has_labels = all('label' in e for e in entries)
    for row, entry in enumerate(entries, 1):
        if 'path' not in entry:
            raise DatasetFormatError(path, 'entry without "path"', row=row)
        X, _, was_corrected = load_subspace(os.path.join(directory, entry['path']))
        if 'k' in entry and int(entry['k']) != X.sub_dim:
            raise DatasetFormatError(path, f"entry declares k={entry['k']}, file has {X.sub_dim} columns", row=row)
        if 'ambient_dim' in manifest and X.ambient_dim != int(manifest['ambient_dim']):
            raise DatasetFormatError(
                path, f"{entry['path']} has {X.ambient_dim} rows, manifest says {manifest['ambient_dim']}", row=row)
        points.append(X)
        corrected += was_corrected
        if has_labels:
            labels.append(entry['label'])
    provenance = dict(manifest.get('provenance', {}))
    provenance['corrected_on_load'] = corrected
    print(f"[✓] Loaded {len(points)} subspaces from {directory}"
          + (f" ({corrected} re-orthonormalized)" if corrected else ''))
    return SubspaceDataset(points, labels if has_labels else None, provenance)
