#!/usr/bin/env python3
"""
grassmann_core.py — Subspaces and Grassmannian geometry

Points on Gr(k, n) are held as n x k matrices with orthonormal columns.
Everything else in the engine (prototypes, clustering, analysis) is built on
the pairwise geometry defined here: principal angles, chordal and geodesic
distances, and the exp/log maps used by the Weiszfeld-type iteration.

Usage:
    from grassmann_core import Subspace, orthonormalize, chordal_distance
    X = orthonormalize(raw_matrix)
    d = chordal_distance(X, Y)
"""

import os

import numpy as np
import pandas as pd

# ─── Constants ────────────────────────────────────────────────────────────────
ORTHO_TOL = 1e-10          # ||B^T B - I||_F accepted on construction
HORIZONTAL_TOL = 1e-8      # ||base^T tangent||_F accepted by exp_map
SPAN_TOL = 1e-8            # largest principal angle for span equality
CORRECTION_TOL = 1e-8      # loader flags a basis whose deviation exceeds this
CUT_LOCUS_TOL = 1e-12      # smallest cosine below which the log map is undefined
CSV_FLOAT_FORMAT = '%.17g'


# ═══════════════════════════════════════════════════════════════════════════════
#  ERRORS
# ═══════════════════════════════════════════════════════════════════════════════

class GrassmannError(ValueError):
    """Base class for every domain error raised by the engine."""


class RankDeficient(GrassmannError):
    def __init__(self, rank, expected, context=''):
        self.rank = int(rank)
        self.expected = int(expected)
        where = f" ({context})" if context else ''
        super().__init__(f"Rank deficient{where}: numerical rank {self.rank}, need {self.expected}")


class DimensionMismatch(GrassmannError):
    pass


class UnequalDimensions(GrassmannError):
    pass


class LogUndefined(GrassmannError):
    def __init__(self, message, index=None):
        self.index = index
        if index is not None:
            message = f"{message} (data index {index})"
        super().__init__(message)


class NotHorizontal(GrassmannError):
    pass


class EmptyDataset(GrassmannError):
    pass


class InvalidWeight(GrassmannError):
    pass


class TooManyCenters(GrassmannError):
    pass


class DatasetFormatError(GrassmannError):
    def __init__(self, path, message, row=None):
        self.path = str(path)
        self.row = row
        where = f"{self.path}, row {row}" if row is not None else self.path
        super().__init__(f"{where}: {message}")


# ═══════════════════════════════════════════════════════════════════════════════
#  SUBSPACE
# ═══════════════════════════════════════════════════════════════════════════════

class Subspace:
    """A point on Gr(k, n), stored as an immutable n x k orthonormal basis.

    Equality is equality of column spans, not of the stored matrices.
    """

    __slots__ = ('_basis',)

    def __init__(self, basis):
        B = np.array(basis, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.ndim != 2 or B.shape[1] < 1 or B.shape[0] < B.shape[1]:
            raise DimensionMismatch(f"Basis must be n x k with 1 <= k <= n, got shape {B.shape}")
        deviation = orthonormality_deviation(B)
        if deviation > ORTHO_TOL:
            raise GrassmannError(
                f"Basis columns are not orthonormal (||B^T B - I||_F = {deviation:.3e}); "
                f"use orthonormalize() for raw matrices")
        B.setflags(write=False)
        self._basis = B

    @property
    def basis(self):
        return self._basis

    @property
    def ambient_dim(self):
        return self._basis.shape[0]

    @property
    def sub_dim(self):
        return self._basis.shape[1]

    def leading(self, r):
        """Subspace spanned by the first r basis columns."""
        if not 1 <= r <= self.sub_dim:
            raise DimensionMismatch(f"Cannot take {r} leading columns of a {self.sub_dim}-dimensional subspace")
        return Subspace(self._basis[:, :r])

    def __eq__(self, other):
        if not isinstance(other, Subspace):
            return NotImplemented
        return same_span(self, other)

    __hash__ = None

    def __repr__(self):
        return f"Subspace(Gr({self.sub_dim}, {self.ambient_dim}))"


def orthonormality_deviation(B):
    """Frobenius norm of B^T B - I."""
    B = np.asarray(B, dtype=float)
    return float(np.linalg.norm(B.T @ B - np.eye(B.shape[1])))


def orthonormalize(raw, context=''):
    """Subspace spanned by the columns of raw, via the Q factor of a thin QR.

    No column pivoting: the first j columns of Q span the first j columns of raw.
    """
    A = np.asarray(raw, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    n, k = A.shape
    if k > n:
        raise RankDeficient(n, k, context or f"{n} x {k} matrix has more columns than rows")
    rank = np.linalg.matrix_rank(A)
    if rank < k:
        raise RankDeficient(rank, k, context)
    q, _ = np.linalg.qr(A, mode='reduced')
    return Subspace(q)


def same_span(X, Y, tol=SPAN_TOL):
    if X.ambient_dim != Y.ambient_dim or X.sub_dim != Y.sub_dim:
        return False
    return bool(principal_angles(X, Y).max() < tol)


def normalize_signs(U, tol=1e-12):
    """Flip columns so the first entry with |u| > tol in each column is positive."""
    U = np.array(U, dtype=float)
    for j in range(U.shape[1]):
        nonzero = np.flatnonzero(np.abs(U[:, j]) > tol)
        if nonzero.size and U[nonzero[0], j] < 0:
            U[:, j] = -U[:, j]
    return U


# ═══════════════════════════════════════════════════════════════════════════════
#  PRINCIPAL ANGLES & DISTANCES
# ═══════════════════════════════════════════════════════════════════════════════

def _check_ambient(X, Y):
    if X.ambient_dim != Y.ambient_dim:
        raise DimensionMismatch(
            f"Ambient dimensions differ: {X.ambient_dim} vs {Y.ambient_dim}")


def principal_angles(X, Y):
    """Principal angles between [X] and [Y], length max(k_X, k_Y).

    The min(k_X, k_Y) computed angles are ascending; when the dimensions
    differ the remaining trailing entries are 0.
    """
    _check_ambient(X, Y)
    A, B = X.basis, Y.basis
    # cosines descending
    cosines = np.clip(np.linalg.svd(A.T @ B, compute_uv=False), 0.0, 1.0)
    # sines of the same angles from the residual of the smaller basis
    small, big = (B, A) if A.shape[1] >= B.shape[1] else (A, B)
    residual = small - big @ (big.T @ small)
    sines = np.sort(np.clip(np.linalg.svd(residual, compute_uv=False), 0.0, 1.0))
    angles = np.where(cosines ** 2 < 0.5, np.arccos(cosines), np.arcsin(sines))
    # keep the order ascending even when the two routes disagree in the last bit
    angles = np.sort(angles)
    pad = max(X.sub_dim, Y.sub_dim) - angles.size
    if pad:
        angles = np.concatenate([angles, np.zeros(pad)])
    return angles


def chordal_distance(X, Y):
    return float(np.linalg.norm(np.sin(principal_angles(X, Y))))


def geodesic_distance(X, Y):
    return float(np.linalg.norm(principal_angles(X, Y)))


def sin_squared_sum(X, Y):
    """Sum of squared sines of the principal angles, m - tr(Y^T X X^T Y).

    Evaluated as the squared norm of the projection residual of the smaller
    basis, which is exact and never negative.
    """
    _check_ambient(X, Y)
    A, B = X.basis, Y.basis
    small, big = (B, A) if A.shape[1] >= B.shape[1] else (A, B)
    residual = small - big @ (big.T @ small)
    return float(np.sum(residual * residual))


# ═══════════════════════════════════════════════════════════════════════════════
#  EXP / LOG MAPS
# ═══════════════════════════════════════════════════════════════════════════════

def log_map(base, target):
    """Horizontal tangent Delta at base with exp_map(base, Delta) = target."""
    _check_ambient(base, target)
    if base.sub_dim != target.sub_dim:
        raise UnequalDimensions(
            f"log_map needs equal subspace dimensions, got {base.sub_dim} and {target.sub_dim}")
    return log_map_many(base, [target])[0]


def log_map_many(base, targets):
    """Batched log map: array of shape (p, n, k), one tangent per target."""
    B = base.basis
    n, k = B.shape
    stack = np.stack([t.basis for t in targets])
    if stack.shape[1:] != (n, k):
        raise UnequalDimensions(f"log_map_many needs targets on Gr({k}, {n}), got shape {stack.shape[1:]}")
    M = np.einsum('ni,pnj->pij', B, stack)                  # base^T target
    smallest_cos = np.linalg.svd(M, compute_uv=False)[:, -1]
    bad = np.flatnonzero(smallest_cos < CUT_LOCUS_TOL)
    if bad.size:
        raise LogUndefined("Principal angle at pi/2: target is on the cut locus of base", index=int(bad[0]))
    residual = stack - np.einsum('ni,pij->pnj', B, M)        # (I - B B^T) target
    # A = residual M^{-1}, solved as M^T A^T = residual^T
    A = np.swapaxes(np.linalg.solve(np.swapaxes(M, 1, 2), np.swapaxes(residual, 1, 2)), 1, 2)
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    return np.einsum('pnk,pk,pkj->pnj', U, np.arctan(S), Vt)


def exp_map(base, tangent):
    """Geodesic endpoint from base along a horizontal tangent."""
    T = np.asarray(tangent, dtype=float)
    B = base.basis
    if T.shape != B.shape:
        raise DimensionMismatch(f"Tangent shape {T.shape} does not match base {B.shape}")
    vertical = np.linalg.norm(B.T @ T)
    if vertical > HORIZONTAL_TOL * max(1.0, np.linalg.norm(T)):
        raise NotHorizontal(f"Tangent is not horizontal at base (||base^T tangent||_F = {vertical:.3e})")
    U, S, Vt = np.linalg.svd(T, full_matrices=False)
    Y = (B @ Vt.T) * np.cos(S) @ Vt + (U * np.sin(S)) @ Vt
    q, _ = np.linalg.qr(Y, mode='reduced')
    return Subspace(q)


# ═══════════════════════════════════════════════════════════════════════════════
#  MATRIX CSV I/O
# ═══════════════════════════════════════════════════════════════════════════════

def write_matrix_csv(path, matrix):
    """One row per ambient dimension, comma-separated columns."""
    M = np.asarray(matrix, dtype=float)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    np.savetxt(path, M, delimiter=',', fmt=CSV_FLOAT_FORMAT)


def read_matrix_csv(path):
    """Parse a headerless numeric CSV matrix; errors name the file and row."""
    if not os.path.exists(path):
        raise DatasetFormatError(path, "file not found")
    try:
        df = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise DatasetFormatError(path, "file is empty")
    except pd.errors.ParserError as e:
        raise DatasetFormatError(path, f"ragged CSV ({e})")
    numeric = df.apply(lambda col: pd.to_numeric(col.str.strip(), errors='coerce'))
    bad_rows = np.flatnonzero(numeric.isna().any(axis=1).to_numpy())
    if bad_rows.size:
        row = int(bad_rows[0])
        raise DatasetFormatError(path, f"non-numeric or missing entry: {df.iloc[row].tolist()}", row=row + 1)
    return numeric.to_numpy(dtype=float)


def save_subspace(path, subspace):
    write_matrix_csv(path, subspace.basis)


def load_subspace(path):
    """Load a basis CSV. Returns (subspace, deviation, corrected).

    Bases within ORTHO_TOL of orthonormal are kept as stored; anything else
    is re-orthonormalized. corrected is True when the deviation exceeded
    CORRECTION_TOL.
    """
    raw = read_matrix_csv(path)
    deviation = orthonormality_deviation(raw) if raw.shape[0] >= raw.shape[1] else float('inf')
    if deviation <= ORTHO_TOL:
        subspace = Subspace(raw)
    else:
        subspace = orthonormalize(raw, context=str(path))
    corrected = deviation > CORRECTION_TOL
    if corrected:
        print(f"[!] {path}: basis re-orthonormalized (deviation {deviation:.3e})")
    return subspace, deviation, corrected
