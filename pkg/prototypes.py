#!/usr/bin/env python3
"""
prototypes.py — Subspace prototypes on the Grassmannian

Three prototypes for a set of subspaces {[X_1], ..., [X_p]} of R^n:

  flag mean    minimizes sum_i ||sin theta(X_i, Y)||^2   (one thin SVD)
  flag median  minimizes sum_i ||sin theta(X_i, Y)||     (FlagIRLS)
  l2-median    minimizes sum_i ||theta(X_i, Y)||         (Weiszfeld-type)

plus plain Grassmannian gradient descent on the flag median objective as a
baseline. FlagIRLS is an iteratively reweighted flag mean: each step is the
flag mean of the representatives scaled by

    w_i = (1 / (m_i - tr(Y^T X_i X_i^T Y) + eps)) ** (1/4),   m_i = min(r, k_i)

and its output is a whole flag: the leading j columns of the returned basis
span the j-th nested subspace.

Stopping rules (FlagIRLS and gradient descent): consecutive objective values
closer than delta in either direction, a larger increase of the objective
(the previous iterate is kept), or max_iters. The Weiszfeld iteration
stops on delta or max_iters.

Usage:
    from prototypes import SolverConfig, Init, flag_median
    result = flag_median(dataset, SolverConfig(r=3, init=Init.random(seed=0)))
    result.subspace, result.termination, result.objective_trace
"""

import json
import os
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from grassmann_core import (
    DimensionMismatch,
    GrassmannError,
    InvalidWeight,
    RankDeficient,
    Subspace,
    UnequalDimensions,
    exp_map,
    geodesic_distance,
    log_map_many,
    normalize_signs,
    orthonormalize,
    save_subspace,
    sin_squared_sum,
    write_matrix_csv,
)
from synth import as_points, uniform_point

# ─── Constants ────────────────────────────────────────────────────────────────
DEFAULT_EPS = 1e-7
DEFAULT_DELTA = 1e-11
DEFAULT_MAX_ITERS = 1000
DEFAULT_STEP_SIZE = 0.01
SOLVER_DEFAULTS_FILE = os.getenv(
    'FLAGMED_SOLVER_DEFAULTS',
    os.path.join(os.path.dirname(os.path.abspath(__file__)), 'solver_defaults.json'),
)
METHODS = ('flag_median', 'flag_mean', 'l2_median', 'gd_flag_median')


def load_solver_defaults(path=None):
    """Solver defaults from solver_defaults.json, falling back to the constants."""
    defaults = {
        'eps': DEFAULT_EPS,
        'delta': DEFAULT_DELTA,
        'max_iters': DEFAULT_MAX_ITERS,
        'step_size': DEFAULT_STEP_SIZE,
    }
    path = path or SOLVER_DEFAULTS_FILE
    try:
        with open(path) as f:
            overrides = json.load(f)
        defaults.update({k: v for k, v in overrides.items() if k in defaults})
    except FileNotFoundError:
        pass
    except (json.JSONDecodeError, AttributeError) as e:
        print(f"[!] {path} unreadable ({e}), using built-in solver defaults")
    return defaults


# ═══════════════════════════════════════════════════════════════════════════════
#  CONFIG & RESULT TYPES
# ═══════════════════════════════════════════════════════════════════════════════

class Termination(str, Enum):
    CONVERGED = 'converged'
    OBJECTIVE_INCREASED = 'objective_increased'
    ITERATION_CAP = 'iteration_cap'


@dataclass(frozen=True, eq=False)
class Init:
    """Where an iterative solver starts: random(seed), datapoint(index) or explicit(subspace)."""
    kind: str = 'random'
    seed: int = 0
    index: int = 0
    point: Subspace = None

    @classmethod
    def random(cls, seed=0):
        return cls('random', seed=int(seed))

    @classmethod
    def datapoint(cls, index):
        return cls('datapoint', index=int(index))

    @classmethod
    def explicit(cls, point):
        return cls('explicit', point=point)

    @classmethod
    def parse(cls, text, seed=0):
        """'random' or 'datapoint:<i>' (the CLI spelling)."""
        text = text.strip()
        if text == 'random':
            return cls.random(seed)
        if text.startswith('datapoint:'):
            try:
                return cls.datapoint(int(text.split(':', 1)[1]))
            except ValueError:
                pass
        raise GrassmannError(f"Unknown init {text!r}; use 'random' or 'datapoint:<index>'")

    def describe(self):
        if self.kind == 'datapoint':
            return f"datapoint:{self.index}"
        return self.kind

    def resolve(self, points, r):
        n = points[0].ambient_dim
        if self.kind == 'random':
            return uniform_point(n, r, self.seed, tag='solver_init')
        if self.kind == 'datapoint':
            if not 0 <= self.index < len(points):
                raise GrassmannError(f"Init datapoint {self.index} out of range for {len(points)} points")
            X = points[self.index]
            if X.sub_dim < r:
                raise DimensionMismatch(
                    f"Init datapoint {self.index} has dimension {X.sub_dim} < r = {r}")
            return X.leading(r)
        if self.kind == 'explicit':
            if self.point.ambient_dim != n or self.point.sub_dim != r:
                raise DimensionMismatch(
                    f"Explicit init is Gr({self.point.sub_dim}, {self.point.ambient_dim}), need Gr({r}, {n})")
            return self.point
        raise GrassmannError(f"Unknown init kind {self.kind!r}")


@dataclass(frozen=True)
class SolverConfig:
    r: int
    eps: float = DEFAULT_EPS
    delta: float = DEFAULT_DELTA
    max_iters: int = DEFAULT_MAX_ITERS
    init: Init = field(default_factory=Init)
    step_size: float = DEFAULT_STEP_SIZE

    def __post_init__(self):
        if int(self.r) < 1:
            raise GrassmannError(f"r must be >= 1, got {self.r}")
        if not self.eps > 0:
            raise GrassmannError(f"eps must be > 0, got {self.eps}")
        if not self.delta > 0:
            raise GrassmannError(f"delta must be > 0, got {self.delta}")
        if int(self.max_iters) < 1:
            raise GrassmannError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.step_size > 0:
            raise GrassmannError(f"step_size must be > 0, got {self.step_size}")

    @classmethod
    def from_defaults(cls, r, path=None, **overrides):
        values = load_solver_defaults(path)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(r=r, **values)

    def with_overrides(self, **deltas):
        return replace(self, **{k: v for k, v in deltas.items() if v is not None})


@dataclass(frozen=True, eq=False)
class FlagPrototype:
    """Left singular vectors in descending singular-value order; the leading
    r columns are the Grassmann prototype, every prefix is a flag member."""
    full_basis: np.ndarray
    r: int
    singular_values: np.ndarray = None

    @property
    def subspace(self):
        return Subspace(self.full_basis[:, :self.r])

    def nested(self, j):
        if not 1 <= j <= self.full_basis.shape[1]:
            raise DimensionMismatch(f"Flag has {self.full_basis.shape[1]} members, asked for {j}")
        return Subspace(self.full_basis[:, :j])


@dataclass
class SolverResult:
    method: str
    prototype: object
    objective_trace: list
    iterations: int
    termination: Termination
    config: SolverConfig = None

    @property
    def subspace(self):
        p = self.prototype
        return p.subspace if isinstance(p, FlagPrototype) else p

    @property
    def objective(self):
        """Objective at the returned prototype."""
        if self.termination == Termination.OBJECTIVE_INCREASED:
            return self.objective_trace[-2]
        return self.objective_trace[-1]

    def to_dict(self, prototype_path=None, flag_basis_path=None):
        cfg = self.config
        payload = {
            'method': self.method,
            'r': cfg.r if cfg else self.subspace.sub_dim,
            'eps': cfg.eps if cfg else None,
            'delta': cfg.delta if cfg else None,
            'max_iters': cfg.max_iters if cfg else None,
            'init': cfg.init.describe() if cfg else None,
            'seed': cfg.init.seed if cfg and cfg.init.kind == 'random' else None,
            'iterations': self.iterations,
            'termination': self.termination.value,
            'objective_trace': [float(v) for v in self.objective_trace],
            'prototype_path': prototype_path,
        }
        if flag_basis_path:
            payload['flag_basis_path'] = flag_basis_path
        return payload


def save_result(result, out_dir, stem=None):
    """Write <stem>.json and <stem>_prototype.csv (+ <stem>_flag_basis.csv). Returns the JSON path."""
    os.makedirs(out_dir, exist_ok=True)
    stem = stem or result.method
    proto_name = f"{stem}_prototype.csv"
    save_subspace(os.path.join(out_dir, proto_name), result.subspace)
    flag_name = None
    if isinstance(result.prototype, FlagPrototype):
        flag_name = f"{stem}_flag_basis.csv"
        write_matrix_csv(os.path.join(out_dir, flag_name), result.prototype.full_basis)
    json_path = os.path.join(out_dir, f"{stem}.json")
    with open(json_path, 'w') as f:
        json.dump(result.to_dict(proto_name, flag_name), f, indent=2, sort_keys=True)
    return json_path


# ═══════════════════════════════════════════════════════════════════════════════
#  OBJECTIVES
# ═══════════════════════════════════════════════════════════════════════════════

def _radicands(points, Y):
    return np.array([sin_squared_sum(X, Y) for X in points])


def objective_chordal_sum(data, Y):
    """Flag median objective: sum of chordal distances."""
    return float(np.sum(np.sqrt(np.maximum(_radicands(as_points(data), Y), 0.0))))


def objective_chordal_sq_sum(data, Y):
    """Flag mean objective: sum of squared chordal distances."""
    return float(np.sum(_radicands(as_points(data), Y)))


def _require_equal_dims(points, r):
    odd = [i for i, X in enumerate(points) if X.sub_dim != r]
    if odd:
        raise UnequalDimensions(
            f"Geodesic prototypes need every k_i = r = {r}; point {odd[0]} has k = {points[odd[0]].sub_dim}")


def objective_geodesic_sum(data, Y):
    """l2-median objective: sum of geodesic distances."""
    points = as_points(data)
    _require_equal_dims(points, Y.sub_dim)
    return float(sum(geodesic_distance(X, Y) for X in points))


# ═══════════════════════════════════════════════════════════════════════════════
#  FLAG MEAN
# ═══════════════════════════════════════════════════════════════════════════════

def _check_r(points, r):
    n = points[0].ambient_dim
    if not 1 <= r <= n:
        raise DimensionMismatch(f"Need 1 <= r <= n = {n}, got r = {r}")


def _flag_from_columns(columns, r):
    U, S, _ = np.linalg.svd(columns, full_matrices=False)
    tol = S[0] * max(columns.shape) * np.finfo(float).eps
    rank = int(np.sum(S > tol))
    if r > rank:
        raise RankDeficient(rank, r, "flag mean: r exceeds the rank of the stacked representatives")
    return FlagPrototype(normalize_signs(U), r, S)


def flag_mean(data, r):
    points = as_points(data)
    _check_r(points, r)
    return _flag_from_columns(np.hstack([X.basis for X in points]), r)


def weighted_flag_mean(data, weights, r):
    points = as_points(data)
    _check_r(points, r)
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != len(points):
        raise InvalidWeight(f"{w.size} weights for {len(points)} points")
    bad = np.flatnonzero(~(np.isfinite(w) & (w > 0)))
    if bad.size:
        raise InvalidWeight(f"Weight {bad[0]} is {w[bad[0]]}; weights must be finite and > 0")
    return _flag_from_columns(np.hstack([wi * X.basis for wi, X in zip(w, points)]), r)


# ═══════════════════════════════════════════════════════════════════════════════
#  ITERATION DRIVER
# ═══════════════════════════════════════════════════════════════════════════════

def _run_iterations(method, points, cfg, start, step, objective, rollback=True):
    """Shared stopping logic.

    step(Y) -> (next Subspace, prototype object). Every iterate's objective
    goes into the trace, including a rejected one. A change smaller than
    delta in either direction counts as convergence; a larger increase rolls
    back to the iterate before it.
    """
    Y, proto = start
    trace = [objective(points, Y)]
    termination = Termination.ITERATION_CAP
    for _ in range(cfg.max_iters):
        candidate, candidate_proto = step(Y)
        value = objective(points, candidate)
        previous = trace[-1]
        trace.append(value)
        if abs(previous - value) < cfg.delta:
            Y, proto = candidate, candidate_proto
            termination = Termination.CONVERGED
            break
        if rollback and value > previous:
            termination = Termination.OBJECTIVE_INCREASED
            break
        Y, proto = candidate, candidate_proto
    return SolverResult(method, proto, trace, len(trace) - 1, termination, cfg)


# ═══════════════════════════════════════════════════════════════════════════════
#  FLAG MEDIAN (FlagIRLS)
# ═══════════════════════════════════════════════════════════════════════════════

def flag_irls_weights(data, Y, eps=DEFAULT_EPS):
    radicands = np.maximum(_radicands(as_points(data), Y), 0.0)
    return (1.0 / (radicands + eps)) ** 0.25


def flag_irls_step(data, Y, eps=DEFAULT_EPS):
    """One FlagIRLS update from Y: weighted flag mean with the current weights."""
    points = as_points(data)
    return weighted_flag_mean(points, flag_irls_weights(points, Y, eps), Y.sub_dim)


def flag_median(data, cfg):
    points = as_points(data)
    _check_r(points, cfg.r)
    Y0 = cfg.init.resolve(points, cfg.r)

    def step(Y):
        proto = flag_irls_step(points, Y, cfg.eps)
        return proto.subspace, proto

    start = (Y0, FlagPrototype(np.array(Y0.basis), cfg.r))
    return _run_iterations('flag_median', points, cfg, start, step, objective_chordal_sum)


# ═══════════════════════════════════════════════════════════════════════════════
#  L2-MEDIAN (Weiszfeld-type)
# ═══════════════════════════════════════════════════════════════════════════════

def weiszfeld_step(data, Y, eps=DEFAULT_EPS):
    """Y moved along the distance-weighted average of the log maps to the data."""
    points = as_points(data)
    logs = log_map_many(Y, points)
    distances = np.sqrt(np.einsum('pnk,pnk->p', logs, logs))
    weights = 1.0 / np.maximum(distances, eps)
    tangent = np.einsum('p,pnk->nk', weights, logs) / weights.sum()
    # strip the roundoff-level vertical part
    tangent -= Y.basis @ (Y.basis.T @ tangent)
    return exp_map(Y, tangent)


def l2_median(data, cfg):
    points = as_points(data)
    _check_r(points, cfg.r)
    _require_equal_dims(points, cfg.r)
    Y0 = cfg.init.resolve(points, cfg.r)

    def step(Y):
        Z = weiszfeld_step(points, Y, cfg.eps)
        return Z, Z

    return _run_iterations('l2_median', points, cfg, (Y0, Y0), step, objective_geodesic_sum,
                           rollback=False)


# ═══════════════════════════════════════════════════════════════════════════════
#  GRADIENT DESCENT BASELINE
# ═══════════════════════════════════════════════════════════════════════════════

def flag_median_gradient(data, Y, eps=DEFAULT_EPS):
    """Horizontal (Riemannian) gradient of the flag median objective at Y."""
    points = as_points(data)
    B = Y.basis
    G = np.zeros_like(B)
    for X, radicand in zip(points, np.maximum(_radicands(points, Y), 0.0)):
        G -= X.basis @ (X.basis.T @ B) / np.sqrt(radicand + eps)
    return G - B @ (B.T @ G)


def flag_median_gd(data, cfg):
    points = as_points(data)
    _check_r(points, cfg.r)
    Y0 = cfg.init.resolve(points, cfg.r)

    def step(Y):
        H = flag_median_gradient(points, Y, cfg.eps)
        Z = orthonormalize(Y.basis - cfg.step_size * H)
        return Z, Z

    return _run_iterations('gd_flag_median', points, cfg, (Y0, Y0), step, objective_chordal_sum)


# ═══════════════════════════════════════════════════════════════════════════════
#  DISPATCH
# ═══════════════════════════════════════════════════════════════════════════════

def solve(method, data, cfg):
    """Run any prototype method and return a SolverResult."""
    method = method.replace('-', '_')
    if method == 'flag_median':
        return flag_median(data, cfg)
    if method == 'l2_median':
        return l2_median(data, cfg)
    if method == 'gd_flag_median':
        return flag_median_gd(data, cfg)
    if method == 'flag_mean':
        points = as_points(data)
        proto = flag_mean(points, cfg.r)
        value = objective_chordal_sq_sum(points, proto.subspace)
        return SolverResult('flag_mean', proto, [value], 0, Termination.CONVERGED, cfg)
    raise GrassmannError(f"Unknown method {method!r}; choose from {', '.join(METHODS)}")
