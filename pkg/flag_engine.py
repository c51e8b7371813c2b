#!/usr/bin/env python3
"""
flag_engine.py — Command line for subspace prototypes

  python flag_engine.py synth outlier --seed 7 --out data/outlier
  python flag_engine.py prototype data/outlier --method flag-median --r 3
  python flag_engine.py cluster data/mixture --codebook 8 --method flag-median --r 3
  python flag_engine.py mds data/outlier --metric geodesic --dim 2
  python flag_engine.py verify data/outlier flagmed_out/flag_median_prototype.csv --objective chordal_sum
  python flag_engine.py experiment table2_robustness

Exit codes: 0 success, 1 error, 2 finished without success
(iteration cap hit, verification violations, failed experiment checks).
Outputs go to FLAGMED_OUTPUT_DIR (.env or environment, default ./flagmed_out)
unless --out is given.
"""

import argparse
import json
import os
import sys

from dotenv import load_dotenv

load_dotenv(os.path.join(os.path.dirname(os.path.abspath(__file__)), '.env'))

from analysis import OBJECTIVES, classical_mds, distance_matrix, verify_local_min  # noqa: E402
from clustering import LBG_METHODS, lbg_cluster, save_codebook  # noqa: E402
from experiments import EXPERIMENTS, ExperimentSpec, run_experiment  # noqa: E402
from grassmann_core import GrassmannError, load_subspace, save_subspace  # noqa: E402
from prototypes import Init, SolverConfig, Termination, save_result, solve  # noqa: E402
from synth import (  # noqa: E402
    class_mixture_dataset,
    contaminated_pair_dataset,
    load_dataset,
    mixed_dim_dataset,
    outlier_dataset,
    perturbed_cluster,
    save_dataset,
    uniform_point,
)

EXIT_OK, EXIT_ERROR, EXIT_INCOMPLETE = 0, 1, 2
GENERATORS = ('mixed', 'outlier', 'cluster', 'mixture', 'pair')


def default_output_dir():
    return os.getenv('FLAGMED_OUTPUT_DIR', 'flagmed_out')


def _write_json(path, payload):
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, 'w') as f:
        json.dump(payload, f, indent=2, sort_keys=True)


# ═══════════════════════════════════════════════════════════════════════════════
#  COMMANDS
# ═══════════════════════════════════════════════════════════════════════════════

def cmd_synth(args):
    out = args.out or os.path.join(default_output_dir(), f"{args.generator}_seed{args.seed}")
    if args.generator == 'mixed':
        dataset = mixed_dim_dataset(args.seed, n=args.n)
    elif args.generator == 'outlier':
        dataset, center = outlier_dataset(args.seed, inliers=args.count, outliers=args.outliers,
                                          n=args.n, k=args.k, noise_scale=args.noise)
        dataset.provenance['center_path'] = 'center.csv'
    elif args.generator == 'cluster':
        center = uniform_point(args.n, args.k, args.seed, tag='cli_cluster_center')
        dataset = perturbed_cluster(center, args.count, args.noise, args.seed)
        dataset.provenance['center_path'] = 'center.csv'
    elif args.generator == 'mixture':
        dataset = class_mixture_dataset(args.seed, n=args.n, k=args.k, noise_scale=args.noise)
    else:
        dataset = contaminated_pair_dataset(args.seed, contamination=args.outliers, n=args.n, k=args.k)
    save_dataset(dataset, out)
    if 'center_path' in dataset.provenance:
        save_subspace(os.path.join(out, 'center.csv'), center)
    return EXIT_OK


def _solver_config(args):
    init = Init.parse(args.init, seed=args.seed)
    return SolverConfig.from_defaults(
        args.r, eps=args.eps, delta=args.delta, max_iters=args.max_iters,
        step_size=getattr(args, 'step_size', None), init=init)


def cmd_prototype(args):
    dataset = load_dataset(args.dataset)
    cfg = _solver_config(args)
    result = solve(args.method, dataset, cfg)
    out = args.out or default_output_dir()
    path = save_result(result, out, stem=result.method)
    status = '[✓]' if result.termination != Termination.ITERATION_CAP else '[!]'
    print(f"{status} {result.method}: {result.iterations} iterations, {result.termination.value}, "
          f"objective {result.objective:.10g} -> {path}")
    return EXIT_INCOMPLETE if result.termination == Termination.ITERATION_CAP else EXIT_OK


def cmd_cluster(args):
    dataset = load_dataset(args.dataset)
    cfg = SolverConfig.from_defaults(args.r, eps=args.eps, delta=args.delta, max_iters=args.max_iters)
    codebook = lbg_cluster(dataset, args.codebook, method=args.method, r=args.r,
                           seed=args.seed, max_rounds=args.max_rounds, solver_cfg=cfg)
    out = args.out or os.path.join(default_output_dir(), f"codebook_{codebook.method}_{args.codebook}")
    payload = save_codebook(codebook, out, labels=dataset.labels, seed=args.seed, r=args.r)
    purity = f", purity {payload['purity']:.4f}" if 'purity' in payload else ''
    print(f"[✓] LBG {codebook.method}: {codebook.rounds} rounds, distortion {codebook.distortion:.6g}{purity}")
    return EXIT_OK


def cmd_mds(args):
    dataset = load_dataset(args.dataset)
    D = distance_matrix(dataset, args.metric)
    embedding = classical_mds(D, args.dim)
    out = args.out or default_output_dir()
    os.makedirs(out, exist_ok=True)
    D.to_csv(os.path.join(out, f"distances_{args.metric}.csv"))
    embedding.to_csv(os.path.join(out, 'mds_coords.csv'), labels=dataset.labels)
    print(f"[✓] MDS of {D.size} subspaces ({args.metric}) -> {out}")
    return EXIT_OK


def cmd_verify(args):
    dataset = load_dataset(args.dataset)
    candidate, _, _ = load_subspace(args.candidate)
    check = verify_local_min(dataset, candidate, args.objective, n_test_points=args.test_points,
                             scale=args.scale, seed=args.seed)
    out = args.out or default_output_dir()
    payload = dict(check.to_dict(), objective=args.objective, scale=args.scale, seed=args.seed,
                   candidate=args.candidate)
    _write_json(os.path.join(out, 'verify.json'), payload)
    if check.verified:
        print(f"[✓] Verified: {check.n_test_points} test points, none below {check.candidate_objective:.10g}")
        return EXIT_OK
    print(f"[!] {check.violations}/{check.n_test_points} test points improve on the candidate")
    return EXIT_INCOMPLETE


def cmd_experiment(args):
    overrides = {k: v for k, v in (('eps', args.eps), ('delta', args.delta),
                                   ('max_iters', args.max_iters)) if v is not None}
    spec = ExperimentSpec(args.name, seeds=args.seeds, overrides=overrides,
                          output_dir=args.out or default_output_dir())
    summary = run_experiment(spec)
    return EXIT_OK if summary['passed'] else EXIT_INCOMPLETE


# ═══════════════════════════════════════════════════════════════════════════════
#  PARSER
# ═══════════════════════════════════════════════════════════════════════════════

def _add_solver_flags(p):
    p.add_argument('--r', type=int, required=True, help='prototype dimension')
    p.add_argument('--eps', type=float, default=None)
    p.add_argument('--delta', type=float, default=None)
    p.add_argument('--max-iters', type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog='flag_engine', description='Subspace prototypes on the Grassmannian')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth', help='generate a seeded synthetic dataset')
    p.add_argument('generator', choices=GENERATORS)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--n', type=int, default=20)
    p.add_argument('--k', type=int, default=3)
    p.add_argument('--count', type=int, default=180)
    p.add_argument('--outliers', type=int, default=20)
    p.add_argument('--noise', type=float, default=0.01)
    p.add_argument('--out')
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('prototype', help='compute a prototype of a dataset')
    p.add_argument('dataset')
    p.add_argument('--method', choices=('flag-median', 'flag-mean', 'l2-median', 'gd-flag-median'),
                   default='flag-median')
    _add_solver_flags(p)
    p.add_argument('--step-size', type=float, default=None)
    p.add_argument('--init', default='random', help="'random' or 'datapoint:<i>'")
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out')
    p.set_defaults(func=cmd_prototype)

    p = sub.add_parser('cluster', help='LBG clustering')
    p.add_argument('dataset')
    p.add_argument('--codebook', type=int, required=True)
    p.add_argument('--method', choices=[m.replace('_', '-') for m in LBG_METHODS], default='flag-median')
    _add_solver_flags(p)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--max-rounds', type=int, default=50)
    p.add_argument('--out')
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser('mds', help='distance matrix + classical MDS coordinates')
    p.add_argument('dataset')
    p.add_argument('--metric', choices=('chordal', 'geodesic'), default='geodesic')
    p.add_argument('--dim', type=int, default=2)
    p.add_argument('--out')
    p.set_defaults(func=cmd_mds)

    p = sub.add_parser('verify', help='test-point check of a candidate minimizer')
    p.add_argument('dataset')
    p.add_argument('candidate', help='prototype CSV')
    p.add_argument('--objective', choices=tuple(OBJECTIVES), default='chordal_sum')
    p.add_argument('--test-points', type=int, default=100)
    p.add_argument('--scale', type=float, default=1e-5)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out')
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser('experiment', help='run one of the synthetic experiments')
    p.add_argument('name', help=f"one of: {', '.join(EXPERIMENTS)}")
    p.add_argument('--seeds', type=int, nargs='+')
    p.add_argument('--eps', type=float, default=None)
    p.add_argument('--delta', type=float, default=None)
    p.add_argument('--max-iters', type=int, default=None)
    p.add_argument('--out')
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on a usage error, which would read as EXIT_INCOMPLETE
        return EXIT_OK if e.code in (0, None) else EXIT_ERROR
    try:
        return args.func(args)
    except (GrassmannError, OSError) as e:
        print(f"[✗] {e}")
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
