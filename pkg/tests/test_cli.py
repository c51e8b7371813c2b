import json

import numpy as np
import pytest

from conftest import random_point
from flag_engine import EXIT_ERROR, EXIT_INCOMPLETE, EXIT_OK, main
from grassmann_core import load_subspace
from synth import SubspaceDataset, save_dataset


@pytest.fixture
def mixed(tmp_path):
    path = tmp_path / 'mixed'
    assert main(['synth', 'mixed', '--seed', '3', '--out', str(path)]) == EXIT_OK
    return path


def test_synth_is_reproducible(tmp_path):
    for name in ('a', 'b'):
        assert main(['synth', 'outlier', '--seed', '5', '--count', '8', '--outliers', '2',
                     '--out', str(tmp_path / name)]) == EXIT_OK
    files = sorted(p.name for p in (tmp_path / 'a').iterdir())
    assert 'center.csv' in files and 'manifest.json' in files
    for name in files:
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_flag_mean_of_single_point(tmp_path, rng):
    X = random_point(rng, 6, 2)
    save_dataset(SubspaceDataset([X]), tmp_path / 'one')
    out = tmp_path / 'out'
    assert main(['prototype', str(tmp_path / 'one'), '--method', 'flag-mean', '--r', '2',
                 '--out', str(out)]) == EXIT_OK
    Y, _, _ = load_subspace(out / 'flag_mean_prototype.csv')
    assert Y == X
    record = json.loads((out / 'flag_mean.json').read_text())
    assert record['iterations'] == 0 and record['method'] == 'flag_mean'


def test_flag_median_on_mixed_dimensions(mixed, tmp_path):
    out = tmp_path / 'out'
    assert main(['prototype', str(mixed), '--method', 'flag-median', '--r', '3', '--seed', '1',
                 '--out', str(out)]) == EXIT_OK
    record = json.loads((out / 'flag_median.json').read_text())
    assert record['termination'] in ('converged', 'objective_increased')
    assert record['r'] == 3 and record['seed'] == 1
    assert (out / 'flag_median_flag_basis.csv').exists()


def test_l2_median_rejects_mixed_dimensions(mixed, capsys):
    assert main(['prototype', str(mixed), '--method', 'l2-median', '--r', '3']) == EXIT_ERROR
    assert '[✗]' in capsys.readouterr().out


def test_iteration_cap_exit_code(mixed, tmp_path):
    assert main(['prototype', str(mixed), '--r', '3', '--max-iters', '1',
                 '--out', str(tmp_path / 'out')]) == EXIT_INCOMPLETE
    record = json.loads((tmp_path / 'out' / 'flag_median.json').read_text())
    assert record['termination'] == 'iteration_cap'


def test_single_center_purity(tmp_path):
    data = tmp_path / 'mixture'
    assert main(['synth', 'mixture', '--seed', '0', '--out', str(data)]) == EXIT_OK
    out = tmp_path / 'codebook'
    assert main(['cluster', str(data), '--codebook', '1', '--method', 'flag-mean', '--r', '3',
                 '--out', str(out)]) == EXIT_OK
    record = json.loads((out / 'codebook.json').read_text())
    labels = [e['label'] for e in json.loads((data / 'manifest.json').read_text())['entries']]
    _, counts = np.unique(labels, return_counts=True)
    assert record['purity'] == pytest.approx(counts.max() / counts.sum())


def test_verify_flag_mean_candidate(tmp_path):
    data = tmp_path / 'cluster'
    assert main(['synth', 'cluster', '--n', '8', '--k', '2', '--count', '20', '--noise', '0.1',
                 '--out', str(data)]) == EXIT_OK
    out = tmp_path / 'out'
    assert main(['prototype', str(data), '--method', 'flag-mean', '--r', '2', '--out', str(out)]) == EXIT_OK
    assert main(['verify', str(data), str(out / 'flag_mean_prototype.csv'),
                 '--objective', 'chordal_sq_sum', '--out', str(out)]) == EXIT_OK
    assert json.loads((out / 'verify.json').read_text())['violations'] == 0


def test_mds_writes_coordinates(mixed, tmp_path):
    out = tmp_path / 'mds'
    assert main(['mds', str(mixed), '--metric', 'chordal', '--out', str(out)]) == EXIT_OK
    assert (out / 'distances_chordal.csv').exists()
    assert (out / 'mds_coords.csv').read_text().splitlines()[0] == 'label,x1,x2'


def test_unknown_experiment(capsys):
    assert main(['experiment', 'table9']) == EXIT_ERROR
    out = capsys.readouterr().out
    assert 'table2_robustness' in out and 'lbg_purity' in out


def test_malformed_dataset_names_file_and_row(mixed, capsys):
    (mixed / 'point_0001.csv').write_text('0.5,0.5,0.5\n1,x,1\n')
    assert main(['prototype', str(mixed), '--r', '3']) == EXIT_ERROR
    assert 'point_0001.csv, row 2' in capsys.readouterr().out


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv('FLAGMED_OUTPUT_DIR', str(tmp_path / 'env_out'))
    assert main(['synth', 'mixed', '--seed', '1']) == EXIT_OK
    assert (tmp_path / 'env_out' / 'mixed_seed1' / 'manifest.json').exists()


@pytest.mark.slow
def test_table2_single_seed(tmp_path):
    code = main(['experiment', 'table2_robustness', '--seeds', '0', '--out', str(tmp_path)])
    assert code in (EXIT_OK, EXIT_INCOMPLETE)
    summary = json.loads((tmp_path / 'table2_robustness' / 'summary.json').read_text())
    assert summary['seeds'] == [0]
    assert {c['label'] for c in summary['checks']} == {'table2.ordering', 'table2.ratio'}
    assert summary['passed'] == (code == EXIT_OK)


def test_usage_error_is_an_error_not_incomplete(mixed, capsys):
    assert main(['prototype', str(mixed)]) == EXIT_ERROR
    assert '--r' in capsys.readouterr().err


def test_help_exits_ok(capsys):
    assert main(['--help']) == EXIT_OK
    assert 'synth' in capsys.readouterr().out


def test_invalid_generator_parameters(tmp_path, capsys):
    assert main(['synth', 'outlier', '--count', '0', '--out', str(tmp_path / 'o')]) == EXIT_ERROR
    assert main(['synth', 'cluster', '--noise', '-1', '--out', str(tmp_path / 'c')]) == EXIT_ERROR
    out = capsys.readouterr().out
    assert 'Need at least one inlier' in out and 'noise_scale must be >= 0' in out
