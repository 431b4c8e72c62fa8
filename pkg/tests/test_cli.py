"""Test the command line interface end to end on a toy configuration."""
import csv
import json
import os

import pytest

from latentdg.cli import parse_int_range, run_command

TOY_CONFIG = """\
# toy run
num_classes = 2
n_per_domain = 20
image_size = 8
val_fraction = 0.2
epochs = 1
batch_size = 8
channels = 4, 4, 4
tap_layers = 0, 1
discriminator_hidden = 8
target_dim = 8
k_hat = 2
augment = false
"""


@pytest.fixture
def toy_config(tmp_path):
    path = tmp_path / 'toy.cfg'
    path.write_text(TOY_CONFIG)
    return str(path)


def test_parse_int_range():
    assert parse_int_range('2..4') == (2, 3, 4)
    assert parse_int_range('1,3') == (1, 3)
    assert parse_int_range('5') == (5,)


def test_usage_errors():
    assert run_command([]) == 2
    assert run_command(['frobnicate']) == 2
    assert run_command(['train', '--bogus']) == 2
    assert run_command(['sweep', '--k-hat', 'two']) == 2
    assert run_command(['--help']) == 0


def test_runtime_failure(toy_config, tmp_path):
    missing = str(tmp_path / 'missing.bin')
    assert run_command(['eval', '--config', toy_config,
                        '--checkpoint', missing, '-q']) == 1
    assert run_command(['train', '--config', toy_config,
                        '--held-out-domain', '7', '-q']) == 1


def test_train_then_eval(toy_config, tmp_path, capsys):
    run_dir = str(tmp_path / 'run')
    status = run_command(['train', '--config', toy_config, '--mode',
                          'deep_all', '--run-dir', run_dir, '--seed', '3',
                          '-q'])
    assert status == 0
    for name in ('metrics.jsonl', 'checkpoint.bin', 'config.echo'):
        assert os.path.exists(os.path.join(run_dir, name))
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary['mode'] == 'deep_all'

    status = run_command(['eval', '--config', toy_config, '--checkpoint',
                          os.path.join(run_dir, 'checkpoint.bin'),
                          '--split', 'target', '--seed', '3', '-q'])
    assert status == 0
    result = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert result['split'] == 'target'
    assert result['n'] == 20
    assert result['accuracy'] == pytest.approx(summary['target_acc'])
    assert os.path.exists(os.path.join(run_dir, 'eval.echo'))


def test_eval_rejects_mismatched_data(toy_config, tmp_path):
    run_dir = str(tmp_path / 'run')
    assert run_command(['train', '--config', toy_config, '--run-dir',
                        run_dir, '-q']) == 0
    assert run_command(['eval', '--config', toy_config, '--checkpoint',
                        os.path.join(run_dir, 'checkpoint.bin'),
                        '--image-size', '16', '-q']) == 1


def test_sweep(toy_config, tmp_path):
    out = str(tmp_path / 'sweep')
    status = run_command(['sweep', '--config', toy_config, '--k-hat', '2..3',
                          '--seeds', '2', '--out', out, '-q'])
    assert status == 0
    run_dirs = [d for d in os.listdir(out)
                if os.path.isdir(os.path.join(out, d))]
    assert sorted(run_dirs) == ['full_k2_d2_s1', 'full_k2_d2_s2',
                                'full_k3_d2_s1', 'full_k3_d2_s2']
    with open(os.path.join(out, 'summary.csv')) as f:
        rows = list(csv.DictReader(f))
    assert [r['n'] for r in rows] == ['2', '2']
    assert os.path.exists(os.path.join(out, 'config.echo'))


def test_cluster_report(toy_config, tmp_path, capsys):
    report = str(tmp_path / 'report.csv')
    status = run_command(['cluster-report', '--config', toy_config,
                          '--k-hat', '3', '--out', report, '-q'])
    assert status == 0
    out = capsys.readouterr().out
    assert 'NMI(pseudo, domain)' in out
    assert 'NMI(pseudo, category)' in out
    with open(report) as f:
        rows = list(csv.DictReader(f))
    assert rows[0]['k_hat'] == '3'
    assert rows[0]['n_samples'] == '60'
    assert 0.0 <= float(rows[0]['nmi_domain']) <= 1.0
    echo = (tmp_path / 'report.echo').read_text()
    assert 'k_hat = 3' in echo.splitlines()


def test_cluster_report_ddf_dump(toy_config, tmp_path):
    ddf_path = str(tmp_path / 'ddf.csv')
    status = run_command(['cluster-report', '--config', toy_config,
                          '--out', str(tmp_path / 'report.csv'),
                          '--ddf-csv', ddf_path, '-q'])
    assert status == 0
    with open(ddf_path) as f:
        rows = list(csv.reader(f))
    # Two taps of 4 channels, mean and deviation each.
    assert len(rows[0]) == 16
    assert rows[0][:2] == ['layer0_mu_0', 'layer0_mu_1']
    assert len(rows) == 1 + 60


def test_eval_echo_directory(toy_config, tmp_path):
    run_dir = str(tmp_path / 'run')
    assert run_command(['train', '--config', toy_config, '--run-dir',
                        run_dir, '-q']) == 0
    out = str(tmp_path / 'eval')
    assert run_command(['eval', '--config', toy_config, '--checkpoint',
                        os.path.join(run_dir, 'checkpoint.bin'), '--split',
                        'val', '--out', out, '-q']) == 0
    assert os.path.exists(os.path.join(out, 'eval.echo'))
    assert not os.path.exists(os.path.join(run_dir, 'eval.echo'))


def test_gen_data(toy_config, tmp_path):
    out = str(tmp_path / 'data')
    assert run_command(['gen-data', '--config', toy_config, '--out', out,
                        '-q']) == 0
    with open(os.path.join(out, 'manifest.csv')) as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 60
    assert os.path.exists(os.path.join(out, rows[0]['relative_path']))
