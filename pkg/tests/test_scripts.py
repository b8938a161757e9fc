"""
End-to-end tests of the mpn command line through ``main``.
"""

import json

import pytest

from src.data.exporter import read_table
from src.model.params import read_config_lines
from src.scripts.main import main

TINY_CONFIG = """\
# narrow model for command-line tests
n_videos=20
n_classes=3
n_regions=2
visual_dim=8
audio_dim=6
noise_sigma=0.3
d_model=16
n_heads=2
d_k=8
d_v=8
ff_hidden=32
n_mcm=1
agva_hidden=16
rank=2
n_atoms=16
epochs=2
batch_size=8
"""

METRICS = {'accuracy', 'oracle_accuracy', 'background_baseline', 'videos', 'segments'}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_CONFIG)
    return str(path)


@pytest.fixture
def bundle(config_file, tmp_path):
    path = str(tmp_path / "data" / "tiny.mpnf")
    assert main(['gen-data', '--spec', config_file, '--out', path, '--seed', '4', '--quiet']) == 0
    return path


@pytest.fixture
def model(bundle, config_file, tmp_path):
    out = str(tmp_path / "runs" / "tiny")
    assert main(['train', '--data', bundle, '--config', config_file, '--out', out, '--quiet']) == 0
    return out + '.npz'


def _metrics(text):
    values = {}
    for line in text.splitlines():
        parts = line.split('\t')
        if len(parts) == 2 and parts[0] in METRICS:
            values[parts[0]] = float(parts[1])
    return values


def test_gen_data_is_deterministic(config_file, tmp_path, capsys):
    first, second = tmp_path / "a.mpnf", tmp_path / "b.mpnf"
    for path in (first, second):
        assert main(['gen-data', '--spec', config_file, '--out', str(path), '--seed', '4', '--quiet']) == 0
    assert first.read_bytes() == second.read_bytes()
    out = capsys.readouterr().out
    assert "class\ttrain\tval\ttest\ttotal\tevent_segments" in out


def test_gen_data_seed_changes_bytes(config_file, tmp_path):
    first, second = tmp_path / "a.mpnf", tmp_path / "b.mpnf"
    main(['gen-data', '--spec', config_file, '--out', str(first), '--seed', '4', '--quiet'])
    main(['gen-data', '--spec', config_file, '--out', str(second), '--seed', '5', '--quiet'])
    assert first.read_bytes() != second.read_bytes()


def test_train_writes_models_and_epoch_log(model, tmp_path):
    runs = tmp_path / "runs"
    assert (runs / "tiny.npz").exists()
    assert (runs / "tiny.best.npz").exists()
    records = [json.loads(line) for line in (runs / "tiny.npz.epochs.jsonl").read_text().splitlines()]
    assert [r['epoch'] for r in records] == [0, 1]
    assert records[0]['tau'] == 30.0


def test_saved_models_record_their_scoring_temperature(model, tmp_path):
    runs = tmp_path / "runs"
    records = [json.loads(line) for line in (runs / "tiny.npz.epochs.jsonl").read_text().splitlines()]
    accuracies = [r['val_accuracy'] for r in records]
    best = records[accuracies.index(max(accuracies))]

    def recorded_tau(path):
        lines = dict(line.split('=', 1) for line in read_config_lines(str(path)))
        return float(lines['eval_tau'])
    assert recorded_tau(runs / "tiny.npz") == pytest.approx(records[-1]['tau'])
    assert recorded_tau(runs / "tiny.best.npz") == pytest.approx(best['tau'])


def test_eval_prints_metrics_and_dump_recounts(bundle, model, tmp_path, capsys):
    dump = tmp_path / "preds.tsv"
    capsys.readouterr()
    assert main(['eval', '--data', bundle, '--model', model, '--dump-preds', str(dump), '--quiet']) == 0
    metrics = _metrics(capsys.readouterr().out)
    assert set(metrics) == METRICS
    frame = read_table(str(dump))
    assert len(frame) == metrics['videos'] * 10 == metrics['segments']
    assert frame.groupby('video_id').size().eq(10).all()
    recount = (frame['true_label'] == frame['pred_label']).mean()
    assert recount == pytest.approx(metrics['accuracy'], abs=1e-4)
    assert "# background_label=3" in dump.read_text()


def test_noiseless_data_gives_perfect_oracle(config_file, tmp_path, capsys):
    path = str(tmp_path / "clean.mpnf")
    out = str(tmp_path / "clean")
    assert main(['gen-data', '--spec', config_file, '--out', path, '--noise', '0', '--quiet']) == 0
    assert main(['train', '--data', path, '--config', config_file, '--out', out, '--epochs', '1', '--quiet']) == 0
    capsys.readouterr()
    assert main(['eval', '--data', path, '--model', out + '.npz', '--quiet']) == 0
    assert _metrics(capsys.readouterr().out)['oracle_accuracy'] == 1.0


def test_eval_with_missing_model_is_data_error(bundle, tmp_path):
    assert main(['eval', '--data', bundle, '--model', str(tmp_path / "absent.npz")]) == 2


def test_corrupt_bundle_is_data_error(bundle, config_file, tmp_path):
    with open(bundle, 'r+b') as f:
        f.write(b'JUNK')
    assert main(['train', '--data', bundle, '--config', config_file, '--out', str(tmp_path / "m")]) == 2


def test_config_error_exits_with_one(bundle, config_file, tmp_path):
    assert main(['train', '--data', bundle, '--config', config_file, '--out', str(tmp_path / "m"),
                 '--network', 'sequential']) == 1


def test_bad_flag_exits_with_one():
    with pytest.raises(SystemExit) as info:
        main(['train', '--no-such-flag'])
    assert info.value.code == 1


def test_unknown_ablation_axis(bundle, config_file):
    assert main(['ablate', '--data', bundle, '--config', config_file, '--axis', 'dropout']) == 1


@pytest.mark.parametrize("axis,settings", [
    ('mcm', ['SA+SA', 'CMA+CMA', 'CMA+SA', 'SA+CMA']),
    ('squeeze', ['concat', 'product', 'addition', 'fbc']),
    ('network', ['localization', 'classification', 'parallel']),
])
def test_ablate_emits_one_row_per_setting(axis, settings, bundle, config_file, tmp_path, capsys):
    table = tmp_path / "ablation.tsv"
    capsys.readouterr()
    assert main(['ablate', '--data', bundle, '--config', config_file, '--axis', axis, '--epochs', '1',
                 '--out', str(table), '--quiet']) == 0
    frame = read_table(str(table))
    assert frame['setting'].tolist() == settings
    assert (frame['axis'] == axis).all()
    assert list(frame.columns) == ['axis', 'setting', 'full', 'weak']
    assert frame[['full', 'weak']].apply(lambda col: col.between(0.0, 1.0).all()).all()


def test_grad_check_passes(capsys):
    assert main(['grad-check', '--quiet']) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "end_to_end.full" in out


def test_grad_check_detects_injected_bug(capsys):
    assert main(['grad-check', '--inject-bug', '--quiet']) == 3
    assert "loss.bce_sigmoid" in capsys.readouterr().err
