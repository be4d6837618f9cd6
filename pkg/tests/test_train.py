import numpy as np
import pytest

from dgrec.config import ModelConfig
from dgrec.evaluation.synth import synth_social_data
from dgrec.pipeline import dataset_from_synth
from dgrec.train import LOG_HEADER, make_context, train


@pytest.fixture(scope="module")
def small_ds():
    events, edges = synth_social_data(40, 50, sessions_per_user=6, influence_prob=0.7, seed=2)
    return dataset_from_synth(events, edges, holdout_days=14, seed=2)


def run(ds, **kw):
    cfg = ModelConfig(**{"hidden": 8, "embed": 8, "fanouts": (3, 3), "epochs": 3, "batch": 30, "seed": 1, **kw})
    ctx = make_context(ds.train, ds.valid, ds.test)
    return train(ds.train, ds.graph, cfg, len(ds.items), len(ds.users), ds.valid, ctx)


def log_values(text):
    rows = [r.split(",") for r in text.splitlines()[1:]]
    return [[float(x) if x else np.nan for x in r[3:]] for r in rows]


def test_float64_runs_are_bit_identical(small_ds):
    a, b = run(small_ds, dtype="float64"), run(small_ds, dtype="float64")
    assert a.metric_log == b.metric_log
    assert a.metric_log.splitlines()[0] == LOG_HEADER
    for k, v in a.model.state_arrays().items():
        assert np.array_equal(v, b.model.state_arrays()[k])


def test_float32_runs_agree(small_ds):
    a, b = run(small_ds, dtype="float32"), run(small_ds, dtype="float32")
    va, vb = np.array(log_values(a.metric_log)), np.array(log_values(b.metric_log))
    assert np.allclose(va, vb, atol=1e-5, rtol=0, equal_nan=True)


def test_seed_changes_the_run(small_ds):
    assert run(small_ds, dtype="float64", seed=1).metric_log != run(small_ds, dtype="float64", seed=2).metric_log


def test_log_has_train_and_valid_rows(small_ds):
    res = run(small_ds, dtype="float64")
    splits = [r.split(",")[2] for r in res.metric_log.splitlines()[1:]]
    assert splits == ["train", "valid"] * 3
    steps = [int(r.split(",")[1]) for r in res.metric_log.splitlines()[1:]]
    assert steps == sorted(steps) and steps[-1] == res.adam.step


def test_best_epoch_parameters_restored(small_ds):
    from dgrec.evaluation import evaluate

    res = run(small_ds, dtype="float64", epochs=4)
    ctx = make_context(small_ds.train, small_ds.valid, small_ds.test)
    ev = evaluate(res.model, small_ds.valid, ctx, small_ds.graph)
    assert ev.recall == res.best_recall


def test_early_stopping(small_ds):
    res = run(small_ds, dtype="float64", epochs=50, patience=1, base_lr=1e-9)
    valid_rows = [r for r in res.metric_log.splitlines()[1:] if ",valid," in r]
    assert len(valid_rows) < 50
    assert len(valid_rows) == res.best_epoch + 1


def test_max_steps_caps_training(small_ds):
    res = run(small_ds, dtype="float64", epochs=10)
    capped = train(small_ds.train, small_ds.graph, res.model.config, len(small_ds.items), len(small_ds.users),
                   small_ds.valid, make_context(small_ds.train, small_ds.valid, small_ds.test), max_steps=3)
    assert capped.adam.step == 3


def test_checkpoints_written(small_ds, tmp_path):
    from dgrec.tensorcore import load_checkpoint

    cfg = ModelConfig(hidden=8, embed=8, fanouts=(3, 3), epochs=2, batch=30)
    res = train(small_ds.train, small_ds.graph, cfg, len(small_ds.items), len(small_ds.users), small_ds.valid,
                out_dir=tmp_path)
    assert (tmp_path / "metrics.csv").read_text() == res.metric_log
    with open(tmp_path / "last.ckpt", "rb") as fh:
        _, moments, step = load_checkpoint(fh)
    assert step == res.adam.step and moments
    with open(tmp_path / "best.ckpt", "rb") as fh:
        arrays, _, _ = load_checkpoint(fh)
    for k, v in res.model.state_arrays().items():
        assert np.array_equal(arrays[k], v)
