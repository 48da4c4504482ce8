import csv

import numpy as np
import pytest

from smlp import network as nn
from smlp.cli import main
from smlp.config import ConfigError, dump_config, format_units, load_config, parse_units
from smlp.datamodel import LabeledDataset, read_dataset, write_dataset
from smlp.optim import Method

SMALL_COUNTS = ["--set", "counts.anticipated=24", "--set", "counts.breaking=24",
                "--set", "counts.commemorative=24", "--set", "counts.meme=24",
                "--set", "counts.ongoing=24", "--set", "counts.atemporal=24"]


# --- config -----------------------------------------------------------------

def test_defaults():
    cfg = load_config()
    assert cfg.train.epochs == 200 and cfg.train.batch_size == 32
    assert cfg.optim.method is Method.ADAM and cfg.optim.alpha == 1e-3
    assert cfg.units == ((28, 64, 64), (64, 64, 64), (64, 32, 6))
    assert cfg.synthetic.counts == (988, 531, 304, 315, 2520, 5712)


def test_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\n"
                    "train.epochs = 12  # trailing\n"
                    "optim.method = Constant_Nesterov\n"
                    "counts.meme = 40\n"
                    "model.units = 28,16; 16,6\n"
                    "split.stratified = no\n"
                    "features.sse_span = long\n")
    cfg = load_config(path, {"seed": "5", "train.batch_size": "8"})
    assert cfg.train.epochs == 12 and cfg.train.batch_size == 8
    assert cfg.optim.method is Method.CONSTANT_NESTEROV
    assert cfg.synthetic.counts[3] == 40 and cfg.synthetic.seed == 5
    assert cfg.split_seed == 5 and cfg.train.seed == 5
    assert cfg.units == ((28, 16), (16, 6)) and cfg.stratified is False
    assert cfg.features.sse_span == "long"


@pytest.mark.parametrize("line", [
    "train.epochs = -1",
    "train.batch_size = 0",
    "nonsense.key = 1",
    "train.no_such = 1",
    "optim.method = rmsprop",
    "optim.alpha = 0",
    "counts.unknown = 3",
    "compare.fractions = 0.2 0.9",
    "just words",
    "split.stratified = maybe",
])
def test_config_errors_carry_line(tmp_path, line):
    path = tmp_path / "bad.cfg"
    path.write_text("train.epochs = 3\n" + line + "\n")
    with pytest.raises(ConfigError, match=":2:"):
        load_config(path)


def test_dump_load_roundtrip(tmp_path):
    cfg = load_config(None, {"seed": "9", "compare.methods": "adam constant_sgd",
                             "compare.fractions": "0.2 0.4", "noise.sigma": "2.5"})
    path = tmp_path / "dump.cfg"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


def test_units_text():
    assert parse_units("28,64,64; 64,32,6") == ((28, 64, 64), (64, 32, 6))
    assert format_units(((28, 6),)) == "28,6"
    with pytest.raises(ValueError):
        parse_units(" ; ")


# --- CLI --------------------------------------------------------------------

def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["generate", "--out", str(d / "inst.jsonl"), "--seed", "3"] + SMALL_COUNTS) == 0
    assert main(["extract", "--instances", str(d / "inst.jsonl"), "--out", str(d / "ds.txt")]) == 0
    return d


def test_generate_and_extract(small_dataset):
    ds = read_dataset(small_dataset / "ds.txt")
    assert ds.X.shape == (144, 28)
    assert np.bincount(ds.y).tolist() == [24] * 6


def test_split_command_is_deterministic(small_dataset):
    a, b = small_dataset / "s1", small_dataset / "s2"
    for out in (a, b):
        assert main(["split", "--dataset", str(small_dataset / "ds.txt"), "--out", str(out), "--seed", "4"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_train_and_evaluate(small_dataset):
    d = small_dataset
    args = ["--set", "train.epochs=5", "--set", "model.units=28,16;16,6"]
    assert main(["train", "--dataset", str(d / "ds.txt"), "--checkpoint", str(d / "m.ckpt"),
                 "--curve", str(d / "curve.csv"), "--val-curve", str(d / "val.csv")] + args) == 0
    curve = read_csv(d / "curve.csv")
    assert curve[0] == ["iteration", "loss"] and len(curve) == 6
    assert len(read_csv(d / "val.csv")) == 7
    assert nn.load_checkpoint(d / "m.ckpt").feature_stats is not None
    assert main(["evaluate", "--checkpoint", str(d / "m.ckpt"), "--dataset", str(d / "ds.txt"),
                 "--metrics", str(d / "metrics.csv"), "--confusion", str(d / "conf.csv")]) == 0
    metrics = read_csv(d / "metrics.csv")
    assert metrics[0] == ["model", "class", "precision", "AP", "MAP", "macro_precision"]
    assert len(metrics) == 7
    conf = read_csv(d / "conf.csv")
    assert conf[0][0] == "true/predicted" and len(conf) == 7
    assert sum(int(v) for row in conf[1:] for v in row[1:]) == 6 * 7


def test_compare_commands(small_dataset):
    d = small_dataset
    args = ["--set", "compare.epochs=2", "--set", "compare.fractions=0.2 0.7",
            "--set", "compare.methods=adam constant_sgd", "--set", "train.epochs=2"]
    assert main(["compare-optimizers", "--dataset", str(d / "ds.txt"), "--out-dir", str(d / "co")] + args) == 0
    names = sorted(p.name for p in (d / "co").iterdir())
    assert names == ["curve_20_adam.csv", "curve_20_constant_sgd.csv", "curve_70_adam.csv",
                     "curve_70_constant_sgd.csv", "final_losses.csv"]
    assert len(read_csv(d / "co" / "curve_70_adam.csv")) == 3
    assert main(["compare-models", "--dataset", str(d / "ds.txt"), "--out", str(d / "cm.csv")] + args) == 0
    rows = read_csv(d / "cm.csv")
    assert [r[0] for r in rows[1:]] == ["GaussianNB"] * 6 + ["MLP"] * 6 + ["S-MLP"] * 6


def test_exit_codes(tmp_path, small_dataset):
    assert main(["train", "--dataset", str(small_dataset / "ds.txt"), "--checkpoint", str(tmp_path / "m"),
                 "--curve", str(tmp_path / "c"), "--set", "train.epochs=-3"]) == 2
    assert main(["split", "--dataset", str(tmp_path / "missing"), "--out", str(tmp_path / "s")]) == 3
    (tmp_path / "junk").write_text("not a dataset\n")
    assert main(["split", "--dataset", str(tmp_path / "junk"), "--out", str(tmp_path / "s")]) == 3
    assert main(["split", "--dataset", "x", "--out", "y", "--set", "novalue"]) == 2
    with pytest.raises(SystemExit):
        main(["no-such-command"])


def test_divergence_exit_code(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 28))
    y = np.arange(60) % 6
    write_dataset(LabeledDataset(X, y), tmp_path / "ds.txt")
    code = main(["train", "--dataset", str(tmp_path / "ds.txt"), "--checkpoint", str(tmp_path / "m"),
                 "--curve", str(tmp_path / "c"), "--set", "optim.method=constant_sgd",
                 "--set", "optim.alpha=1e300", "--set", "train.epochs=3"])  # one step overflows
    assert code == 4
