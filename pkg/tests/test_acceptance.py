"""The nine acceptance criteria, one test each, at their stated tolerances.

Every test prints a single ``criterion N PASS|FAIL: ...`` line; the lines are
also repeated in the pytest terminal summary.
"""

import csv
import math
import time
from collections import Counter, defaultdict

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from test_bursts import exhaustive_states

from smlp import network as nn
from smlp.bursts import optimal_states
from smlp.cli import main
from smlp.datamodel import FEATURE_INDEX, LabeledDataset, write_dataset
from smlp.harness import TrainConfig, compare_optimizers, evaluate, prepare, train
from smlp.ingest import read_instances
from smlp.optim import Method, OptimizerSpec, apply_update, init_state

pytestmark = pytest.mark.slow


def report(number, ok, detail):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# 1 ---------------------------------------------------------------------------

def _random_stack(rng):
    n_units = int(rng.integers(1, 4))
    dims = [28] + [int(rng.integers(3, 9)) for _ in range(n_units - 1)]
    units = []
    for k in range(n_units):
        out = 6 if k == n_units - 1 else dims[k + 1]
        hidden = [int(rng.integers(3, 9)) for _ in range(int(rng.integers(0, 2)))]
        units.append((dims[k], *hidden, out))
    return units


def test_1_gradient_correctness():
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    h = 1e-5
    worst = 0.0
    for case in range(20):
        units = _random_stack(rng)
        m = nn.init_model(units, seed=case)
        for layer in m.layers:
            layer.b = rng.normal(0, 0.1, size=layer.b.shape)
        n = int(rng.integers(1, 9))
        X, y = rng.normal(size=(n, 28)), rng.integers(0, 6, size=n)
        grads = nn.backward(m, nn.forward(m, X)[1], y)
        base = [p.copy() for p in m.params()]
        for i, g in enumerate(grads):
            for idx in np.ndindex(g.shape):
                plus = [p.copy() for p in base]
                minus = [p.copy() for p in base]
                plus[i][idx] += h
                minus[i][idx] -= h
                num = (nn.mean_loss(m.with_params(plus), y, X=X)
                       - nn.mean_loss(m.with_params(minus), y, X=X)) / (2 * h)
                scale = max(abs(g[idx]), abs(num))
                # below 1e-7 both sides are differencing noise; compare absolutely there
                err = abs(g[idx] - num) / scale if scale > 1e-7 else abs(g[idx] - num) / 1e-7
                worst = max(worst, err)
    elapsed = time.perf_counter() - start
    report(1, worst < 1e-5 and elapsed < 60,
           f"worst elementwise relative error {worst:.2e} over 20 stacks, {elapsed:.1f}s")


# 2 ---------------------------------------------------------------------------

def test_2_burst_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(500)
    mismatches = 0
    for _ in range(500):
        n = int(rng.integers(1, 13))
        counts = rng.choice([0, 1, 5], size=n).tolist()
        mismatches += optimal_states(counts) != exhaustive_states(counts)
    elapsed = time.perf_counter() - start
    report(2, mismatches == 0 and elapsed < 60,
           f"{mismatches} mismatches in 500 sampled series, {elapsed:.1f}s")


# 3 ---------------------------------------------------------------------------

def test_3_feature_invariants(default_dataset):
    X = default_dataset.X[:10_000]
    col = lambda name: X[:, FEATURE_INDEX[name]]
    flags = np.concatenate([col(n) for n in ("isPer", "isLoc", "isOrg", "isTempEx")])
    acf = np.concatenate([col("long_span_acf"), col("short_span_acf")])
    seasonal = np.concatenate([col("long_span_seasonal"), col("short_span_seasonal")])
    entropy = np.concatenate([col("CElong"), col("CEshort")])
    checks = {
        "finite": bool(np.all(np.isfinite(X))),
        "flags": bool(np.all(np.isin(flags, (0, 1)))),
        "acf": bool(np.all((acf >= -1) & (acf <= 1))),
        "seasonal": bool(np.all((seasonal >= 0) & (seasonal <= 1))),
        "KL": bool(np.all(col("long_span_KL_PT") >= 0)),
        "entropy": bool(np.all(entropy >= 0)),
    }
    failed = [k for k, ok in checks.items() if not ok]
    report(3, len(X) == 10_000 and not failed,
           f"{len(X)} vectors, failed checks: {failed or 'none'}")


# 4 ---------------------------------------------------------------------------

def test_4_dataset_replication(tmp_path, default_dataset):
    assert main(["generate", "--out", str(tmp_path / "inst.jsonl")]) == 0
    labels = Counter(int(label) for _, label in read_instances(tmp_path / "inst.jsonl"))
    counts = [labels[c] for c in range(6)]
    write_dataset(default_dataset, tmp_path / "ds.txt")
    manifests = []
    for run in range(2):
        out = tmp_path / f"split{run}.txt"
        assert main(["split", "--dataset", str(tmp_path / "ds.txt"), "--out", str(out), "--seed", "7"]) == 0
        manifests.append(out.read_bytes())
    ok = sum(counts) == 10_370 and counts == [988, 531, 304, 315, 2520, 5712] and manifests[0] == manifests[1]
    report(4, ok, f"{sum(counts)} instances {counts}, identical split manifests: {manifests[0] == manifests[1]}")


# 5 ---------------------------------------------------------------------------

def test_5_optimizer_ranking(default_dataset):
    start = time.perf_counter()
    curves = compare_optimizers(default_dataset, config=TrainConfig(), split_seed=7)
    elapsed = time.perf_counter() - start
    finals = defaultdict(dict)
    for c in curves:
        finals[c.fraction][c.method] = c.final_loss
    winners = {f: min(d, key=d.get) for f, d in finals.items()}
    wins = sum(w == Method.ADAM.value for w in winners.values())
    report(5, len(finals) == 6 and wins >= 5 and elapsed < 900,
           f"Adam lowest final loss in {wins}/6 fractions, {elapsed:.0f}s")


# 6 and 8 ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def compare_models_runs(tmp_path_factory, default_dataset):
    d = tmp_path_factory.mktemp("compare")
    write_dataset(default_dataset, d / "ds.txt")
    outputs = []
    for run in range(2):
        out = d / f"metrics{run}.csv"
        assert main(["compare-models", "--dataset", str(d / "ds.txt"), "--out", str(out), "--seed", "7"]) == 0
        outputs.append(out)
    return outputs


def test_6_model_ranking(compare_models_runs):
    with open(compare_models_runs[0], newline="") as fh:
        rows = list(csv.DictReader(fh))
    maps = {r["model"]: float(r["MAP"]) for r in rows}
    smlp, mlp, nb = maps["S-MLP"], maps["MLP"], maps["GaussianNB"]
    ok = smlp - mlp >= 0.02 and mlp - nb >= 0.02
    report(6, ok, f"MAP S-MLP {smlp:.4f}, MLP {mlp:.4f}, GaussianNB {nb:.4f} "
                  f"(gaps {100 * (smlp - mlp):+.2f} and {100 * (mlp - nb):+.2f} points)")


def test_8_determinism(compare_models_runs):
    a, b = (p.read_bytes() for p in compare_models_runs)
    report(8, a == b and len(a) > 0, f"metrics CSVs byte-identical: {a == b} ({len(a)} bytes)")


# 7 ---------------------------------------------------------------------------

def test_7_sanity_ceiling():
    rng = np.random.default_rng(7)
    # Gaussian clusters around six centres; the nearest-centre rule
    # argmax(x.c - |c|^2 / 2) is linear and must label every point correctly
    centres = rng.normal(0, 1, size=(6, 28))
    centres *= 4 / np.linalg.norm(centres, axis=1, keepdims=True)
    y = rng.integers(0, 6, size=3000)
    X = centres[y] + rng.normal(0, 0.5, size=(3000, 28))
    linear = X @ centres.T - 0.5 * np.sum(centres ** 2, axis=1)
    assert np.array_equal(np.argmax(linear, axis=1), y)
    data = prepare(LabeledDataset(X, y), 7)
    result = train(nn.init_model(seed=11), OptimizerSpec(), data.X_fit, data.y_fit, data.X_val,
                   data.y_val, TrainConfig(epochs=200))
    acc = evaluate(result.best_model, data.X_test, data.y_test).accuracy
    report(7, acc >= 0.95, f"S-MLP test accuracy {acc:.4f} after 200 Adam epochs")


# 9 ---------------------------------------------------------------------------

def test_9_closed_form_spot_checks():
    ce = nn.cross_entropy(nn.softmax(np.zeros(6)), 3)
    ce_ok = abs(ce - math.log(6)) <= 1e-12
    rng = np.random.default_rng(9)
    Z = rng.uniform(-1e4, 1e4, size=(1000, 6))
    sums_ok = bool(np.all(np.abs(nn.softmax(Z).sum(axis=1) - 1) <= 1e-12))
    alpha = OptimizerSpec().alpha
    steps = []
    for _ in range(200):
        g = rng.normal(0, 10 ** rng.uniform(-6, 3), size=(8, 8))
        p = rng.normal(size=(8, 8))
        new, _ = apply_update(OptimizerSpec(Method.ADAM), init_state([p]), [p], [g])
        steps.append(np.abs(new[0] - p).max())
    adam_ok = max(steps) < alpha
    report(9, ce_ok and sums_ok and adam_ok,
           f"|CE - ln 6| = {abs(ce - math.log(6)):.1e}, softmax sums ok: {sums_ok}, "
           f"largest first Adam step {max(steps):.3e} < {alpha}")
