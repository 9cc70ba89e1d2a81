"""Smoke test for the icelink Python extension.

Build and install it first:
    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/icelink-*.whl
"""

import json
import math
import tempfile
from pathlib import Path

import icelink


def check_truths():
    t = icelink.Truth.from_fc(1.0, 0.9)
    assert math.isclose(t.w_plus, 9.0)
    assert math.isclose(t.expectation(), 0.95)
    r = t.revise(icelink.Truth(0.0, 9.0))
    assert math.isclose(r.frequency(), 0.5)
    assert math.isclose(r.w_plus, 9.0) and math.isclose(r.w_minus, 9.0)


def check_pool():
    pool = icelink.PatternPool(capacity=100)
    pool.learn(["name:same", "sex:same"], True, 0, inference_budget=0)
    assert math.isclose(pool.score(["name:same", "sex:same"]), 0.95)
    pool.learn(["name:different", "sex:same"], False, 1)
    assert len(pool) >= 2
    again = icelink.PatternPool.from_snapshot(pool.snapshot(), capacity=100)
    assert again.patterns() and len(again) == len(pool)


def check_metrics():
    assert math.isclose(icelink.jaro("martha", "marhta"), 17 / 18)
    assert math.isclose(icelink.jaro_winkler("martha", "marhta"), 17 / 18 + 0.3 / 18)
    assert icelink.ari([0, 0, 1, 1], [0, 1, 0, 1]) == -0.5
    assert icelink.auc([0.9, 0.1, 0.5], [True, False, False]) == 1.0
    tau, f1 = icelink.best_threshold([0.9, 0.1], [True, False])
    assert f1 == 1.0 and 0.1 < tau <= 0.9
    js = icelink.pair_judgments({"id": "1", "heimild": "1801", "sex": "m"}, {"id": "2", "heimild": "1816", "sex": "m"}, 5)
    assert "heimild_diff:15" in js and "sex:same" in js


def check_benchmark():
    with tempfile.TemporaryDirectory() as tmp:
        manifest = icelink.synthesize(Path(tmp) / "data", persons=40)
        cfg = Path(tmp) / "config.json"
        cfg.write_text(json.dumps({"manifest": str(manifest), "mode": "across", "split": {"runs": 2}}))
        summary = icelink.run_benchmark(str(cfg), out_dir=str(Path(tmp) / "out"))
        header, row = summary.strip().splitlines()
        assert header.startswith("Mode,Precision,Recall,F1")
        assert row.startswith("across,")
        listing = icelink.inspect_pool(str(Path(tmp) / "out" / "across" / "pool_run_00.tsv"))
        assert listing.startswith("e\tf\tc\t")


if __name__ == "__main__":
    check_truths()
    check_pool()
    check_metrics()
    check_benchmark()
    print("icelink smoke test: ok")
