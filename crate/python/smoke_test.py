"""Exercise the Python bindings end to end on a small synthetic site.

Build and run from the repository root:

    cargo build -p rotmap-py --release --features extension-module
    cp target/release/librotmap_py.so python/rotmap.so
    python3 python/smoke_test.py
"""

import json
import math
import random
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import rotmap  # noqa: E402


def check(cond, what):
    if not cond:
        raise AssertionError(what)
    print(f"ok  {what}")


def main():
    m = rotmap.compute_metrics([1.0, 2.0, 3.0, 4.0], [1.5, 2.0, 2.5, 4.0])
    check(m.n == 4 and math.isclose(m.rmse, math.sqrt(0.125)), "metrics rmse")
    check(abs(m.md) < 1e-15, "metrics mean deviance")

    square = [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]
    check(len(rotmap.delaunay(square)) == 2, "delaunay of a square")
    check(math.isclose(rotmap.alpha_shape_area(square, 1e6), 100.0), "alpha shape area")
    check(rotmap.alpha_shape_area(square, 1.0) == 0.0, "empty alpha shape")

    rng = random.Random(3)
    xs = [rng.random() for _ in range(50)]
    check(math.isclose(rotmap.spearman(xs, [x ** 3 for x in xs]), 1.0), "spearman monotone")

    cfg = rotmap.PipelineConfig()
    check((cfg.alpha, cfg.buffer_m, cfg.ntree, cfg.nodesize) == (25.0, 2.0, 500, 5), "config defaults")
    cfg.ntree = 100
    check(rotmap.PipelineConfig.from_toml(cfg.to_toml()).ntree == 100, "config toml round trip")

    with tempfile.TemporaryDirectory() as tmp:
        sc = rotmap.generate_scenario(tmp, seed=5)
        check(sc.n_stands == 30 and len(sc.harvester) > 0, "scenario generated")
        root = Path(sc.directory)
        table = rotmap.build_stand_table(
            [str(root / h) for h in sc.harvester], str(root / sc.segments), str(root / sc.rasters), cfg
        )
        check(len(table) > 20, f"stand table with {len(table)} stands")
        check(len(rotmap.StandTable.predictors()) == 22, "22 predictors")
        check(all(v >= 0 for v in table.br_vol), "non-negative response")

        path = root / "stands.csv"
        table.write(str(path))
        again = rotmap.StandTable.read(str(path))
        same = all(math.isclose(a, b, rel_tol=1e-5, abs_tol=1e-9) for a, b in zip(again.br_vol, table.br_vol))
        check(again.stand_ids == table.stand_ids and same, "stand table round trip (6 significant digits)")

        model = rotmap.Model.train(table, "prior", cfg)
        check(model.variable_set == "prior_to_harvest" and len(model.variables) == 17, "prior model")
        preds = model.predict_table(table)
        check(all(p >= 0 for p in preds), "calibrated predictions non-negative")
        row = {v: table.column(v)[0] for v in model.variables}
        check(math.isclose(model.predict(row), preds[0]), "single-row prediction")
        clone = rotmap.Model.from_json(model.to_json())
        check(clone.predict_table(table) == preds, "model json round trip")

        cv = rotmap.cross_validate(table, "cluster", "all", cfg)
        check(cv.strategy == "ClusterCV" and cv.metrics.n == len(table), "cluster cv")
        check(json.loads(cv.to_json())["metrics"]["n"] == len(table), "cv json")
        check(len(cv.importance) == 22, "importance per predictor")

        try:
            rotmap.StandTable.read(str(root / "missing.csv"))
        except rotmap.RotmapError as e:
            check("missing.csv" in str(e), "errors raise RotmapError")
        else:
            raise AssertionError("expected RotmapError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
