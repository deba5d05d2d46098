#!/usr/bin/env python3
"""Smoke test for the mleann_py extension module.

Either install the module first (`maturin develop --release` inside
crates/mleann-py) or just build the cdylib with cargo
(`cargo build -p mleann-py --release`); in the latter case this script
copies the shared library next to itself under the importable name.
"""

import math
import pathlib
import shutil
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent


def _ensure_module():
    try:
        import mleann_py  # noqa: F401
        return
    except ImportError:
        pass
    suffix = {"linux": ".so", "darwin": ".dylib"}.get(sys.platform, ".so")
    prefix = "" if sys.platform == "win32" else "lib"
    for profile in ("release", "debug"):
        built = ROOT / "target" / profile / f"{prefix}mleann_py{suffix}"
        if built.exists():
            staged = pathlib.Path(__file__).parent / "mleann_py.so"
            shutil.copyfile(built, staged)
            sys.path.insert(0, str(staged.parent))
            return
    sys.exit(
        "mleann_py not importable and no built library found; run "
        "`cargo build -p mleann-py --release` first"
    )


_ensure_module()
import mleann_py as ml  # noqa: E402


def check(label, ok):
    status = "ok" if ok else "FAIL"
    print(f"  {label}: {status}")
    if not ok:
        sys.exit(1)


def main():
    print("mleann_py smoke test")

    # Series generation: initial condition and the pure-decay segment.
    series = ml.mackey_glass(1000)
    check("series length", len(series) == 1000)
    check("initial condition", series[0] == 1.2)
    decay_ok = all(
        abs(series[t] - 1.2 * math.exp(-0.1 * t)) < 1e-6 for t in range(18)
    )
    check("decay segment", decay_ok)

    # Dataset windowing.
    ds = ml.Dataset.mackey_glass()
    check("dataset rows", len(ds) == 976)
    check("train split", ds.train_count == 500)
    t0, inputs, target = ds.row(0)
    check("first row anchored at t=18", t0 == 18.0 and len(inputs) == 4)
    check("first row target", target == series[24])

    # Network evaluation.
    net = ml.Mlp(4, "8T,2T*,1L*", seed=1)
    check("param count", net.param_count == 4 * 11 + 11 + 11 + 1)
    y = net.forward([0.5, 0.6, 0.7, 0.8])
    check("forward finite", math.isfinite(y))
    clone = ml.Mlp.from_text(net.to_text())
    check("text round trip", clone.params() == net.params())

    # Local search improves the fit.
    before = net.rmse(ds, "test")
    report = ml.train(net, ds, algo="lm", epochs=30)
    check("training ran", report.epochs_run == 30 and report.flops > 0)
    check(
        "training improved test RMSE",
        report.final_test_rmse < before and report.final_test_rmse < 0.05,
    )
    check("history recorded", len(report.history) == 30)

    # A tiny evolution run: monotone best fitness per stream.
    result = ml.run_evolution(
        ds,
        algorithms=["lm"],
        population=4,
        generations=2,
        epochs_per_eval=5,
        seed=7,
        serial=True,
    )
    stream = result["LM"]
    trace = stream["trace"]
    check("trace includes generation 0", len(trace) == 3)
    best_values = [b for (_, b, _) in trace]
    check("elitism keeps best monotone", all(
        b <= a for a, b in zip(best_values, best_values[1:])
    ))
    check("best network returned", stream["net"].rmse(ds, "test") == stream["best_rmse"])

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
