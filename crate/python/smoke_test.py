#!/usr/bin/env python3
"""Smoke test for the ppmlab Python extension.

Build the extension first:

    cargo build --release -p ppmlab-py

The script locates the cdylib in target/{release,debug} and loads it in
place, so no install step is needed.
"""

import importlib.machinery
import importlib.util
import math
import sys
from pathlib import Path


def load_ppmlab():
    root = Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libppmlab.so", "ppmlab.so", "libppmlab.dylib", "ppmlab.pyd")
    ]
    for path in candidates:
        if path.exists():
            loader = importlib.machinery.ExtensionFileLoader("ppmlab", str(path))
            spec = importlib.util.spec_from_loader("ppmlab", loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit(
        "ppmlab extension not found; run `cargo build --release -p ppmlab-py` first"
    )


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    ppm = load_ppmlab()

    # distribution toolkit
    d = ppm.Distribution.exponential(1.0)
    approx(d.quantile(1.0 - math.exp(-1.0)), 1.0)
    approx(d.hazard(3.0), 1.0)
    ok, _ = d.hazard_monotone_check(64)
    assert ok
    try:
        ppm.Distribution.weibull(0.5, 1.0)
        raise AssertionError("weibull shape < 1 must be rejected")
    except ValueError:
        pass

    # harmonic numbers and order statistics
    approx(ppm.harmonic(5), 137.0 / 60.0, 1e-12)
    approx(ppm.max_expectation(d, 5), ppm.harmonic(5), 1e-6)
    u = ppm.Distribution.uniform(0.0, 1.0)
    approx(ppm.order_stat_mean(u, 4, 2), 0.6, 1e-7)

    # lemma checks
    assert ppm.check_quantiles1(d, 10, 1, 0.5)
    assert ppm.check_quantiles2(u, 400, 0.05)
    assert ppm.check_babaioff_ratio(u, 2, 8)

    # pricing rules
    ladder = ppm.single_item_ladder(d, 2)
    approx(ladder[0], math.log(2.0), 1e-12)
    approx(ladder[1], 0.0)
    prices, welfare = ppm.mdp_optimal_prices(d, 10)
    approx(prices[-2], 1.0, 1e-12)
    approx(prices[-3], 1.0 + math.exp(-1.0), 1e-12)
    assert welfare > prices[0]
    approx(ppm.virtual_value(d, 2.5), 1.5, 1e-12)

    # closed forms and bounds
    approx(ppm.exp_static_welfare(1, 0.0), 1.0, 1e-12)
    report = ppm.mdp_bound_check(10_000)
    assert report["pass"]
    best = ppm.exp_static_best(1000)
    assert 0.0 < best["welfare"] < ppm.harmonic(1000)

    # oracle
    match = ppm.max_weight_matching([[3.0, 1.0], [2.0, 4.0]])
    approx(match["welfare"], 7.0)
    assert match["assignment"] == [0, 1]
    vcg = ppm.vcg_separable([1.0, 0.0], [5.0, 3.0])
    approx(vcg["payments"][0], 3.0)

    # simulation engine end to end, deterministic given the seed
    s1 = ppm.simulate("independent: [exp(1)]", "ladder", 64, trials=2000, seed=9)
    s2 = ppm.simulate("independent: [exp(1)]", "ladder", 64, trials=2000, seed=9)
    assert s1 == s2
    assert 0.5 < s1["ratio"] < 1.0
    assert abs(s1["sw_opt_mean"] - ppm.harmonic(64)) < 4 * s1["sw_opt_se"]

    rows = ppm.sweep(
        "separable: alphas=[1,0.5], type=exp(1)", "dyn-sep", [4, 8], trials=1500, seed=5
    )
    assert [r["n"] for r in rows] == [4, 8]
    assert all(f == 1.0 for r in rows for f in r["item_sale_freq"])

    fit = ppm.ratio_trend_fit(
        [64, 256, 1024], [1 - 2 / math.log(64), 1 - 2 / math.log(256), 1 - 2 / math.log(1024)]
    )
    approx(fit["c"], 2.0, 1e-9)

    # a fast verification claim through the bindings
    results = ppm.run_verify(["matching-oracle"])
    assert results[0]["pass"], results[0]["detail"]

    print("ppmlab smoke test: all checks passed")


if __name__ == "__main__":
    main()
