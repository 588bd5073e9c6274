#!/usr/bin/env python3
"""Smoke test for the tradecrew_py extension module.

Build the module first, then run this script from the repository root:

    cargo build -p tradecrew-py --release
    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        REPO / "target" / "release" / "libtradecrew_py.so",
        REPO / "target" / "debug" / "libtradecrew_py.so",
        REPO / "target" / "release" / "libtradecrew_py.dylib",
        REPO / "target" / "debug" / "libtradecrew_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p tradecrew-py --release")
    staging = Path(tempfile.mkdtemp(prefix="tradecrew_py_"))
    suffix = ".so" if built.suffix == ".so" else ".so"
    shutil.copy2(built, staging / f"tradecrew_py{suffix}")
    sys.path.insert(0, str(staging))
    import tradecrew_py

    return tradecrew_py


def check(name, condition):
    status = "PASS" if condition else "FAIL"
    print(f"{status} {name}")
    if not condition:
        sys.exit(1)


def main():
    tc = load_module()

    out = tc.ema([1.0, 2.0, 3.0], 3)
    check("ema hand-unrolled", out == [1.0, 1.5, 2.25])

    dates = [f"2023-{m:02d}-{d:02d}" for m in range(1, 13) for d in range(1, 29)]
    closes = [100.0 + 0.1 * i + 3.0 * math.sin(i / 7.0) for i in range(len(dates))]
    features = tc.technical_features(dates, closes, dates[-1])
    check(
        "technical features present",
        features["rsi"] is not None and 0.0 <= features["rsi"] <= 100.0,
    )
    check(
        "histogram identity",
        abs(features["hist"] - (features["macd"] - features["signal"])) <= 1e-12,
    )

    book = tc.construct_portfolio({"A": 90.0, "B": 50.0, "C": 10.0, "D": 40.0}, 2)
    check("portfolio extremes", book == {"A": 1.0, "C": -1.0})

    check("sharpe zero-mean", tc.sharpe([0.01, -0.01]) == 0.0)
    ann = tc.annualize([0.01] * 12)
    check("annualized compounding", abs(ann[0] - (1.01**12 - 1)) < 1e-9 and ann[2] is None)

    erc = tc.erc_weights([[1.0, 0.0], [0.0, 4.0]])
    check(
        "erc uncorrelated analytic",
        abs(erc["weights"][0] - 2 / 3) < 1e-6 and abs(erc["weights"][1] - 1 / 3) < 1e-6,
    )

    u, p, stars = tc.mann_whitney_u([1.0, 2.0, 3.0], [10.0, 20.0, 30.0])
    check("mann-whitney exact", u == 0.0 and abs(p - 0.1) < 1e-12 and stars == "ns")

    side_i, side_j = tc.log_odds_top({"up": 9, "flat": 5}, {"down": 9, "flat": 5}, 0.01, 1)
    check("log-odds sides", side_i[0][0] == "up" and side_j[0][0] == "down")

    med = tc.median_scores([{"A": 40.0}, {"A": 60.0}])
    check("median even-count rule", med == {"A": 50.0})

    vecs = tc.offline_embed(["alpha", "alpha", "beta"], 7, 32)
    check(
        "embeddings deterministic and unit",
        vecs[0] == vecs[1]
        and abs(sum(x * x for x in vecs[0]) - 1.0) < 1e-9
        and tc.cosine(vecs[0], vecs[1]) == 1.0,
    )

    fixture = REPO / "fixtures" / "demo"
    if fixture.exists():
        repo = tc.load_repository(str(fixture))
        check("fixture universe", len(repo.tickers()) == 6)
        schedule = repo.rebalance_schedule("2023-09", "2023-11")
        check("schedule length", len(schedule) == 3)
        a = repo.scripted_backtest("2023-10", "2024-03", "fine", [], 0, 2, 10.0)
        b = repo.scripted_backtest("2023-10", "2024-03", "fine", [], 0, 2, 10.0)
        check("scripted backtest months", len(a["months"]) == 6)
        check("scripted backtest deterministic", a == b)
        masked = repo.scripted_backtest("2023-10", "2024-03", "fine", ["news"], 0, 2, 10.0)
        check("masked run differs", masked["gross_returns"] != a["gross_returns"])
    else:
        print("SKIP fixture checks (fixtures/demo not found)")

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
