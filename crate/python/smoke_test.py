"""Quick end-to-end check of the Python bindings.

Build first:  pip install --no-build-isolation ./crates/python
"""

import math
import pathlib

import crra_equilibrium as ce

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    bench = ce.Economy.from_file(str(CONFIGS / "single_agent.json"))
    assert close(bench.min_denominator, 0.01, 1e-14)
    assert close(bench.stock_price(), 100.0, 1e-12)
    assert close(bench.wealths()[0], 100.0, 1e-12)
    assert close(bench.riskless_rate(), -0.01, 1e-14)
    assert close(bench.portfolios()[0], 1.0, 1e-12)

    three = ce.Economy.from_file(str(CONFIGS / "three_agents.json"))
    snap = three.snapshot(t=1.0, x=0.3)
    assert close(sum(snap["consumptions"]), snap["dividend"], 1e-12)
    assert close(sum(snap["wealths"]), snap["stock_price"], 1e-10)
    assert close(sum(snap["portfolios"]), 1.0, 1e-10)

    pair = ce.Economy(3, 0.1, 0.0, [(0.3, 0.3, 0.0), (0.3, -0.3, 0.0)])
    _, vol = pair.stock_dynamics(1.0, 0.5)
    assert abs(vol - 0.1) > 1e-6
    assert close(pair.market_price_of_risk(), 0.3, 1e-14)

    try:
        ce.Economy(2, 0.1, 0.0, [(0.001, 0.0, 0.0)])
    except ce.ModelError as e:
        assert "denominator" in str(e).lower() or "nonpositive" in str(e).lower(), e
    else:
        raise AssertionError("impatient economy should be rejected")

    cal = three.calibrate([0.2, 0.5, 0.3])
    assert all(close(a, b, 1e-9) for a, b in zip(cal["achieved_shares"], [0.2, 0.5, 0.3]))

    rep = bench.martingale_check(horizon=5.0, n_steps=200, n_paths=20_000, seed=1)
    assert abs(rep["z_score"]) <= 3.0, rep

    assert ce.composition_count(3, 4) == 15
    assert ce.compositions(2, 2) == [[2, 0], [1, 1], [0, 2]]
    assert close(math.exp(ce.log_multinomial([2, 1, 1])), 12.0, 1e-12)

    paths = bench.simulate_x(1.0, 8, n_paths=2, seed=3)
    assert len(paths) == 2 and len(paths[0]) == 9 and paths[0][0] == 0.0

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
