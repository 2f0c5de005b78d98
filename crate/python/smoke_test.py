"""Quick check that the extension module imports and agrees with known values.

Build and install first, e.g.

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/evppi-*.whl
"""

import math

import evppi


def close(a, b, tol):
    assert abs(a - b) < tol, f"{a} != {b}"


def main():
    close(evppi.normal_cdf(0.0), 0.5, 1e-15)
    close(evppi.normal_pdf(0.0), 1.0 / math.sqrt(2.0 * math.pi), 1e-15)
    assert evppi.optimal_ratio(2, 1.0) == 2.0 ** -1.5
    assert evppi.nested_allocation(4096) == (16, 256)

    law = evppi.LevelDistribution(2)
    close(law.pmf(1), 1.0 - 2.0 ** -1.5, 1e-15)
    levels = law.draws_for_budget(1 << 12, seed=3)
    assert sum(2 ** l for l in levels) <= 1 << 12

    full = evppi.ToyModel.standard(5)
    close(full.evppi(), 0.8920620580763856, 1e-12)
    assert full.max_payoff([1.0, 1.0, 1.0, 1.0, -4.0]) == (0.0, "d1")
    assert full.max_payoff([1.0, 1.0, 1.0, 1.0, -5.0]) == (0.0, "d2")

    toy = evppi.ToyModel.standard(5, subset=[1, 2])
    close(toy.evppi(), 0.5641895835477563, 1e-12)
    r = toy.estimate("evppi-coupled", 1 << 14, seed=1)
    assert r.cost_used <= 1 << 14 and r.n_draws > 0
    print(f"evppi-coupled at C=2^14: {r.estimate:.4f} (se {r.standard_error:.4f}), truth {toy.evppi():.4f}")

    csv, slope = toy.study("evppi-nested", budgets=[256, 1024, 4096], reps=20, seed=2)
    again, _ = toy.study("evppi-nested", budgets=[256, 1024, 4096], reps=20, seed=2)
    assert csv == again
    assert csv.splitlines()[-1].startswith("#SLOPE,")
    print(f"evppi-nested slope over 2^8..2^12: {slope:.3f}")

    s = evppi.summarize([1.0, 2.0, 3.0, 4.0], 2.5)
    assert s["median"] == 2.5 and s["count"] == 4

    try:
        evppi.ToyModel.standard(5, subset=[0])
    except ValueError:
        pass
    else:
        raise AssertionError("0 is not a valid 1-based index")
    try:
        full.estimate("evpi-single", 2, seed=1)
    except evppi.BudgetExhausted:
        pass

    print("ok")


if __name__ == "__main__":
    main()
