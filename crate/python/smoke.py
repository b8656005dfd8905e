"""Smoke test for the pphpc extension module.

Build and install the module first (see the README), then run
`python3 python/smoke.py` from the repository root.
"""

import math

import pphpc


def main():
    params = pphpc.SimParams.from_values(
        [20, 20, 40, 20, 30, 4, 20, 1, 1, 2, 2, 4, 5, 10]
    )
    assert params.iterations == 30

    out = pphpc.run_simulation(params, seed=7)
    assert len(out) == 31
    assert out.to_csv() == pphpc.run_simulation(params, seed=7).to_csv()
    assert out.column("total_prey")[0] == 40.0
    again = pphpc.SimOutput.from_csv(out.to_csv())
    assert again.to_csv() == out.to_csv()

    z = pphpc.standardize_series([1.0, 2.0, 3.0])
    assert all(math.isclose(a, b) for a, b in zip(z, [-1.5**0.5, 0.0, 1.5**0.5]))

    assert pphpc.energy_statistic([[0.0]], [[1.0]]) == 1.0
    stat, p = pphpc.energy_test([[0.0]] * 10, [[5.0]] * 10, n_permutations=199, seed=1)
    assert stat > 0 and 0 < p <= 1

    assert pphpc.bh_adjust([0.01, 0.02, 0.03, 0.04]) == [0.04] * 4

    scores, ratios = pphpc.pca_project([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], 0.8)
    assert len(ratios) == 1 and math.isclose(ratios[0], 1.0)
    assert len(scores) == 3

    a = [[pphpc.run_simulation(params, s) for s in range(6)]]
    b = [[pphpc.run_simulation(params, s) for s in range(100, 106)]]
    score, rows = pphpc.compare_models(a, b, n_permutations=99)
    assert score in (5, 6) and len(rows) == 1

    mean, s_rel, ratio = pphpc.summarize_times([1.0, 2.0, 3.0], reference_mean=2.0)
    assert mean == 2.0 and math.isclose(s_rel, 50.0) and ratio == 1.0
    assert math.isclose(pphpc.success_rate([6, 6, 5]), 200 / 3)

    try:
        pphpc.SimParams.from_values([0] * 14)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid parameters accepted")

    print("pphpc smoke test passed")


if __name__ == "__main__":
    main()
