"""Smoke test of the python extension: generate, solve, score, check."""

import math
import sys
import tempfile
import os

import _acuc as acuc


def main():
    acuc.set_workers(2)

    case = acuc.generate_case(n_bus=6, periods=2, seed=4)
    assert case.n_bus == 6
    assert case.periods == 2
    assert case.n_device >= 2
    assert case.n_contingency >= 1

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "case.json")
        acuc.save_case(case, path)
        reloaded = acuc.load_case(path)
        assert reloaded.n_bus == case.n_bus

        out = acuc.solve(reloaded, budget=2.0, seed=1, workers=2)
        report = out["report"]
        assert report["feasible"], report["violations"]
        assert report["z_ms"] <= out["z_ed"] * (1 + 1e-6) + 1e-9

        sol_path = os.path.join(tmp, "solution.json")
        acuc.save_solution(reloaded, out["solution"], sol_path)
        sol = acuc.load_solution(reloaded, sol_path)
        rescored = acuc.score(reloaded, sol, out["z_ed"])
        assert math.isclose(rescored["z_ms"], report["z_ms"], rel_tol=1e-12)
        assert acuc.check(reloaded, sol) == []

        v = sol.value("v", 0, 0)
        assert 0.9 <= v <= 1.1

    # schedule arithmetic sanity: midpoint scale is 0.625
    alpha = acuc.schedule_step_size(30.0, 0.0, 60.0, 1e-2, 1e-6)
    want = 1e-2 * 10.0 ** (0.625 * math.log10(1e-6 / 1e-2))
    assert math.isclose(alpha, want, rel_tol=1e-9)

    print("python smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
