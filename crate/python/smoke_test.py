#!/usr/bin/env python3
"""Smoke test for the visor_py extension module.

Builds are expected via `cargo build --release -p visor-py`; this script
locates the produced shared library, imports it, and exercises the main
types and operations end to end. Exit code 0 means every check passed.
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path


def locate_module() -> Path:
    root = Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / "release" / "libvisor_py.so",
        root / "target" / "debug" / "libvisor_py.so",
        root / "target" / "release" / "libvisor_py.dylib",
        root / "target" / "debug" / "libvisor_py.dylib",
    ]
    for cand in candidates:
        if cand.exists():
            return cand
    sys.exit("visor_py library not found; run `cargo build --release -p visor-py` first")


def import_module():
    lib = locate_module()
    stage = Path(tempfile.mkdtemp(prefix="visor_py_"))
    shutil.copy(lib, stage / "visor_py.so")
    sys.path.insert(0, str(stage))
    import visor_py

    return visor_py


def approx(a, b, tol=1e-9):
    return abs(a - b) <= tol * (1.0 + abs(b))


def main() -> None:
    vp = import_module()
    print(f"loaded visor_py {vp.__version__}")

    # norm geometry
    space = vp.NormSpace([[4.0, 0.0], [0.0, 1.0]])
    assert approx(space.norm([1.0, 1.0]), math.sqrt(5.0))
    assert approx(space.dual_norm([1.0, 1.0]), math.sqrt(1.25))
    step = space.gradient_step([0.0, 0.0], [2.0, -4.0], 0.5)
    assert approx(step[0], -0.25) and approx(step[1], 2.0)

    # ground-truth instance and its optimal covariance
    inst = vp.Instance.zeta_family(2.0)
    assert [round(v, 12) for v in inst.x_star()] == [1.0, 1.0]
    lam, trace = vp.optimal_covariance(inst.hessian(), inst.noise_cov())
    assert approx(trace, 2.0)
    assert approx(lam[0][0], 1.0) and approx(lam[1][1], 1.0)
    assert approx(inst.tr_lambda(), 2.0)
    assert inst.constants()["mu"] == 1.0
    assert vp.lower_bound_line(inst.hessian(), inst.noise_cov(), 100) > 0.0

    # deterministic sampling through explicit streams
    g1 = inst.sample_gradient([0.0, 0.0], vp.Stream(7))
    g2 = inst.sample_gradient([0.0, 0.0], vp.Stream(7))
    assert g1 == g2

    # a full variance-reduced run stays within budget and beats the baselines
    n = 800
    schedule = vp.Schedule.quadratic_asgd(n, 1.0, 4.0, 4.0, 2.0, 2.0, "experiment")
    assert schedule.total_cost() <= schedule.budget()
    assert vp.Schedule.from_json(schedule.to_json()).total_cost() == schedule.total_cost()
    estimate, used = vp.visor_run(inst, schedule, [0.0, 0.0], vp.Stream(11))
    assert used <= n
    err = vp.rescaled_error(estimate, inst.x_star(), n)
    assert err < 100.0, f"rescaled error {err} unexpectedly large"

    # averaged stochastic approximation and closed-form SAA
    sa = vp.vanilla_sa(inst, 0.05, 0.0, 2000, "full", [0.0, 0.0], vp.Stream(3))
    assert not sa["diverged"] and sa["samples_used"] == 2000
    saa = vp.saa_estimate(vp.Instance.saa_failure_1d(), 50, vp.Stream(5))
    assert saa is None or abs(saa[0] - 1.0) < 2.0

    # least squares and logistic construction
    ls = vp.Instance.least_squares(2, [[1.0, 0.0], [0.0, 3.0]], 0.5, [1.0, -1.0], 4.0)
    assert approx(ls.tr_lambda(), 0.25 * 2)
    glm = vp.Instance.logistic_glm(2, 0.1, [0.0, 0.0])
    assert max(abs(v) for v in glm.x_star()) < 1e-10

    # harness sweep through the JSON config surface
    cfg = {
        "instance": {"name": "zeta-family"},
        "methods": [{"method": "visor-asgd"}],
        "zeta_grid": [1.0],
        "budget": {"rule": "per-zeta", "factor": 200.0},
        "trials": 16,
        "base_seed": 42,
        "mode": "experiment",
    }
    csv_text = vp.run_sweep_json(json.dumps(cfg))
    header, row = csv_text.strip().split("\n")
    assert header.startswith("instance,method,zeta_sq,n")
    assert row.split(",")[8] == "false"

    # verification suite
    checks = vp.verify_families("zeta-family", 1)
    assert checks and all(c["pass"] for c in checks)

    print("smoke test passed:", len(checks), "verification checks, sweep row:", row)


if __name__ == "__main__":
    main()
