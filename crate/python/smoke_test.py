"""Smoke test of the ldpcl_py extension.

Build and install it first, e.g. `maturin build -m crates/python/Cargo.toml`
followed by `pip install` of the wheel, or `maturin develop` in a virtualenv.
"""

import math

import ldpcl_py as ldpcl


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    e = ldpcl.Ensemble.regular(2, 6, 1, 6)
    t = ldpcl.thresholds(e)
    close(t["eps_local"], 0.2, 1e-3)
    close(t["eps_global"], 0.4294, 5e-4)
    close(ldpcl.threshold_bisection(e, 1e-6), t["eps_global"], 2e-4)

    ex4 = ldpcl.Ensemble.from_json(ldpcl.IRREGULAR_EXAMPLE_JSON)
    close(ex4.design_rate, 0.5571, 1e-4)
    close(ldpcl.thresholds(ex4)["eps_global"], 0.35, 1e-3)
    tangent = [p for p in ldpcl.fixed_points(ex4, 0.35) if p["kind"] != "trivial"]
    assert len(tangent) == 1

    points, status = ldpcl.de_trace(e, 0.4)
    assert status == "converged" and points[0] == (1.0, 1.0)
    _, status = ldpcl.de_trace(e, 0.45)
    assert status == "stuck"

    ens, report = ldpcl.construct(0.05, 0.2, d_l=5, d_j=100, capacity=True)
    close(report["rate"], 0.7885, 1e-3)
    close(ens.p0, 0.25, 1e-9)
    assert ldpcl.schedule(ens, 0.04, "ideal")["n_ji"] == 0
    assert ldpcl.schedule(ens, 0.15, "ideal")["n_ji"] > 0
    assert ldpcl.schedule(ens, 0.15, "eta:0.0001")["valid"]

    bound = ldpcl.ml_bound(2, 8, (2, 4, 2, 4), [0.3])
    close(bound[0], 0.132087013564, 1e-9)
    single = ldpcl.ldpc_bound(2, 4, 16, [0.3])
    assert 0.0 < single[0] <= 1.0 and not math.isnan(single[0])

    rows = ldpcl.simulate((2, 6, 1, 6), [0.3, 0.46], trials=20, seed=1, m_blocks=4, n_sub=300)
    assert rows[0]["global_fail"] <= rows[1]["global_fail"]
    assert rows[1]["global_fail"] == 1.0

    try:
        ldpcl.Ensemble.regular(1, 6, 1, 6)
    except ValueError:
        pass
    else:
        raise AssertionError("local degree 1 should be rejected")

    print("ldpcl_py smoke test passed")


if __name__ == "__main__":
    main()
