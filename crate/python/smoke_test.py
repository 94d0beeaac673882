"""Quick end-to-end check of the predpack extension module."""

import math

import predpack


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    p = predpack.ModelParams()
    w, u = predpack.constant_state(p)
    assert close(w, 1 / 6) and close(u, 2 / 3), (w, u)
    assert all(abs(r) < 1e-12 for r in predpack.reaction_terms(p, [w, w], u))

    spec = sorted(predpack.spectrum(p))
    s23 = math.sqrt(23) / 12
    assert close(spec[0][0], -5 / 12) and close(abs(spec[0][1]), s23)
    assert close(spec[2][0], 1 / 6) and spec[2][2] == 1
    numeric = predpack.spectrum_numeric(p)
    assert len(numeric) == 3
    assert predpack.classify_stability(p) == "StronglyUnstable"
    assert predpack.classify_stability(p.replace(N=1)) == "StableN1"

    g = predpack.Grid.interval(1.0, 30)
    assert len(g) == 30 and close(g.volume, 1.0)

    single = p.replace(N=1)
    init = predpack.initial_state(single, g, "noise", 1e-3, seed=7)
    rep = predpack.evolve(single, g, init)
    assert rep["converged"], rep["residual"]
    label, flat = predpack.classify(g, rep["state"])
    assert label == "Constant", (label, flat)

    steady = predpack.newton(p, g, predpack.initial_state(p, g, "eigen"))
    assert steady["residual"] < 1e-9
    assert predpack.ordering_violations(g, steady["state"]) == []

    try:
        predpack.newton(p, g, predpack.initial_state(p, g, "noise", 0.1), max_iters=0)
    except predpack.ConvergenceError:
        pass
    else:
        raise AssertionError("expected ConvergenceError")

    try:
        predpack.ModelParams(beta=-1)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    r = predpack.run_sweep([0.0, 1.0], [1, 2], predpack.Grid.interval(1.0, 16), horizon=50.0, seed=3)
    assert len(r["cells"]) == 4
    assert {c["label"] for c in r["cells"]} <= {"Constant", "NonConstant", "NoConvergence"}

    assert close(predpack.jung_radius(2, 1.0), 1 / math.sqrt(3))
    m, witness = predpack.max_overlap([[0.0, 0.0], [0.1, 0.0], [1.0, 1.0]], 0.2)
    assert m == 2 and len(witness) == 2
    trials = predpack.cover_trials(2, 100, 0.1, 3, seed=1)
    assert all(ok for (_, _, _, ok) in trials)

    print("predpack smoke test: ok")


if __name__ == "__main__":
    main()
