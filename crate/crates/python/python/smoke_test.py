"""Smoke test for the compiled ``eiv_sparse`` extension module.

Run with ``python crates/python/python/smoke_test.py`` or through pytest.
"""

import math

import eiv_sparse


def close(a, b, tol=1e-3):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def test_worked_example():
    p = eiv_sparse.Problem.worked_example()
    assert (p.m, p.n) == (2, 3)
    assert eiv_sparse.estimate_signs(p) == [-1, 1, 1]
    r = eiv_sparse.l2l1_recover(p)
    assert r.solved
    assert r.support == [1]
    assert close(r.estimate, [0.0, 0.6445, 0.0])
    bp = eiv_sparse.basis_pursuit(p.a_bar, p.y_bar)
    assert close(bp, [-1.3378, 0.0, 1.3119])


def test_baselines_and_analysis():
    a = [[1.0, 0.0, 0.5], [0.0, 1.0, 0.5]]
    y = [1.0, 0.0]
    assert max(abs(v) for v in eiv_sparse.bpdn_inf(a, y, 10.0)) < 1e-6
    x = eiv_sparse.lasso(a, y, 0.1)
    assert len(x) == 3 and x[0] > 0.5
    assert math.isclose(eiv_sparse.coherence(a), 0.5 / math.sqrt(0.5), rel_tol=1e-12)
    assert eiv_sparse.lemma1_check(a, [0, 2]) <= 1e-12
    q = eiv_sparse.tight_frame(a)
    assert len(q) == 2 and len(q[0]) == 3


def test_errors_map_to_python_exceptions():
    try:
        eiv_sparse.Problem([[1.0, 2.0], [3.0]], [1.0, 2.0], 0.0, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("ragged rows must raise ValueError")
    p = eiv_sparse.Problem([[1.0, 0.0], [1.0, 0.0]], [1.0, 2.0], 0.0, 0.0)
    try:
        eiv_sparse.l2l1_recover(p, tau=0.1)
    except RuntimeError:
        pass
    else:
        raise AssertionError("rank-deficient data must raise RuntimeError")


def test_bench():
    csv = eiv_sparse.run_bench("n = 10\nk = 2\nm_grid = 8\ndelta_grid = 0.001\nruns = 2\ntiming = false\n", seed=3)
    lines = csv.strip().splitlines()
    assert lines[0].startswith("method,m,delta")
    assert len(lines) == 4


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"{name}: ok")
