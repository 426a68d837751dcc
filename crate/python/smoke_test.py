"""Smoke test for the ordsel_py extension.

Build and run from the repository root:

    cargo build -p ordsel-python --release --features extension-module
    python3 python/smoke_test.py

The script copies target/release/libordsel_py.so next to itself as
ordsel_py.so unless the module is already importable.
"""

import math
import pathlib
import shutil
import sys

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent


def load():
    try:
        import ordsel_py  # noqa: F401
    except ImportError:
        for name in ("libordsel_py.so", "libordsel_py.dylib"):
            built = ROOT / "target" / "release" / name
            if built.exists():
                shutil.copy(built, HERE / "ordsel_py.so")
                break
        else:
            sys.exit("build the extension first: cargo build -p ordsel-python --release --features extension-module")
        sys.path.insert(0, str(HERE))
    import ordsel_py

    return ordsel_py


def main():
    op = load()

    assert abs(op.chi2_cdf(1, 2.0) - (2 * op.gaussian_cdf(math.sqrt(2.0)) - 1)) < 1e-12

    y = [3.0, 2.5, 0.1, 0.05, 0.02]
    eye = [[1.0 if i == j else 0.0 for j in range(5)] for i in range(5)]
    model = op.OrthoModel(y, eye)
    assert (model.n, model.q) == (5, 5)
    sel = model.select(2.0, 1.0)
    assert sel.dim == 2, sel
    rss = model.rss_profile()
    assert len(rss) == 6 and all(a >= b for a, b in zip(rss, rss[1:]))

    try:
        op.OrthoModel([1.0, 2.0], [[1.0], [2.0, 3.0]])
    except ValueError:
        pass
    else:
        raise AssertionError("ragged design accepted")

    toy = op.Scenario.toy(2024)
    assert toy.d_star == 10 and abs(toy.beta_star[9] - 2.0) < 1e-12
    curves = toy.empirical_curves([2.0, 6.0], 200)
    assert curves["fdr"][1] <= curves["fdr"][0]

    m = toy.model(0)
    est = m.plugin_estimate()
    assert est["sigma2_hat"] > 0 and est["d_hat"] >= 1
    cal = m.calibrate(mc_samples=1000, seed=1)
    assert 2.0 <= cal["k_star"] <= 10.0 and cal["bound_at_k"] < 0.05
    try:
        m.calibrate(alpha=1e-9, mc_samples=500)
    except op.CalibrationFailed:
        pass
    else:
        raise AssertionError("tiny alpha should fail")

    bounds = op.bound_curve(toy.beta_star[:10], 1.0, 50, [2.0, 4.0], mc_samples=1000)
    assert all(f <= lo <= hi for f, lo, hi in zip(bounds["floor"], bounds["lower"], bounds["upper"]))

    cv = m.cv_select(10, seed=3)
    assert cv.k is None and cv.dim >= 1

    print(f"ok: K* = {cal['k_star']:.1f}, sigma2_hat = {est['sigma2_hat']:.4f}, fdr(2) = {curves['fdr'][0]:.4f}")


if __name__ == "__main__":
    main()
