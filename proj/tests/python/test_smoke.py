import os
import subprocess

import numpy as np
import pytest

import pilot

CLI = os.environ.get("PILOT_CLI")


def make_data(seed, n=300):
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(0, 1, n)
    x2 = np.round(rng.uniform(-2, 2, n), 1)
    c = rng.choice(["red", "green", "blue", "teal"], n)
    bump = np.where(c == "red", 1.0, np.where(c == "blue", -0.5, 0.0))
    y = 2 * x1 + np.where(x2 > 0.3, 1.5, -x2) + bump + rng.normal(0, 0.2, n)
    return {"x1": x1, "x2": x2, "c": c}, y


def write_csv(path, cols, y):
    names = list(cols)
    with open(path, "w") as f:
        f.write(",".join(names + ["y"]) + "\n")
        for i in range(len(y)):
            cells = [repr(float(cols[k][i])) if cols[k].dtype.kind == "f" else str(cols[k][i]) for k in names]
            f.write(",".join(cells + [repr(float(y[i]))]) + "\n")


def test_exports():
    assert set(pilot.__all__) == {"fit", "predict", "importance", "save", "load", "__version__"}
    assert isinstance(pilot.__version__, str)


def test_exact_line_and_fitted_values():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 1, (200, 3))
    y = X @ np.array([1.0, -2.0, 0.5])
    m = pilot.fit(X, y)
    pred = pilot.predict(m, X)
    assert pred.shape == (200,)
    # chains stop at the rss floor, not at zero
    assert np.max(np.abs(pred - y)) < 1e-6
    assert pilot.predict(m, X[:1]).shape == (1,)
    imp = pilot.importance(m)
    assert imp.shape == (3,)
    assert abs(imp.sum() - 1.0) < 1e-12


def test_errors():
    X = np.zeros((5, 2))
    with pytest.raises(ValueError):
        pilot.fit(X[:0], [])
    with pytest.raises(ValueError, match="bogus"):
        pilot.fit(np.random.rand(50, 2), np.random.rand(50), bogus=3)
    with pytest.raises(ValueError, match="max_depth"):
        pilot.fit(np.random.rand(50, 2), np.random.rand(50), max_depth=0)
    bad = np.random.rand(50, 2)
    bad[3, 1] = np.nan
    with pytest.raises(ValueError, match="x2"):
        pilot.fit(bad, np.random.rand(50))
    with pytest.raises(ValueError):
        pilot.fit(np.random.rand(50, 2), np.random.rand(49))
    m = pilot.fit(np.random.rand(50, 2), np.random.rand(50))
    with pytest.raises(ValueError):
        pilot.predict(m, np.random.rand(4, 3))


def test_save_load_roundtrip(tmp_path):
    cols, y = make_data(3)
    m = pilot.fit(cols, y, max_depth=4)
    pilot.save(m, tmp_path / "m.json")
    back = pilot.load(tmp_path / "m.json")
    assert np.array_equal(pilot.predict(back, cols), pilot.predict(m, cols))
    assert back.feature_names == ["x1", "x2", "c"]
    assert back.categorical == [False, False, True]


@pytest.mark.skipif(not CLI, reason="PILOT_CLI not set")
@pytest.mark.parametrize("seed", range(5))
def test_cli_parity(tmp_path, seed):
    cols, y = make_data(seed)
    csv = tmp_path / "d.csv"
    write_csv(csv, cols, y)
    subprocess.run([CLI, "train", "--data", str(csv), "--target", "y", "--out", str(tmp_path / "cli.json")],
                   check=True, capture_output=True)
    m = pilot.fit(cols, y)
    pilot.save(m, tmp_path / "py.json")
    assert (tmp_path / "py.json").read_bytes() == (tmp_path / "cli.json").read_bytes()

    subprocess.run([CLI, "predict", "--model", str(tmp_path / "cli.json"), "--data", str(csv), "--out",
                    str(tmp_path / "p.csv")], check=True, capture_output=True)
    cli_pred = np.loadtxt(tmp_path / "p.csv", skiprows=1)
    assert np.max(np.abs(cli_pred - pilot.predict(m, cols))) <= 1e-12
