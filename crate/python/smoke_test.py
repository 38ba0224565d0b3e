"""Smoke test for the compiled extension.

Run after `cargo build -p align-rudder-py`. The shared library is copied
under its import name into a temporary directory, so no install step is
needed. Set ALIGN_RUDDER_PY_LIB to point at a different build.
"""

import importlib
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def locate_library() -> Path:
    if "ALIGN_RUDDER_PY_LIB" in os.environ:
        return Path(os.environ["ALIGN_RUDDER_PY_LIB"])
    names = ["libalign_rudder_py.so", "libalign_rudder_py.dylib", "align_rudder_py.dll"]
    for profile in ("debug", "release"):
        for name in names:
            path = ROOT / "target" / profile / name
            if path.exists():
                return path
    sys.exit("extension not built; run `cargo build -p align-rudder-py`")


def load():
    tmp = tempfile.mkdtemp()
    suffix = ".pyd" if sys.platform == "win32" else ".so"
    shutil.copy(locate_library(), Path(tmp) / f"align_rudder_py{suffix}")
    sys.path.insert(0, tmp)
    return importlib.import_module("align_rudder_py")


def main() -> None:
    ar = load()

    u, p, p_less, exact = ar.mann_whitney([1, 2, 3], [4, 5, 6])
    assert (u, exact) == (0.0, True)
    assert math.isclose(p_less, 0.05) and math.isclose(p, 0.1)

    fasta = ar.align(["ABCD", "ABD", "ACD"], [1.0, 1.0, 1.0])
    rows = [line for line in fasta.splitlines() if not line.startswith(">")]
    assert len(rows) == 3 and len({len(r) for r in rows}) == 1, fasta

    model = ar.Model.fit(5, seed=2)
    assert model.n_events >= 2
    assert math.isclose(model.threshold, 0.8)
    for rewards in model.demo_rewards:
        assert math.isclose(sum(rewards), 1.0, abs_tol=1e-9)
    rewards, correction = model.redistribute(model.sequences[0], 1.0)
    assert math.isclose(sum(rewards) + correction, 1.0, abs_tol=1e-12)
    assert model.pssm_csv and model.scoring_csv and model.msa_fasta.startswith(">")

    rows = ar.run_experiment(
        overrides=["demo_counts=[2]", "seeds=2", "budget=100", 'methods=["align-rudder", "bc-q"]']
    )
    assert len(rows) == 4 and all(r["error"] is None for r in rows)
    assert {r["method"] for r in rows} == {"align-rudder", "bc-q"}

    try:
        ar.run_experiment(overrides=["slip=3"])
    except ar.AlignRudderError as e:
        assert e.args[0] == "config", e.args
    else:
        raise AssertionError("bad slip accepted")

    try:
        model.redistribute("Z", 1.0)
    except ar.AlignRudderError as e:
        assert e.args[0] == "invalid_input", e.args
    else:
        raise AssertionError("out-of-alphabet event accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
