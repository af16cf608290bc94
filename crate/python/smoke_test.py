"""Smoke test for the Python bindings: exact rationals survive the round trip."""

import json
from fractions import Fraction

import taplab_py


def main():
    names = taplab_py.schedulers()
    assert "bal" in names and "csched" in names, names

    tap = taplab_py.generate("golden-seed", 8)
    rec, trace = taplab_py.simulate(tap, "bal")
    rec, trace = json.loads(rec), json.loads(trace)
    assert Fraction(rec["awake"]) == 1, rec
    assert rec["violations"] == []
    assert taplab_py.opt_awake(tap) == "1"

    rec, _ = taplab_py.simulate(tap, "mwf-all-serial")
    assert Fraction(json.loads(rec)["awake"]) == Fraction(987, 610)

    # a task (1, 2) at speed 2 on two processors in parallel ends at 1/2
    small = json.dumps({"version": 1, "p": 2, "tasks": [{"id": 0, "sigma": "1", "pi": "2", "arrival": "0"}]})
    rec, _ = taplab_py.simulate(small, "mwf-all-parallel", speed="2")
    assert Fraction(json.loads(rec)["trt"]) == Fraction(1, 2)

    rand = taplab_py.generate("random", 4, seed=3, n=5)
    for name in ("bal", "unk"):
        rec, _ = taplab_py.simulate(rand, name)
        assert Fraction(json.loads(rec)["awake"]) >= Fraction(taplab_py.opt_awake(rand))
    assert Fraction(taplab_py.trt_lower(rand)) > 0

    try:
        taplab_py.simulate(tap, "no-such-scheduler")
    except ValueError as e:
        assert "unknown scheduler" in str(e)
    else:
        raise AssertionError("unknown scheduler accepted")

    ok, report = taplab_py.verify(["A1"])
    assert ok and report.startswith("PASS A1"), report
    print("smoke test passed")


if __name__ == "__main__":
    main()
