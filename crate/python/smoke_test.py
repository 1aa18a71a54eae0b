#!/usr/bin/env python3
"""Smoke test for the atsp_py extension module.

Build the module first (see README), then run:
    PYTHONPATH=python python3 python/smoke_test.py
"""
import json
from fractions import Fraction

import atsp_py


def frac(s: str) -> Fraction:
    return Fraction(s)


def main() -> None:
    # Unit K3: optimum 3, ratio 1.
    n, edges = atsp_py.generate("random", 3, seed=0)
    edges = [(t, h, "1") for (t, h, _) in edges]
    report = json.loads(atsp_py.solve(n, edges))
    assert frac(report["hk_value"]) == 3, report
    assert frac(report["weight"]) == 3, report
    assert frac(report["ratio"]) == 1, report

    # Held-Karp on a directed 5-cycle is exactly 5.
    cyc = [(v, (v + 1) % 5, "1") for v in range(5)]
    value, x = atsp_py.held_karp(5, cyc)
    assert frac(value) == 5
    assert all(frac(e) == 1 for e in x)

    # Random instance: solver beats its certified bound and the brute-force
    # optimum sits between the LP value and the tour weight.
    n, edges = atsp_py.generate("random", 6, seed=42)
    report = json.loads(atsp_py.solve(n, edges))
    opt, tour = atsp_py.brute_force(n, edges)
    hk, w = frac(report["hk_value"]), frac(report["weight"])
    assert frac(opt) >= hk and w >= frac(opt), (opt, report)
    assert w <= frac(report["ratio_bound"]) * hk
    assert atsp_py.check_tour(n, edges, tour) == []

    # The laminar dual is laminar and matches the primal objective.
    dual = json.loads(atsp_py.laminar_dual(n, edges))
    assert frac(dual["objective"]) == hk
    fam = [set(s["vertices"]) for s in dual["family"]]
    for i, a in enumerate(fam):
        for b in fam[i + 1:]:
            assert a <= b or b <= a or not (a & b), (a, b)

    # The contraction gadget reproduces its designed laminar structure.
    gadget = json.loads(atsp_py.gadget("fig2-contraction"))
    assert gadget["n"] == 6
    ys = {tuple(s["vertices"]): frac(s["y"]) for s in gadget["laminar"]}
    assert ys[(0, 1, 2, 3)] == 1 and ys[(3,)] == 4

    # TSPLIB parsing round-trips through the binding.
    tsplib = "\n".join(
        [
            "NAME: k3",
            "TYPE: ATSP",
            "DIMENSION: 3",
            "EDGE_WEIGHT_TYPE: EXPLICIT",
            "EDGE_WEIGHT_FORMAT: FULL_MATRIX",
            "EDGE_WEIGHT_SECTION",
            "0 2 2",
            "2 0 2",
            "2 2 0",
            "EOF",
        ]
    )
    n3, e3 = atsp_py.parse_instance(tsplib)
    assert n3 == 3 and len(e3) == 6
    value, _ = atsp_py.held_karp(n3, e3)
    assert frac(value) == 6

    print("atsp_py smoke test passed")


if __name__ == "__main__":
    main()
