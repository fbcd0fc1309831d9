"""Smoke test for the ndcg_py extension: python python/smoke_test.py"""

import math

import ndcg_py

log = ndcg_py.Discount("log")
assert log.feasibility() == "feasible"
assert ndcg_py.Discount("exp", base=2.0).feasibility() == "infeasible"

# two relevant items ranked 1st and 3rd
got = ndcg_py.ndcg([0.9, 0.7, 0.5], [1, 0, 1], log)
want = (1 / math.log(2) + 1 / math.log(4)) / (1 / math.log(2) + 1 / math.log(3))
assert abs(got - want) < 1e-15, (got, want)
assert abs(ndcg_py.idcg([0, 1, 1], log) - (1 / math.log(2) + 1 / math.log(3))) < 1e-15

try:
    ndcg_py.ndcg([0.1, 0.2], [0, 0], log)
except ndcg_py.AssumptionViolated:
    pass
else:
    raise AssertionError("all-zero grades must raise")

try:
    ndcg_py.Discount("power", beta=2.0)
except ValueError:
    pass
else:
    raise AssertionError("beta outside (0, 1) must raise")

world = """
[world]
curves = [{ family = "affine", intercept = 0.0, slope = 1.0 }]
"""
lim = ndcg_py.limit('[discount]\nfamily = "power"\nbeta = 0.5\n' + world)
assert lim["theorem"] == "Thm3"
assert abs(lim["value"] - 2 * math.sqrt(2) / 3) < 1e-9
assert ndcg_py.limit('[discount]\nfamily = "log"\ncutoff = { kind = "fixed", k = 10 }\n' + world)["value"] is None

points = ndcg_py.curve(
    world + '[[scorers]]\nname = "c"\nkind = "canonical"\n[curve]\nn_grid = [100, 1000]\ntrials = 30\n'
)
assert [p["n"] for p in points] == [100, 1000]
assert points[0]["mean"] < points[1]["mean"] < 1.0

print("ok")
