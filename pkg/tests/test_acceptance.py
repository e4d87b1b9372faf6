"""Acceptance gate: one builtin scenario per criterion, run at its stated tolerances.

Each criterion prints a single PASS/FAIL line; the lines are repeated in the
terminal summary.  Run standalone with ``python3 tests/test_acceptance.py``.
"""

import time

import pytest

from skewquant.cli import load_builtin, run_scenario

CRITERIA = [
    (1, "skew-factor correctness", "acc01-skew-factor"),
    (2, "contraction restriction", "acc02-rkhs-contraction"),
    (3, "P_T contraction", "acc03-mehler-contraction"),
    (4, "exponential-martingale identity", "acc04-mehler-identity"),
    (5, "Gaussian chaos isometry", "acc05-gaussian-chaos-isometry"),
    (6, "Stroock reconstruction", "acc06-stroock"),
    (7, "Gaussian commuting diagram", "acc07-gaussian-diagram"),
    (8, "Poisson chaos", "acc08-poisson-chaos"),
    (9, "Poisson commuting diagram", "acc09-poisson-diagram"),
    (10, "OU / Mehler semigroup", "acc10-ou-semigroup"),
    (11, "exponential independence", "acc11-independence"),
]
TOTAL_BUDGET_S = 600.0

RESULTS: dict[int, str] = {}
_ELAPSED: list[float] = []


def evaluate(number: int, label: str, sid: str) -> tuple[bool, str]:
    sc = load_builtin(sid)
    t0 = time.perf_counter()
    rep = run_scenario(sc)
    elapsed = time.perf_counter() - t0
    _ELAPSED.append(elapsed)
    failed = [r["name"] for r in rep["rows"] if not r["passed"]]
    over = sc.time_budget_s is not None and elapsed > sc.time_budget_s
    ok = rep["pass"] and not over
    detail = f"{len(rep['rows'])} checks, {elapsed:.2f} s (budget {sc.time_budget_s:g} s)"
    if rep["error"]:
        detail += f"; error {rep['error']}"
    if failed:
        detail += f"; failing: {', '.join(failed[:5])}"
    if over:
        detail += "; over time budget"
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {label}: {detail}"
    return ok, line


@pytest.mark.parametrize("number,label,sid", CRITERIA, ids=[c[2] for c in CRITERIA])
def test_criterion(number, label, sid):
    ok, line = evaluate(number, label, sid)
    RESULTS[number] = line
    print(line)
    assert ok, line


def test_total_runtime():
    if len(_ELAPSED) < len(CRITERIA):
        pytest.skip("runs only after the full criterion set")
    total = sum(_ELAPSED)
    print(f"total acceptance runtime {total:.1f} s (budget {TOTAL_BUDGET_S:g} s)")
    assert total < TOTAL_BUDGET_S


if __name__ == "__main__":
    ok_all = True
    for c in CRITERIA:
        ok, line = evaluate(*c)
        ok_all &= ok
        print(line, flush=True)
    print(f"total {sum(_ELAPSED):.1f} s; verdict {'PASS' if ok_all else 'FAIL'}")
    raise SystemExit(0 if ok_all else 1)
