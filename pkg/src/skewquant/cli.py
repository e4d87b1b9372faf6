"""Scenario runner: ``python -m skewquant --builtin acc01-skew-factor``.

A scenario file is TOML, either a single scenario at top level or an array
of ``[[scenario]]`` tables::

    id = "gauss-diag-2d"
    kind = "gaussian_diagram"
    seed = 7
    [params]
    T = [[0.6, 0.0], [0.0, 0.8]]
    mu1 = { cov = [[1.0, 0.0], [0.0, 1.0]] }
    mu2 = { cov = [[1.0, 0.0], [0.0, 1.0]] }
    N = 8

Exit status: 0 when every row passes, 1 when any row fails or a scenario
raises, 2 on usage, parse or validation errors.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .suites import SUITES, Row

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SEED_MAX = 2**64 - 1
CSV_FIELDS = ["scenario", "name", "lhs", "rhs", "residual", "tolerance", "pass", "method", "runtime_ms"]
_COUNT_KEYS = {"samples", "probes", "triples", "functions", "valid", "invalid", "sets", "pairs", "laws",
               "random_triples", "gaussian_triples", "jump_triples", "polynomials", "exponentials", "functionals"}


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class Scenario:
    id: str
    kind: str
    seed: int
    params: dict
    description: str = ""
    time_budget_s: float | None = None

    def to_dict(self) -> dict:
        out = {"id": self.id, "kind": self.kind, "seed": self.seed, "description": self.description}
        if self.time_budget_s is not None:
            out["time_budget_s"] = self.time_budget_s
        out["params"] = self.params
        return out

    def content_hash(self) -> str:
        """Git blob hash of the canonical TOML form."""
        body = tomli_w.dumps(_toml_safe(self.to_dict())).encode()
        return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


def _toml_safe(obj):
    # TOML integers are signed 64-bit; larger seeds are stored as strings
    if isinstance(obj, dict):
        return {k: _toml_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_toml_safe(v) for v in obj]
    if isinstance(obj, int) and not isinstance(obj, bool) and obj >= 2**63:
        return str(obj)
    return obj


# -- parsing and validation -----------------------------------------------------------------


def parse_scenarios(text: str, source: str = "<string>") -> list[Scenario]:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"{source}: {exc}") from exc
    if "scenario" in doc:
        tables = doc["scenario"]
        if not isinstance(tables, list):
            raise ParseError(f"{source}: 'scenario' must be an array of tables")
    elif doc:
        tables = [doc]
    else:
        tables = []
    out, problems = [], []
    for k, tab in enumerate(tables):
        where = f"{source}: scenario[{k}]"
        try:
            out.append(_scenario_from_table(tab, where))
        except ValidationError as exc:
            problems.extend(exc.problems)
    if problems:
        raise ValidationError(problems)
    return out


def _scenario_from_table(tab: dict, where: str) -> Scenario:
    problems = []
    sid = tab.get("id")
    if not isinstance(sid, str) or not sid:
        problems.append(f"{where}: field 'id' must be a non-empty string")
        sid = "?"
    where = f"{where} ({sid})"
    kind = tab.get("kind")
    if kind not in SUITES:
        problems.append(f"{where}: field 'kind' must be one of {sorted(SUITES)}, got {kind!r}")
    seed = tab.get("seed", 0)
    if isinstance(seed, str) and seed.isdigit():
        seed = int(seed)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed <= SEED_MAX:
        problems.append(f"{where}: field 'seed' must be an unsigned 64-bit integer")
    params = tab.get("params", {})
    if not isinstance(params, dict):
        problems.append(f"{where}: field 'params' must be a table")
        params = {}
    budget = tab.get("time_budget_s")
    if budget is not None and (not isinstance(budget, (int, float)) or budget <= 0):
        problems.append(f"{where}: field 'time_budget_s' must be positive")
    unknown = set(tab) - {"id", "kind", "seed", "params", "description", "time_budget_s"}
    if unknown:
        problems.append(f"{where}: unknown fields {sorted(unknown)}")
    problems.extend(validate_params(kind, params, where))
    if problems:
        raise ValidationError(problems)
    return Scenario(sid, kind, seed, params, str(tab.get("description", "")), budget)


def _law_dim(p, where: str, name: str, problems: list[str]) -> int | None:
    if not isinstance(p, dict):
        problems.append(f"{where}: params.{name} must be a table")
        return None
    if "cov" in p:
        Q = np.asarray(p["cov"], dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            problems.append(f"{where}: params.{name}.cov must be a square matrix")
            return None
        if not np.allclose(Q, Q.T):
            problems.append(f"{where}: params.{name}.cov must be symmetric")
        return Q.shape[0]
    if "shift" not in p:
        problems.append(f"{where}: params.{name} needs 'cov' (Gaussian) or 'shift' (compound Poisson)")
        return None
    d = len(p["shift"])
    atoms = np.asarray(p.get("atoms", []), dtype=float).reshape(-1, d) if p.get("atoms") else np.zeros((0, d))
    if atoms.shape[0] != len(p.get("weights", [])):
        problems.append(f"{where}: params.{name} has {atoms.shape[0]} atoms but {len(p.get('weights', []))} weights")
    if any(w <= 0 for w in p.get("weights", [])):
        problems.append(f"{where}: params.{name}.weights must be positive")
    return d


def validate_params(kind, params: dict, where: str) -> list[str]:
    problems = []
    for key, val in params.items():
        if "tolerance" in key and (not isinstance(val, (int, float)) or val <= 0):
            problems.append(f"{where}: params.{key} must be a positive number")
        if key in _COUNT_KEYS and (not isinstance(val, int) or val < 0):
            problems.append(f"{where}: params.{key} must be a nonnegative integer")
    if "T" in params:
        if "mu1" not in params or "mu2" not in params:
            problems.append(f"{where}: an explicit T needs params.mu1 and params.mu2")
        else:
            d1 = _law_dim(params["mu1"], where, "mu1", problems)
            d2 = _law_dim(params["mu2"], where, "mu2", problems)
            T = np.atleast_2d(np.asarray(params["T"], dtype=float))
            if d1 is not None and d2 is not None and T.shape != (d2, d1):
                problems.append(f"{where}: params.T has shape {T.shape}, laws need ({d2}, {d1})")
            if ("cov" in params["mu1"]) != ("cov" in params["mu2"]):
                problems.append(f"{where}: mu1 and mu2 must both be Gaussian or both compound Poisson")
    if kind in ("gaussian_diagram", "poisson_diagram") and "T" not in params and not params.get("random_triples"):
        problems.append(f"{where}: {kind} needs an explicit T or params.random_triples > 0")
    if kind == "chaos_isometry" and params.get("family", "gaussian") not in ("gaussian", "poisson"):
        problems.append(f"{where}: params.family must be 'gaussian' or 'poisson'")
    for key in ("gaussian_system", "jump_system"):
        if key in params:
            sysp = params[key]
            A = np.atleast_2d(np.asarray(sysp.get("A", []), dtype=float))
            d = _law_dim(sysp.get("driver"), where, f"{key}.driver", problems)
            if d is not None and A.shape != (d, d):
                problems.append(f"{where}: params.{key}.A has shape {A.shape}, driver needs ({d}, {d})")
    return problems


def load_scenario_file(path: str | Path) -> list[Scenario]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    return parse_scenarios(text, str(path))


# -- builtin catalogue ----------------------------------------------------------------


def _builtin_dir():
    return resources.files("skewquant") / "scenarios"


def list_builtin() -> list[tuple[str, str, str]]:
    """``(id, kind, description)`` for every shipped scenario, sorted by id."""
    out = []
    for entry in sorted(_builtin_dir().iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".toml"):
            for sc in parse_scenarios(entry.read_text(), entry.name):
                out.append((sc.id, sc.kind, sc.description))
    return sorted(out)


def catalogue_text() -> str:
    return "".join(f"{sid}\t{kind}\t{desc}\n" for sid, kind, desc in list_builtin())


def load_builtin(sid: str) -> Scenario:
    for entry in sorted(_builtin_dir().iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".toml"):
            for sc in parse_scenarios(entry.read_text(), entry.name):
                if sc.id == sid:
                    return sc
    raise KeyError(sid)


# -- running --------------------------------------------------------------------------


def apply_overrides(sc: Scenario, seed=None, samples=None, truncation=None) -> Scenario:
    sc = copy.deepcopy(sc)
    if seed is not None:
        sc.seed = seed
    if samples is not None:
        sc.params["samples"] = samples
    if truncation is not None:
        sc.params["N"] = truncation
    return sc


def run_scenario(sc: Scenario) -> dict:
    """Run one scenario and return its report."""
    rng = np.random.default_rng(sc.seed)
    t0 = time.perf_counter()
    error = None
    try:
        rows = SUITES[sc.kind](sc.params, rng)
    except Exception as exc:  # reported under the originating error name
        error = f"{type(exc).__name__}: {exc}"
        rows = [Row("error", float("nan"), float("nan"), float("nan"), 0.0, False, type(exc).__name__, 0.0)]
    runtime = 1e3 * (time.perf_counter() - t0)
    return {
        "scenario": sc.id,
        "kind": sc.kind,
        "seed": sc.seed,
        "hash": sc.content_hash(),
        "rows": [r.to_dict() for r in rows],
        "error": error,
        "pass": error is None and all(r.passed for r in rows),
        "runtime_ms": round(runtime, 3),
    }


def run_batch(scenarios: list[Scenario], jobs: int = 1) -> dict:
    ordered = sorted(scenarios, key=lambda s: s.id)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        reports = list(pool.map(run_scenario, ordered))
    return {"scenarios": reports, "pass": all(r["pass"] for r in reports)}


def _num(x):
    return None if isinstance(x, float) and not np.isfinite(x) else x


def report_json(batch: dict) -> str:
    clean = json.loads(json.dumps(batch, default=float), parse_constant=lambda c: None)
    for rep in clean["scenarios"]:
        for row in rep["rows"]:
            for k in ("lhs", "rhs", "residual"):
                row[k] = _num(row[k])
    return json.dumps(clean, indent=2, sort_keys=True) + "\n"


def report_csv(batch: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for rep in batch["scenarios"]:
        for row in rep["rows"]:
            w.writerow([rep["scenario"], row["name"], repr(row["lhs"]), repr(row["rhs"]), repr(row["residual"]),
                        repr(row["tolerance"]), "pass" if row["passed"] else "fail", row["method"], row["runtime_ms"]])
    return buf.getvalue()


def _summary(batch: dict) -> str:
    lines = []
    for rep in batch["scenarios"]:
        lines.append(f"[{'PASS' if rep['pass'] else 'FAIL'}] {rep['scenario']} ({rep['kind']}, {rep['runtime_ms'] / 1e3:.2f} s)")
        if rep["error"]:
            lines.append(f"    error: {rep['error']}")
        for row in rep["rows"]:
            mark = "ok " if row["passed"] else "BAD"
            lines.append(f"    {mark} {row['name']}: residual {row['residual']:.3e} (tol {row['tolerance']:.1e})")
    lines.append(f"verdict: {'PASS' if batch['pass'] else 'FAIL'}")
    return "\n".join(lines) + "\n"


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _nonnegative(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="skewquant", description="Run skew-convolution verification scenarios.")
    ap.add_argument("--scenario", nargs="+", default=[], metavar="PATH", help="scenario TOML file(s)")
    ap.add_argument("--builtin", action="append", default=[], metavar="ID", help="shipped scenario id ('all' for every one)")
    ap.add_argument("--seed", type=_u64, help="override the scenario seed")
    ap.add_argument("--samples", type=_positive, help="override Monte Carlo sample counts")
    ap.add_argument("--truncation", type=_nonnegative, help="override the chaos truncation N")
    ap.add_argument("--jobs", type=_positive, default=1, help="scenarios run concurrently")
    ap.add_argument("--out", metavar="DIR", help="directory for report.csv / report.json")
    ap.add_argument("--format", choices=["csv", "json", "both"], default="both")
    ap.add_argument("--list", action="store_true", help="print the builtin catalogue and exit")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    if args.list:
        sys.stdout.write(catalogue_text())
        return EXIT_PASS
    scenarios: list[Scenario] = []
    try:
        for path in args.scenario:
            scenarios.extend(load_scenario_file(path))
        for sid in args.builtin:
            if sid == "all":
                scenarios.extend(load_builtin(s) for s, _, _ in list_builtin())
            else:
                try:
                    scenarios.append(load_builtin(sid))
                except KeyError:
                    raise ParseError(f"no builtin scenario {sid!r}; see --list")
    except ValidationError as exc:
        for p in exc.problems:
            print(f"ValidationError: {p}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"ParseError: {exc}", file=sys.stderr)
        return EXIT_USAGE
    scenarios = [apply_overrides(s, args.seed, args.samples, args.truncation) for s in scenarios]
    batch = run_batch(scenarios, args.jobs)
    sys.stdout.write(_summary(batch))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.format in ("csv", "both"):
            (out / "report.csv").write_text(report_csv(batch))
        if args.format in ("json", "both"):
            (out / "report.json").write_text(report_json(batch))
    return EXIT_PASS if batch["pass"] else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
