"""Verification suites behind each scenario kind.

Every suite takes the scenario parameters and a seeded generator and
returns report rows.  A row passes when ``residual <= tolerance``.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import gauss_chaos as gc
from . import poisson_chaos as pc
from . import quadrature
from .measures import AtomicLevyMeasure, CompoundPoissonLaw, GaussianLaw, char_fn, empirical_charfn
from .mehler import (
    Polynomial,
    TrigPolynomial,
    exp_martingale,
    gram_independence,
    mehler_contraction_residual,
    mehler_l2_norms,
    verify_identityPTK,
)
from .ou import (
    OUSystem,
    chapman_kolmogorov_residual,
    invariance_residual,
    invariant_fixed_point_residual,
    invariant_law,
    lyapunov_residual,
    simulate_path,
    time_marginal_charfn,
    verify_skew_semigroup,
)
from .random_models import (
    random_functionals,
    random_gaussian_law,
    random_gaussian_pair,
    random_gaussian_triple,
    random_jump_triple,
    random_unit,
    separated_functionals,
)
from .skew import (
    NotASkewMap,
    check_self_decomposable,
    extend_contraction,
    restrict_to_rkhs,
    skew_factor,
    skew_identity_residual,
)
from .tensor import SymTensor, exponents, multiplicities, sym_power


@dataclass(frozen=True)
class Row:
    name: str
    lhs: float
    rhs: float
    residual: float
    tolerance: float
    passed: bool
    method: str
    runtime_ms: float

    def to_dict(self) -> dict:
        return asdict(self)


class RowCollector:
    """Times each check and records it as a row."""

    def __init__(self):
        self.rows: list[Row] = []
        self._t = time.perf_counter()

    def add(self, name: str, lhs, rhs, residual, tolerance: float, method: str) -> None:
        now = time.perf_counter()
        residual = float(residual)
        passed = bool(np.isfinite(residual) and residual <= tolerance)
        self.rows.append(
            Row(name, float(lhs), float(rhs), residual, float(tolerance), passed, method, round(1e3 * (now - self._t), 3))
        )
        self._t = now

    def bound(self, name: str, value, bound, tolerance: float, method: str) -> None:
        """Row for ``value <= bound + tolerance``."""
        self.add(name, value, bound, max(0.0, float(value) - float(bound)), tolerance, method)


# -- parameter helpers -------------------------------------------------------------------


def law_from_params(p: dict):
    if "cov" in p:
        return GaussianLaw(np.asarray(p["cov"], dtype=float))
    atoms = np.asarray(p.get("atoms", []), dtype=float)
    dim = int(p.get("dim", len(p["shift"])))
    levy = AtomicLevyMeasure(atoms.reshape(-1, dim), np.asarray(p.get("weights", []), dtype=float), dim=dim)
    return CompoundPoissonLaw(np.asarray(p["shift"], dtype=float), levy)


def _explicit_triple(p: dict):
    return skew_factor(np.asarray(p["T"], dtype=float), law_from_params(p["mu1"]), law_from_params(p["mu2"]))


def _probe_points(rng: np.random.Generator, count: int, law) -> np.ndarray:
    # chaos expansions live on the support, so probes are drawn from the law itself
    if isinstance(law, GaussianLaw):
        return rng.standard_normal((count, law.rank)) @ law.factor.T
    return rng.standard_normal((count, law.dim))


# -- suites ------------------------------------------------------------------------------


def suite_skew_factor(p: dict, rng: np.random.Generator) -> list[Row]:
    rc = RowCollector()
    probes = int(p.get("probes", 100))
    tol = float(p.get("tolerance", 1e-10))
    if "T" in p:
        triple = _explicit_triple(p)
        res = skew_identity_residual(triple, probes, rng)
        rc.add("characteristic-function identity", res, 0.0, res, tol, "closed-form")
        if triple.lambda_min is not None:
            rc.add("lambda_min(R) >= 0", triple.lambda_min, 0.0, max(0.0, -triple.lambda_min), 1e-9, "eigvalsh")
        return rc.rows
    max_dim = int(p.get("max_dim", 6))
    worst = 0.0
    for _ in range(int(p.get("valid", 50))):
        triple = random_gaussian_triple(rng, max_dim)
        worst = max(worst, skew_identity_residual(triple, probes, rng))
    rc.add("valid triples: max identity residual", worst, 0.0, worst, tol, "closed-form")
    n_invalid = int(p.get("invalid", 50))
    rejected = 0
    for _ in range(n_invalid):
        T, mu1, mu2 = random_gaussian_pair(rng, max_dim, float(rng.uniform(1.1, 2.0)))
        try:
            skew_factor(T, mu1, mu2)
        except NotASkewMap:
            rejected += 1
    rc.add("invalid T rejected with NotASkewMap", rejected, n_invalid, n_invalid - rejected, 0.0, "eigvalsh")
    return rc.rows


def suite_rkhs_contraction(p: dict, rng: np.random.Generator) -> list[Row]:
    rc = RowCollector()
    max_norm, roundtrip = 0.0, 0.0
    for _ in range(int(p.get("triples", 50))):
        triple = random_gaussian_triple(rng, int(p.get("max_dim", 6)))
        M = restrict_to_rkhs(triple.T, triple.mu1, triple.mu2)
        max_norm = max(max_norm, float(np.linalg.norm(M, 2)) if M.size else 0.0)
        ext = extend_contraction(M, triple.mu1, triple.mu2)
        j2p = np.linalg.pinv(triple.mu2.factor)
        transported = j2p @ (triple.mu2.cov - ext.residual) @ j2p.T
        M2 = restrict_to_rkhs(ext.T, triple.mu1, triple.mu2)
        roundtrip = max(roundtrip, float(np.max(np.abs(transported - M @ M.T), initial=0.0)))
        roundtrip = max(roundtrip, float(np.max(np.abs(M2 - M), initial=0.0)))
    rc.bound("max spectral norm of T restricted to H1", max_norm, 1.0, float(p.get("norm_tolerance", 1e-9)), "svd")
    rc.add("extend/restrict round trip vs M M^T", roundtrip, 0.0, roundtrip, float(p.get("tolerance", 1e-10)), "pinv")
    return rc.rows


def _random_test_function(rng: np.random.Generator, k: int, d: int):
    if k % 2 == 0:
        return Polynomial.random(d, int(rng.integers(1, 4)), rng)
    return TrigPolynomial.random(d, int(rng.integers(1, 4)), rng)


def suite_mehler_contraction(p: dict, rng: np.random.Generator) -> list[Row]:
    rc = RowCollector()
    samples = int(p.get("samples", 100_000))
    worst_mc, worst_q = -np.inf, 0.0
    worst_case = (0.0, 0.0)
    for _ in range(int(p.get("triples", 20))):
        triple = random_gaussian_triple(rng, int(p.get("max_dim", 3)))
        for k in range(int(p.get("functions", 10))):
            f = _random_test_function(rng, k, triple.mu2.dim)
            chk = mehler_contraction_residual(triple, f, 2.0, samples, rng)
            excess = chk.lhs - chk.rhs - 3.0 * math.hypot(chk.lhs_se, chk.rhs_se)
            if excess > worst_mc:
                worst_mc, worst_case = excess, (chk.lhs, chk.rhs)
            if isinstance(f, Polynomial):
                lhs, rhs = mehler_l2_norms(triple, f)
                worst_q = max(worst_q, lhs - rhs)
    rc.add("MC: ||P_T f|| <= ||f|| + 3 SE (worst case)", *worst_case, max(0.0, worst_mc), 0.0, "monte-carlo")
    rc.add("quadrature: ||P_T f|| <= ||f|| (polynomials)", worst_q, 0.0, max(0.0, worst_q), float(p.get("tolerance", 1e-10)), "quadrature")
    return rc.rows


def suite_mehler_identity(p: dict, rng: np.random.Generator) -> list[Row]:
    rc = RowCollector()
    probes = int(p.get("probes", 50))
    nfun = int(p.get("functionals", 10))

    def run(triple):
        pts = _probe_points(rng, probes, triple.mu1)
        return max(verify_identityPTK(triple, x, pts) for x in random_functionals(rng, nfun, triple.mu2.dim))

    if "T" in p:
        triple = _explicit_triple(p)
        res = run(triple)
        tol = float(p.get("tolerance", 1e-9 if triple.kind == "gaussian" else 1e-8))
        rc.add(f"P_T K identity ({triple.kind})", res, 0.0, res, tol, "quadrature" if triple.kind == "gaussian" else "exact-summation")
        return rc.rows
    g = max((run(random_gaussian_triple(rng, int(p.get("max_dim", 3)))) for _ in range(int(p.get("gaussian_triples", 10)))), default=0.0)
    rc.add("P_T K identity (gaussian)", g, 0.0, g, float(p.get("gaussian_tolerance", 1e-9)), "quadrature")
    j = max((run(random_jump_triple(rng)) for _ in range(int(p.get("jump_triples", 10)))), default=0.0)
    rc.add("P_T K identity (jump)", j, 0.0, j, float(p.get("jump_tolerance", 1e-8)), "exact-summation")
    return rc.rows


def _gaussian_isometry(rng: np.random.Generator, d: int, nmax: int) -> tuple[float, float]:
    """Largest deviation of ``E I_n(e_a) I_m(e_b)`` from ``delta n!/mult(a)``, and of ``I_n(h^n)`` from ``He_n(phi_h)``."""
    law = random_gaussian_law(rng, d, allow_degenerate=True)
    r = law.rank
    z, w = quadrature.normal_grid(r, nmax + 1)
    cols, expected = [], []
    for n in range(nmax + 1):
        for a in range(exponents(r, n).shape[0]):
            c = np.zeros(exponents(r, n).shape[0])
            c[a] = 1.0
            cols.append(gc._integral_from_coords(SymTensor(n, r, c), z))
            expected.append(math.factorial(n) / multiplicities(r, n)[a])
    B = np.stack(cols, axis=1)
    G = B.T @ (w[:, None] * B)
    iso = float(np.max(np.abs(G - np.diag(expected))))
    h = random_unit(rng, r)
    x = rng.standard_normal((5, r)) @ law.factor.T
    pin = max(
        float(np.max(np.abs(gc.multiple_integral(sym_power(h, n), law, x) - gc.hermite(n, gc.phi(h, x, law)))))
        for n in range(nmax + 1)
    )
    return iso, pin


def _poisson_checks(rng: np.random.Generator, atoms: int, nmax: int) -> dict:
    law = CompoundPoissonLaw(rng.standard_normal(1), AtomicLevyMeasure(rng.standard_normal((atoms, 1)), rng.uniform(0.1, 1.0, atoms)))
    levy = law.levy
    counts, pmf = pc._lattice(levy)
    cols, expected, kern = [], [], []
    for n in range(nmax + 1):
        size = exponents(atoms, n).shape[0]
        for a in range(size):
            v = np.zeros(size)
            v[a] = 1.0
            t = pc.SymFnTensor(n, levy, v)
            cols.append(pc.poisson_multiple_integral(t, counts))
            expected.append(math.factorial(n) * t.norm() ** 2)
    B = np.stack(cols, axis=1)
    G = B.T @ (pmf[:, None] * B)
    out = {"isometry": float(np.max(np.abs(G - np.diag(expected)) / np.maximum(1.0, np.diag(expected))[None, :]))}
    poly = pc.count_of(levy, np.arange(atoms) < max(1, atoms - 1), power=min(2, nmax))
    out["reconstruction"] = pc.last_penrose_l2_residual(poly, levy, min(2, nmax))
    lhs, rhs = pc.chaos_norms(poly, levy, min(2, nmax))
    out["chaos norms"] = abs(lhs - rhs) / max(1.0, lhs)
    xs = rng.standard_normal(1)
    prod = 0.0
    for n in range(1, nmax + 1):
        ys = levy.atoms[rng.integers(0, atoms, n)]
        prod = max(prod, pc.product_formula_residual(law, xs, ys))
    out["product formula"] = prod
    return out


def suite_chaos_isometry(p: dict, rng: np.random.Generator) -> list[Row]:
    rc = RowCollector()
    family = p.get("family", "gaussian")
    nmax = int(p.get("max_order", 4 if family == "gaussian" else 3))
    tol = float(p.get("tolerance", 1e-9))
    if family == "gaussian":
        iso, pin = 0.0, 0.0
        for _ in range(int(p.get("laws", 3))):
            for d in range(1, int(p.get("max_dim", 3)) + 1):
                a, b = _gaussian_isometry(rng, d, nmax)
                iso, pin = max(iso, a), max(pin, b)
        rc.add("E I_n(s) I_m(t) = delta_nm n! <s,t>", iso, 0.0, iso, tol, "gauss-hermite")
        rc.add("I_n(h^n) = He_n(phi_h), unit h", pin, 0.0, pin, tol, "closed-form")
        return rc.rows
    worst: dict[str, float] = {}
    for _ in range(int(p.get("laws", 3))):
        for atoms in range(1, int(p.get("max_atoms", 3)) + 1):
            for k, v in _poisson_checks(rng, atoms, nmax).items():
                worst[k] = max(worst.get(k, 0.0), v)
    for k in ("isometry", "chaos norms", "reconstruction", "product formula"):
        rc.add(f"poisson {k}", worst[k], 0.0, worst[k], tol, "exact-summation")
    return rc.rows


def suite_stroock(p: dict, rng: np.random.Generator) -> list[Row]:
    rc = RowCollector()
    poly = 0.0
    for _ in range(int(p.get("polynomials", 10))):
        law = random_gaussian_law(rng, int(rng.integers(1, int(p.get("max_dim", 3)) + 1)), allow_degenerate=True)
        f = gc.random_polynomial(law, int(rng.integers(0, int(p.get("max_degree", 4)) + 1)), rng)
        poly = max(poly, gc.stroock_l2_residual(f, int(p.get("poly_truncation", 4))))
    rc.add("polynomial reconstruction", poly, 0.0, poly, float(p.get("poly_tolerance", 1e-10)), "gauss-hermite")
    eh = 0.0
    for _ in range(int(p.get("exponentials", 5))):
        law = random_gaussian_law(rng, int(rng.integers(1, int(p.get("max_dim", 3)) + 1)))
        h = float(p.get("h_norm", 0.5)) * random_unit(rng, law.rank)
        eh = max(eh, gc.stroock_l2_residual(gc.exp_vector(law, h), int(p.get("N", 8)), nodes=24 if law.rank == 3 else 40))
    rc.add("e_h reconstruction, L2 residual", eh, 0.0, eh, float(p.get("exp_tolerance", 1e-4)), "gauss-hermite")
    return rc.rows


def _diagram_functions(triple, rng: np.random.Generator, p: dict) -> list[tuple[str, object]]:
    mu2 = triple.mu2
    r2 = mu2.rank
    h = float(p.get("h_norm", 0.5)) * random_unit(rng, r2)
    # K uses the same H-norm as e_h so the order-N chaos tail stays below the tolerance
    xs = gc.functional_for(float(p.get("k_norm", 0.5)) * random_unit(rng, r2), mu2)
    return [
        ("e_h", gc.exp_vector(mu2, h)),
        ("polynomial", gc.random_polynomial(mu2, int(p.get("poly_degree", 3)), rng)),
        ("K", gc.k_vector(mu2, xs)),
    ]


def suite_gaussian_diagram(p: dict, rng: np.random.Generator) -> list[Row]:
    rc = RowCollector()
    N = int(p.get("N", 8))
    probes = int(p.get("probes", 10))
    triples = []
    if "T" in p:
        triples.append(("explicit", _explicit_triple(p)))
    for k in range(int(p.get("random_triples", 0))):
        triples.append((f"random {k}", random_gaussian_triple(rng, int(p.get("max_dim", 3)))))
    coef, recon = {}, {}
    for _, triple in triples:
        pts = _probe_points(rng, probes, triple.mu1)
        for name, f in _diagram_functions(triple, rng, p):
            a, b = gc.verify_gaussian_diagram(triple, f, N, pts)
            coef[name] = max(coef.get(name, 0.0), a)
            recon[name] = max(recon.get(name, 0.0), b)
    ctol, rtol = float(p.get("coefficient_tolerance", 1e-8)), float(p.get("reconstruction_tolerance", 1e-4))
    for name in coef:
        rc.add(f"{name}: chaos coefficients of P_T f vs Gamma(T*)", coef[name], 0.0, coef[name], ctol, "gauss-hermite")
        rc.add(f"{name}: P_T f vs transported chaos sum", recon[name], 0.0, recon[name], rtol, "gauss-hermite")
    return rc.rows


def suite_poisson_diagram(p: dict, rng: np.random.Generator) -> list[Row]:
    rc = RowCollector()
    N = int(p.get("N", 3))
    triples = []
    if "T" in p:
        triples.append(_explicit_triple(p))
    for _ in range(int(p.get("random_triples", 0))):
        triples.append(random_jump_triple(rng, int(p.get("max_dim", 2)), int(p.get("max_atoms", 3))))
    worst = {"K": 0.0, "trigonometric": 0.0}
    norm_gap = -np.inf
    for triple in triples:
        d2 = triple.mu2.dim
        fs = {
            "K": exp_martingale(triple.mu2, rng.standard_normal(d2)),
            "trigonometric": TrigPolynomial.random(d2, 3, rng),
        }
        for name, f in fs.items():
            worst[name] = max(worst[name], pc.verify_poisson_diagram(triple, f, N).residual)
        for n in range(N + 1):
            size = pc.multisets(len(triple.mu2.levy), n).shape[0]
            t = pc.SymFnTensor(n, triple.mu2.levy, rng.standard_normal(size) + 1j * rng.standard_normal(size))
            norm_gap = max(norm_gap, pc.contract_kernel(t, triple.T, triple.mu1.levy).norm() - t.norm())
    tol = float(p.get("tolerance", 1e-8))
    for name, v in worst.items():
        rc.add(f"{name}: tau^n(j1 P_T f) vs contracted tau^n(j2 f)", v, 0.0, v, tol, "exact-summation")
    rc.bound("contract_kernel norm inequality (max ||g o T|| - ||g||)", norm_gap, 0.0, float(p.get("norm_tolerance", 1e-12)), "exact")
    return rc.rows


def _ou_system(p: dict, rng: np.random.Generator, jump: bool) -> OUSystem:
    key = "jump_system" if jump else "gaussian_system"
    if key in p:
        return OUSystem(np.asarray(p[key]["A"], dtype=float), law_from_params(p[key]["driver"]))
    d = int(p.get("dim", 2))
    A = -np.eye(d) + 0.3 * rng.standard_normal((d, d))
    if jump:
        levy = AtomicLevyMeasure(rng.standard_normal((2, d)), rng.uniform(0.2, 1.0, 2))
        return OUSystem(A, CompoundPoissonLaw(0.2 * rng.standard_normal(d), levy))
    return OUSystem(A, GaussianLaw(np.eye(d) + 0.2 * np.ones((d, d))))


def suite_ou_semigroup(p: dict, rng: np.random.Generator) -> list[Row]:
    rc = RowCollector()
    gs, js = _ou_system(p, rng, False), _ou_system(p, rng, True)
    pairs = rng.uniform(0.05, 2.0, (int(p.get("pairs", 10)), 2))
    probes = int(p.get("probes", 50))
    g = max(verify_skew_semigroup(gs, s, t, probes, rng) for s, t in pairs)
    rc.add("Gaussian: mu_{s+t} = S(t) mu_s * mu_t", g, 0.0, g, float(p.get("gaussian_tolerance", 1e-9)), "van-loan")
    j = max(verify_skew_semigroup(js, s, t, probes, rng) for s, t in pairs)
    rc.add("jump: mu_{s+t} = S(t) mu_s * mu_t", j, 0.0, j, float(p.get("jump_tolerance", 1e-7)), "quad_vec")
    inv = invariant_law(gs)
    rc.add("Lyapunov residual", lyapunov_residual(gs, inv.cov), 0.0, lyapunov_residual(gs, inv.cov), 1e-10, "lyapunov")
    lam = min(check_self_decomposable(gs.S(t), inv).lambda_min for t in pairs[:, 0])
    rc.add("invariant law self-decomposable: lambda_min(R)", lam, 0.0, max(0.0, -lam), 1e-9, "eigvalsh")
    fp = max(invariant_fixed_point_residual(js, t, probes, rng) for t in pairs[:3, 0])
    rc.add("jump invariant law fixed point", fp, 0.0, fp, 1e-7, "quad_vec")
    f = TrigPolynomial.random(js.dim, 3, rng)
    pts = rng.standard_normal((5, js.dim))
    ck = max(chapman_kolmogorov_residual(sys, s, t, f, pts) for sys in (gs, js) for s, t in pairs[:3])
    rc.add("P_s P_t f = P_{s+t} f (K-class)", ck, 0.0, ck, 1e-7, "char-fn")
    iv = max(invariance_residual(sys, t, f) for sys in (gs, js) for t in pairs[:3, 1])
    rc.add("int P_t f d mu_inf = int f d mu_inf", iv, 0.0, iv, 1e-7, "char-fn")
    paths = int(p.get("samples", 100_000))
    t_end = float(p.get("path_time", 1.0))
    grid = np.linspace(0.0, t_end, int(p.get("path_steps", 4)) + 1)
    u = rng.standard_normal((int(p.get("path_probes", 10)), js.dim))
    for name, sys in (("Gaussian", gs), ("jump", js)):
        y0 = rng.standard_normal(sys.dim)
        Y = simulate_path(sys, y0, grid, rng, paths)[:, -1]
        mean, se = empirical_charfn(Y, u)
        exact = time_marginal_charfn(sys, y0, t_end).fn(u)
        z = float(np.max(np.abs(mean - exact) / se))
        rc.bound(f"{name} paths: max |empirical - exact| / SE", z, 3.0, 0.0, "monte-carlo")
    return rc.rows


def suite_independence(p: dict, rng: np.random.Generator) -> list[Row]:
    rc = RowCollector()
    lam_distinct, lam_dup = np.inf, 0.0
    for _ in range(int(p.get("sets", 50))):
        d = int(rng.integers(1, int(p.get("max_dim", 3)) + 1))
        law = random_gaussian_law(rng, d)
        k = int(rng.integers(2, int(p.get("max_functionals", 8)) + 1))
        # close functionals make the Gram matrix nearly singular, so sets are drawn separated
        u = separated_functionals(rng, k, law.cov, float(p.get("spread", 3.0)), float(p.get("min_separation", 0.5)))
        lam_distinct = min(lam_distinct, gram_independence(law, u).lambda_min)
        dup = np.concatenate([u, u[:1]], axis=0)
        lam_dup = max(lam_dup, abs(gram_independence(law, dup).lambda_min))
    rc.add("distinct functionals: min lambda_min", lam_distinct, 1e-10, 0.0 if lam_distinct > 1e-10 else 1e-10 - lam_distinct, 0.0, "eigvalsh")
    rc.add("duplicated functional: |lambda_min|", lam_dup, 0.0, lam_dup, float(p.get("dup_tolerance", 1e-12)), "eigvalsh")
    return rc.rows


SUITES: dict[str, Callable[[dict, np.random.Generator], list[Row]]] = {
    "skew_factor": suite_skew_factor,
    "rkhs_contraction": suite_rkhs_contraction,
    "mehler_contraction": suite_mehler_contraction,
    "mehler_identity": suite_mehler_identity,
    "chaos_isometry": suite_chaos_isometry,
    "stroock": suite_stroock,
    "gaussian_diagram": suite_gaussian_diagram,
    "poisson_diagram": suite_poisson_diagram,
    "ou_semigroup": suite_ou_semigroup,
    "independence": suite_independence,
}

__all__ = ["Row", "RowCollector", "SUITES", "law_from_params"]
