"""Command-line driver: ``run``, ``sweep`` and ``verify``.

Exit codes: 0 success, 1 configuration error, 2 verification failure.
"""
from __future__ import annotations

import argparse
import sys
import time
from fractions import Fraction

import numpy as np

from . import experiments, oracle
from .config import expand, load_config
from .core import ConfigurationError
from .geometry import ProjectionError, project_cone
from .matching import max_weight_perm

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VERIFY = 2

SUITES = ("matching", "projection", "expected_weight", "lemma1", "single_queue", "all")


class VerifyResult:
    def __init__(self, name: str, ok: bool, detail: str):
        self.name, self.ok, self.detail = name, ok, detail

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}: {self.detail}"


def verify_matching(seed: int = 0, cases: int = 1000, ns=range(2, 7)) -> VerifyResult:
    rng = np.random.default_rng(seed)
    bad = 0
    total = 0
    perm = np.empty(0, dtype=np.int64)
    for n in ns:
        perm = np.empty(n, dtype=np.int64)
        for _ in range(cases):
            hi = int(rng.choice([2, 3, 100]))
            q = rng.integers(0, hi + 1, size=(n, n)).astype(np.int64)
            w_ref, p_ref = oracle.brute_force_matching(q)
            w = max_weight_perm(q, perm)
            total += 1
            if w != w_ref or not np.array_equal(perm, p_ref):
                bad += 1
    return VerifyResult("matching", bad == 0, f"{bad} mismatches over {total} cases (weight and tie-break)")


def verify_projection(seed: int = 0, cases: int = 200, tol: float = 1e-6) -> VerifyResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    try:
        for _ in range(cases):
            x = rng.normal(size=(3, 3)) * rng.choice([1.0, 5.0])
            worst = max(worst, float(np.abs(project_cone(x).parallel - oracle.active_set_projection(x)).max()))
    except ProjectionError as exc:
        return VerifyResult("projection", False, f"Dykstra did not converge: {exc}")
    return VerifyResult("projection", worst < tol, f"max residual {worst:.3e} over {cases} cases (tol {tol:g})")


def _brute_expected_weight_check():
    q = np.array([[3, 0, 0], [0, 0, 0], [0, 0, 0]])
    checks = [
        (oracle.exact_expected_weight(q, "power_of_d", 2), Fraction(5, 3)),
        (oracle.exact_expected_weight(q, "random_1_flip"), Fraction(5, 3)),
        (oracle.exact_expected_weight(np.full((3, 3), 4), "power_of_d", 3), Fraction(12)),
        (oracle.exact_expected_weight(np.full((4, 4), 2), "random_1_flip"), Fraction(8)),
    ]
    return [got == want for got, want in checks]


def verify_expected_weight(seed: int = 0, cases: int = 30, samples: int = 20000) -> VerifyResult:
    """Fixed enumeration values, then Monte Carlo of the jitted samplers against the exact mean."""
    from .schedulers import power_of_d, random_d_flip

    fixed = _brute_expected_weight_check()
    rng = np.random.default_rng(seed)
    worst_z = 0.0
    for _ in range(cases):
        q = rng.integers(0, 20, size=(3, 3))
        for policy in ("power_of_d", "random_1_flip"):
            exact = float(oracle.exact_expected_weight(q, policy, 2))
            if policy == "power_of_d":
                ws = [int((q * power_of_d(q, 2, rng).matrix()).sum()) for _ in range(samples // 10)]
            else:
                ws = [int((q * random_d_flip(q, 1, rng).matrix()).sum()) for _ in range(samples // 10)]
            ws = np.asarray(ws, dtype=float)
            se = ws.std(ddof=1) / np.sqrt(ws.size)
            if se > 0:
                worst_z = max(worst_z, abs(ws.mean() - exact) / se)
            elif ws.mean() != exact:
                worst_z = np.inf
    ok = all(fixed) and worst_z < 5.0
    return VerifyResult("expected_weight", ok,
                        f"{sum(fixed)}/{len(fixed)} fixed values, max |z| {worst_z:.2f} over {2 * cases} sampler checks")


def lemma1_margin(q, policy: str) -> float:
    """``E[<q,s>] - (<q,1>/n + ||q_perp_K|| / (2 n^3))`` by exact enumeration."""
    q = np.asarray(q)
    n = q.shape[0]
    lhs = float(oracle.exact_expected_weight(q, policy, 2))
    if n <= 3:
        perp = float(np.linalg.norm(q - oracle.active_set_projection(q)))
    else:
        perp = project_cone(q).norm_perp
    return lhs - (q.sum() / n + perp / (2 * n**3))


def verify_lemma1(seed: int = 0, cases: int = 100) -> VerifyResult:
    rng = np.random.default_rng(seed)
    margins = []
    for _ in range(cases):
        q = rng.integers(0, 51, size=(3, 3))
        for policy in ("power_of_d", "random_1_flip"):
            margins.append(lemma1_margin(q, policy))
    low = min(margins)
    viol = sum(m < 0 for m in margins)
    return VerifyResult("lemma1", viol == 0, f"min(LHS - RHS) = {low:.4f}, {viol} violations over {len(margins)}")


def verify_single_queue() -> VerifyResult:
    """Oracle sanity (λ = 0, detailed balance, closed form) plus a short n = 2 random-schedule run."""
    from .simulate import simulate
    from .traffic import make_uniform

    sol0 = oracle.exact_single_queue_mean(0.0, 0.5)
    sol = oracle.exact_single_queue_mean(0.45, 0.5)
    closed = 0.45 * 0.5 / 0.05
    checks = [sol0.mean == 0.0, sol.detailed_balance_residual() < 1e-12, abs(sol.mean - closed) < 1e-8]
    spec = make_uniform(2, 0.1)
    rec = simulate(spec, "random", horizon=400_000, rng=np.random.default_rng(1))
    from .metrics import estimate_mean

    est = estimate_mean(rec.sum_q)
    target = 4 * sol.mean
    sim_ok = abs(est.mean - target) <= 3 * est.half_width
    checks.append(sim_ok)
    return VerifyResult(
        "single_queue",
        all(checks),
        f"oracle mean {sol.mean:.6f} (closed form {closed:.6f}); simulated sum {est.mean:.3f} "
        f"± {est.half_width:.3f} vs {target:.3f}",
    )


_VERIFIERS = {
    "matching": verify_matching,
    "projection": verify_projection,
    "expected_weight": verify_expected_weight,
    "lemma1": verify_lemma1,
    "single_queue": verify_single_queue,
}


def verify(suite: str) -> list[VerifyResult]:
    names = list(_VERIFIERS) if suite == "all" else [suite]
    return [_VERIFIERS[name]() for name in names]


def _cmd_run(args, sweep_only: bool = False) -> int:
    try:
        points = expand(load_config(args.config))
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if sweep_only:
        for cfg in points:
            sched = ", ".join(f"{k}={v}" for k, v in cfg.scheduler_params.items())
            print(f"{cfg.config_id} n={cfg.n} eps={cfg.epsilon:.6g} {cfg.scheduler_name}({sched}) "
                  f"T={cfg.resolved_horizon()} R={cfg.replications}")
        print(f"{len(points)} point(s)")
        return EXIT_OK

    def progress(cfg, rep):
        if not args.quiet:
            print(f"done {cfg.config_id} {cfg.scheduler_name} eps={cfg.epsilon:.4g} rep={rep}", file=sys.stderr)

    t0 = time.perf_counter()
    rows = experiments.run_points(points, threads=args.threads, progress=progress)
    out = args.out or points[0].output
    if out:
        experiments.write_csv(rows, out)
        if not args.quiet:
            print(f"wrote {len(rows)} rows to {out} in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    else:
        sys.stdout.write(experiments.to_csv(rows))
    return EXIT_OK


def _cmd_verify(args) -> int:
    ok = True
    for res in verify(args.suite):
        print(res.line())
        ok &= res.ok
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="switchsim", description="Input-queued switch scheduling simulator")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run every point of a config and write CSV")
    r.add_argument("config")
    r.add_argument("--out", help="CSV path (default: config 'output', else stdout)")
    r.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${experiments.THREADS_ENV} or 1)")
    r.add_argument("-q", "--quiet", action="store_true")
    s = sub.add_parser("sweep", help="validate a config and list its expanded points")
    s.add_argument("config")
    v = sub.add_parser("verify", help="oracle cross-checks")
    v.add_argument("suite", choices=SUITES)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        if args.threads is not None and args.threads < 1:
            print("config error: --threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        return _cmd_run(args)
    if args.command == "sweep":
        return _cmd_run(args, sweep_only=True)
    return _cmd_verify(args)


if __name__ == "__main__":
    sys.exit(main())
