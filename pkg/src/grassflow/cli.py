"""Command line front end: ``grassflow <command> --instance FILE``.

Every command prints one JSON report.  The ``body`` part depends only on the
instance file and the flags; timing and thread count live under ``meta``.
Exit codes: 0 pass, 1 fail (report still printed), 2 invalid input,
3 transversality failure, 4 unreachable cutoff.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import linalg as la
from .errors import (CutoffUnreachable, GrassflowError, MissingBoundarySpectrum, NotTransversal,
                     TransversalityError, ValidationError)
from .instance import Instance, load_instance
from .serialize import matrix_to_json, real_to_json, scalar_to_json, series_to_json, vector_to_json

EXIT_PASS, EXIT_FAIL, EXIT_INVALID, EXIT_TRANSVERSALITY, EXIT_CUTOFF = 0, 1, 2, 3, 4
COMMANDS = ("decompose", "shadow", "omega", "project", "verify", "trace-exponents")
PASS_FROM = 40.0           # verify: residuals are judged for Re t >= this
PASS_RESIDUAL = 1e-6
SHADOW_TIMES = (10.0, 1e2, 1e3, 1e4)


def _threads() -> int:
    raw = os.environ.get("GRASSFLOW_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return max(1, min(4, os.cpu_count() or 1))


def _ordered_map(fn, items, threads: int) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _clean(x):
    """Make a value JSON-safe: non-finite floats become strings."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x + 0.0 if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, Fraction):
        return real_to_json(x)
    if isinstance(x, complex):
        return [x.real + 0.0, x.imag + 0.0]
    return x


def _t_json(t: complex):
    return [float(t.real) + 0.0, float(t.imag) + 0.0]


def _cutoff(inst: Instance, raw):
    if raw is None:
        return inst.cutoff
    try:
        c = Fraction(raw) if inst.exact else float(Fraction(raw))
    except (ValueError, ZeroDivisionError):
        raise ValidationError(f"--cutoff: not a number: {raw!r}") from None
    if c >= 0:
        raise ValidationError("--cutoff must be negative")
    return c


def _need_K(inst: Instance):
    if inst.K is None:
        raise ValidationError("subspace_K: required for this command")
    return inst.K


def _im_levels(inst: Instance) -> list:
    return sorted({round(t.imag, 12) for t in inst.grid})


# -- commands -------------------------------------------------------------------------------

def cmd_decompose(inst: Instance, args) -> tuple:
    sd = inst.sd
    blocks = []
    for b in sd.blocks:
        k, p = 0, la.eye(b.nilpotent.shape[0], sd.exact)
        while not la.is_zero(p, atol=1e-12 * max(1.0, la.scale_of(b.nilpotent))) and k <= sd.n:
            p = p @ b.nilpotent
            k += 1
        blocks.append({"eigenvalue": scalar_to_json(b.value), "multiplicity": b.multiplicity,
                       "mu": real_to_json(sd.levels[b.level].mu), "phase": real_to_json(b.phase),
                       "nilpotent_index": k})
    res = sd.residuals()
    tol = 0.0 if sd.exact else 1e-8 * max(1.0, la.scale_of(sd.a))
    checks = {name: {"value": float(v), "ok": v <= tol} for name, v in res.items()}
    body = {
        "n": sd.n,
        "blocks": blocks,
        "mu_levels": [real_to_json(m) for m in sd.mu_values],
        "phases": [real_to_json(w) for w in sd.phases],
        "nilpotent_zero": la.is_zero(sd.nilpotent, atol=tol),
        "generator": matrix_to_json(sd.a),
        "skew_part": matrix_to_json(sd.a_prime),
        "checks": checks,
    }
    if inst.boundary is not None:
        body["boundary_spectrum"] = {"m": real_to_json(inst.boundary.m),
                                     "sigmas": [{"sigma": scalar_to_json(s), "chains": list(c)}
                                                for s, c in inst.boundary.sigmas]}
    return body, all(c["ok"] for c in checks.values())


def cmd_shadow(inst: Instance, args) -> tuple:
    from .shadow import shadow, verify_shadow

    fcs = shadow(inst.D, inst.sd)
    ims = _im_levels(inst)
    times = [complex(x, y) for y in ims for x in inst.raw.get("shadow_times", SHADOW_TIMES)]
    rep = verify_shadow(fcs, inst.sd, inst.theta, times)
    rows = [{"t": _t_json(t), "re_t": t.real, "im_t": t.imag, "gap": g} for t, g in rep.samples]
    body = {
        "D_inf": [vector_to_json(c) for c in fcs.D_inf.basis.T],
        "curves": [{"level": c.level, "mu": real_to_json(c.mu), "key": list(c.key), "order": c.order,
                    "limit_vector": vector_to_json(c.g_inf), "decaying_tails": len(c.tails)}
                   for c in fcs.curves],
        "gaps": rows,
        "fitted_exponent": rep.exponent,
        "constant": rep.constant,
        "increases": len(rep.increases),
    }
    if args.out:
        _write_csv(args.out / "gaps.csv", ["t", "re_t", "im_t", "gap"],
                   [[_fmt_t(complex(r["re_t"], r["im_t"])), r["re_t"], r["im_t"], repr(r["gap"])] for r in rows])
        from .plotting import gap_plot
        gap_plot(rows, args.out / "gaps.png", f"{inst.name}: gap to the limiting flow")
    return body, rep.passed


def cmd_omega(inst: Instance, args) -> tuple:
    from . import oracle
    from .omega import omega_limit, variety_membership

    model = omega_limit(inst.D, inst.sd, inst.theta, inst.relations)
    base = float(model.period) if model.period else 2 * math.pi
    ts = [base * k / 7 for k in range(7)]
    self_check = max(model.distance(model.sample(t)) for t in ts)
    far = [40.0 + base * k / 5 for k in range(5)]
    orbit = [model.distance(oracle.flow_subspace(inst.sd, inst.D, t)) for t in far]
    body = {
        "D_inf": [vector_to_json(c) for c in model.D_inf.basis.T],
        "imag_parts": [real_to_json(w) for w in model.imag_parts],
        "torus_dim": model.torus_dim,
        "directions": model.directions.T.tolist(),
        "stabilizer_relations": model.stabilizer_relations.tolist(),
        "period": model.period,
        "generic": model.generic,
        "orbit_variation": model.orbit_variation(ts),
        "torus_self_distance": self_check,
        "orbit_distance": [{"t": t, "gap": g} for t, g in zip(far, orbit)],
    }
    if inst.K is not None and inst.K.dim + model.D_inf.dim == inst.sd.n:
        body["limit_meets_K"] = variety_membership(model.D_inf, inst.K)
    return body, self_check <= 1e-8


def _verdict_json(v) -> dict:
    return {"transversal": v.transversal, "det_signal": v.det_signal, "torus_signal": v.torus_signal,
            "inf_abs_det": v.inf_abs_det, "torus_margin": v.torus_margin,
            "witnesses": [{"t": _t_json(t), "abs_det": d} for t, d in v.witnesses], "notes": v.notes}


def _series(inst: Instance, args):
    from .projasym import projection_series
    from .shadow import shadow

    K = _need_K(inst)
    fcs = shadow(inst.D, inst.sd)
    return fcs, projection_series(fcs, K, _cutoff(inst, args.cutoff), inst.neumann_cap)


def cmd_project(inst: Instance, args) -> tuple:
    from .omega import minimal_growth_check
    from .projasym import projection_series, q_floor, to_zeta_convention
    from .shadow import shadow

    K = _need_K(inst)
    fcs = shadow(inst.D, inst.sd)
    body = {}
    if not args.force:
        v = minimal_growth_check(inst.D, K, inst.sd, theta=inst.theta, grid=inst.grid,
                                 relations=inst.relations, fcs=fcs, oracle_norms=False)
        body["verdict"] = _verdict_json(v)
        if not v.transversal:
            raise _Abort(body, EXIT_TRANSVERSALITY, "not transversal: the Omega-limit meets the bad variety of K")
    s = projection_series(fcs, K, _cutoff(inst, args.cutoff), inst.neumann_cap)
    body["series"] = series_to_json(s)
    body["q_floor_on_grid"] = q_floor(s, inst.grid)
    if inst.boundary is not None and inst.sector is not None:
        z = to_zeta_convention(s, inst.boundary.m, inst.sector)
        body["zeta"] = {"m": real_to_json(z.m), "sigma_re": [real_to_json(x) for x in z.sigma_re],
                        "aligned": z.aligned, "exponents": [real_to_json(e) for e in z.exponents()]}
    return body, True


def cmd_verify(inst: Instance, args) -> tuple:
    from .errors import DenominatorTooSmall
    from .projasym import next_order_bound, oracle_residual

    fcs, s = _series(inst, args)
    times = [complex(t.real, y) for y in _im_levels(inst) for t in inst.verify_times]

    def one(t):
        try:
            lr = oracle_residual(s, inst.sd, inst.D, inst.K, t)
        except DenominatorTooSmall:
            return t, math.nan
        return t, lr

    rows = []
    ok = True
    for t, lr in _ordered_map(one, times, _threads()):
        res = math.exp(lr) if lr > -700 else 0.0
        bound = next_order_bound(s, t)
        row = {"t": _t_json(t), "re_t": t.real, "im_t": t.imag, "residual": res,
               "log10_residual": lr / math.log(10) if not math.isnan(lr) else math.nan,
               "predicted_bound": bound}
        if t.real >= PASS_FROM and not res <= PASS_RESIDUAL:
            ok = False
        rows.append(row)
    body = {"cutoff": real_to_json(s.cutoff), "next_theta": real_to_json(s.next_theta),
            "terms": len(s.terms), "pass_from_re_t": PASS_FROM, "pass_residual": PASS_RESIDUAL, "rows": rows}
    if args.out:
        _write_csv(args.out / "residuals.csv", ["t", "re_t", "residual", "predicted_bound", "im_t", "log10_residual"],
                   [[_fmt_t(complex(r["re_t"], r["im_t"])), r["re_t"], repr(r["residual"]), repr(r["predicted_bound"]),
                     r["im_t"], repr(r["log10_residual"])] for r in rows])
        from .plotting import residual_plot
        residual_plot(rows, args.out / "residuals.png", f"{inst.name}: series against oracle")
    return body, ok


def cmd_trace_exponents(inst: Instance, args) -> tuple:
    from .spectral import exponent_generators, phase_set, trace_exponents

    spec = inst.boundary
    if spec is None:
        raise MissingBoundarySpectrum("trace-exponents needs a boundary_spectrum generator")
    ell = inst.ell if inst.ell is not None else 0
    cutoff = inst.trace_cutoff
    if args.cutoff is not None:
        cutoff = _cutoff(inst, args.cutoff)
    if cutoff is None:
        cutoff = inst.cutoff
    ex = trace_exponents(spec, ell, cutoff)
    body = {"m": real_to_json(spec.m), "ell": ell, "cutoff": real_to_json(cutoff),
            "phase_set": [real_to_json(w) for w in phase_set(spec)],
            "generators": [real_to_json(g) for g in exponent_generators(spec)],
            "exponents": [{"nu": real_to_json(nu), "nu_over_m": real_to_json(r)} for nu, r in ex]}
    return body, True


HANDLERS = {"decompose": cmd_decompose, "shadow": cmd_shadow, "omega": cmd_omega, "project": cmd_project,
            "verify": cmd_verify, "trace-exponents": cmd_trace_exponents}


class _Abort(Exception):
    def __init__(self, body, code, message):
        super().__init__(message)
        self.body, self.code = body, code


def _fmt_t(t: complex) -> str:
    return f"{t.real:g}{t.imag:+g}j"


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grassflow", description="Subspace flows under e^{t a}: shadows, "
                                "Omega-limits and projection asymptotics.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--instance", required=True, type=Path, help="JSON instance file (schema 1)")
    p.add_argument("--cutoff", default=None, help="series cutoff, e.g. -3 or -5/2")
    p.add_argument("--force", action="store_true", help="project even if transversality is not confirmed")
    p.add_argument("--out", type=Path, default=None, help="directory for report.json, CSV tables and figures")
    return p


def render(command: str, inst: Instance | None, body, passed, runtime: float, error: str | None = None) -> str:
    rep = {"schema": 1, "command": command,
           "instance": {"name": inst.name, "mode": inst.mode, "sha256": inst.digest} if inst else None,
           "passed": passed, "body": body}
    if error:
        rep["error"] = error
    rep["meta"] = {"runtime_seconds": round(runtime, 3), "threads": _threads()}
    return json.dumps(_clean(rep), indent=2)


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    inst = None
    body, passed, code, error = None, False, EXIT_FAIL, None
    try:
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
        inst = load_instance(args.instance)
        with la.use_tolerances(**{k: float(v) for k, v in inst.tolerances.items()}):
            body, passed = HANDLERS[args.command](inst, args)
        code = EXIT_PASS if passed else EXIT_FAIL
    except _Abort as e:
        body, code, error = e.body, e.code, str(e)
    except ValidationError as e:
        code, error = EXIT_INVALID, f"{type(e).__name__}: {e}"
    except (TransversalityError, NotTransversal) as e:
        code, error = EXIT_TRANSVERSALITY, f"{type(e).__name__}: {e}"
    except CutoffUnreachable as e:
        code, error = EXIT_CUTOFF, f"{type(e).__name__}: {e}"
    except GrassflowError as e:
        code, error = EXIT_FAIL, f"{type(e).__name__}: {e}"
    text = render(args.command, inst, body, passed and code == EXIT_PASS, time.perf_counter() - start, error)
    if error:
        print(f"grassflow: {error}", file=stderr)
    print(text, file=stdout)
    if args.out:
        (args.out / "report.json").write_text(text + "\n")
    return code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
