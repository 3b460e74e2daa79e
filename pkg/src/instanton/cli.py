"""Batch command line front end.

    instanton <command> [--config PATH] [--seed N] [--budget N] [--tol X]
                        [--out PATH] [--format json|csv] [--timing]

Each command reads an optional JSON scenario, runs one pipeline and writes a
result document {command, inputs, values, errors, pass, tol, seed}.  Exit
codes: 0 pass, 2 tolerance failure, 1 bad input.  The document is a pure
function of (config, seed); wall time is only added with --timing.
"""
import argparse
import csv
import io
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .adhm import AdhmData, check_adhm, k1_data, nondegeneracy_check, random_adhm
from .errors import ConfigInvalid, InstantonError
from .gauge import ClosedFormK1, asd_residual, c2_density, charge, connection, curvature
from .geometry import SubmanifoldSpec
from .invariants import VOL_S3, c2_kernel_mass, delta_family_mass, don1, gauss_link

COMMANDS = ("adhm-check", "charge", "asd-check", "k1-closed-form", "link", "don1", "delta-limits", "euler",
            "reducible-check", "vanish")

DEFAULT_TOL = {"adhm-check": 1e-10, "charge": 1e-3, "asd-check": 1e-6, "k1-closed-form": 1e-10, "link": 1e-3,
               "don1": 0.1, "delta-limits": 1e-2, "euler": 1e-10, "reducible-check": 2e-2, "vanish": 0.0}


@dataclass
class ScenarioConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    quadrature: dict = field(default_factory=dict)
    seed: int = 0
    tol: float = None
    out: str = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigInvalid("unknown command %r" % self.command)
        if not isinstance(self.inputs, dict) or not isinstance(self.quadrature, dict):
            raise ConfigInvalid("inputs and quadrature must be objects")
        if self.tol is None:
            self.tol = DEFAULT_TOL[self.command]

    def to_json(self):
        return {"command": self.command, "inputs": self.inputs, "quadrature": self.quadrature, "seed": self.seed,
                "tol": self.tol, "out": self.out}

    @classmethod
    def from_json(cls, obj):
        if not isinstance(obj, dict) or "command" not in obj:
            raise ConfigInvalid("config must be an object with a command")
        unknown = set(obj) - {"command", "inputs", "quadrature", "seed", "tol", "out"}
        if unknown:
            raise ConfigInvalid("unknown config keys %s" % sorted(unknown))
        return cls(obj["command"], dict(obj.get("inputs") or {}), dict(obj.get("quadrature") or {}),
                   int(obj.get("seed", 0)), obj.get("tol"), obj.get("out"))

    def dumps(self):
        return jsonio.dumps(self.to_json())

    @classmethod
    def loads(cls, text):
        return cls.from_json(jsonio.loads(text))


# ------------------------------------------------------------- input helpers

def _adhm_input(inp, seed, default_k=1):
    if "adhm" in inp:
        return AdhmData.from_json(inp["adhm"])
    if "T" in inp and "rho" in inp:
        return k1_data(np.asarray(inp["T"], dtype=float), float(inp["rho"]), inp.get("direction"))
    return random_adhm(int(inp.get("k", default_k)), seed=int(inp.get("seed", seed)), form=inp.get("form", "real"))


def _specs_input(inp):
    specs = inp.get("submanifolds")
    if not specs:
        raise ConfigInvalid("inputs.submanifolds is required")
    try:
        return [SubmanifoldSpec.from_json(s) for s in specs]
    except (KeyError, TypeError) as exc:
        raise ConfigInvalid("bad submanifold: %s" % exc)


def _range(text):
    """'2..5' or [2, 3] or 4."""
    if isinstance(text, str) and ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(text)]


# ------------------------------------------------------------- pipelines

def _adhm_check(cfg, budget):
    d = _adhm_input(cfg.inputs, cfg.seed)
    ok, worst = check_adhm(d, tol=cfg.tol)
    verdict = nondegeneracy_check(d, seed=cfg.seed)
    values = {"moment_residual": worst, "nondegenerate": verdict.nondegenerate, "margin": verdict.margin}
    return values, {}, bool(ok and verdict.nondegenerate), None


def _charge(cfg, budget):
    d = _adhm_input(cfg.inputs, cfg.seed)
    val, err = charge(d)
    series = None
    if d.k == 1:
        T = d.T.data[0, 0].real if d.form == "complex" else d.T.data[0, 0]
        rho = float(np.linalg.norm(d.P.data))
        r = np.linspace(0, 5 * rho, 26)[1:]
        pts = T + r[:, None] * np.array([1.0, 0, 0, 0])
        num = c2_density(d, pts)
        ref = 6 * rho ** 4 / (np.pi ** 2 * (r ** 2 + rho ** 2) ** 4)
        series = {"columns": ["r", "c2_density", "closed_form"], "rows": [list(t) for t in zip(r, num, ref)]}
    return {"charge": val, "k": d.k}, {"charge": err}, abs(val - d.k) <= cfg.tol, series


def _asd_check(cfg, budget):
    d = _adhm_input(cfg.inputs, cfg.seed)
    n = int(cfg.inputs.get("n_points", 20))
    rng = np.random.default_rng(cfg.seed)
    centre = np.real(np.diagonal(d.T.data, axis1=0, axis2=1).T.mean(axis=0))
    pts = centre + rng.normal(size=(n, 4)) * 1.5
    ana = float(np.max(asd_residual(curvature(d, pts))))
    fd = float(np.max(asd_residual(curvature(d, pts, mode="fd"))))
    fd_tol = float(cfg.inputs.get("fd_tol", 1e-4))
    return {"analytic_residual": ana, "fd_residual": fd}, {}, ana <= cfg.tol and fd <= fd_tol, None


def _k1_closed_form(cfg, budget):
    inp = cfg.inputs
    rng = np.random.default_rng(cfg.seed)
    T = np.asarray(inp.get("T", rng.normal(size=4)), dtype=float)
    rho = float(inp.get("rho", 1.0))
    u = np.asarray(inp.get("direction", rng.normal(size=4)), dtype=float)
    d = k1_data(T, rho, u)
    cf = ClosedFormK1(d.T.data[0, 0], d.P.data[0, 0])
    pts = T + rng.normal(size=(int(inp.get("n_points", 100)), 4)) * 2 * rho

    def rel(a, b):
        return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))

    diffs = {"connection": rel(connection(d, pts), cf.connection(pts)),
             "curvature": rel(curvature(d, pts), cf.curvature(pts)),
             "c2": rel(c2_density(d, pts), cf.c2(pts))}
    return diffs, {}, max(diffs.values()) <= cfg.tol, None


def _link(cfg, budget):
    a, b = _specs_input(cfg.inputs)
    res = gauss_link(a, b, order=cfg.quadrature.get("order"))
    target = cfg.inputs.get("expected", res.nearest_integer)
    return {"link": res.value, "nearest_integer": res.nearest_integer}, {"link": res.error}, \
        abs(res.value - target) <= cfg.tol, None


def _don1(cfg, budget):
    specs = _specs_input(cfg.inputs)
    n = int(budget or cfg.quadrature.get("n_samples", 1_000_000))
    eps = tuple(cfg.quadrature.get("eps", (0.2, 0.1, 0.05)))
    res = don1(specs, eps=eps, n_samples=n, seed=cfg.seed)
    expected = cfg.inputs.get("expected")
    if expected is None:
        ok = True
    elif expected == 0:
        ok = abs(res.value) <= 3 * res.error
    else:
        ok = abs(res.value / expected - 1) <= cfg.tol
    series = {"columns": ["eps", "value", "error"],
              "rows": [[e, v, s] for e, v, s in zip(res.eps, res.by_eps, res.by_eps_error)]}
    return {"don1": res.value, "by_eps": list(res.by_eps), "n_samples": n}, {"don1": res.error}, ok, series


def _gaussian(y):
    return np.exp(-np.sum(y ** 2, axis=1))


def _delta_limits(cfg, budget):
    rhos = cfg.inputs.get("rhos", [0.1, 0.03, 0.01])
    scale = np.pi ** 2 / 6
    rows, ok = [], True
    for rho in rhos:
        m4, _ = delta_family_mass(4, rho, _gaussian)
        m3, _ = delta_family_mass(3, rho, _gaussian)
        m2, _ = delta_family_mass(2, rho, _gaussian)
        kern, _ = c2_kernel_mass(rho, _gaussian)
        rows.append([rho, m4 / scale, m3 / scale, m2 / scale, kern])
    last = rows[-1]
    ok = abs(last[1] - 1) <= cfg.tol and last[2] <= cfg.tol and last[3] <= cfg.tol and abs(last[4] - 1) <= cfg.tol
    series = {"columns": ["rho", "n4_ratio", "n3_ratio", "n2_ratio", "c2_kernel_mass"], "rows": rows}
    values = {"rho": last[0], "n4_ratio": last[1], "n3_ratio": last[2], "n2_ratio": last[3],
              "c2_kernel_mass": last[4], "half_vol_s3": VOL_S3 / 2}
    return values, {}, ok, series


def _euler(cfg, budget):
    from .equivariant import euler_class
    rows, ok = [], True
    for k in _range(cfg.inputs.get("k", "1..4")):
        for j in range(1, k + 1):
            r = euler_class(k, j)
            dev = abs(r.coefficient * (2 * np.pi) ** (4 * k) - 1)
            ok &= r.exponent == 4 * k and dev <= cfg.tol
            rows.append([k, j, r.exponent, r.coefficient, dev])
    series = {"columns": ["k", "j", "exponent", "coefficient", "relative_deviation"], "rows": rows}
    return {"max_relative_deviation": max(r[4] for r in rows)}, {}, bool(ok), series


def _reducible_check(cfg, budget):
    from .equivariant import reducible_restriction_check, split_data
    inp = cfg.inputs
    T0 = np.asarray(inp.get("T0", [0.0, 0, 0, 0]), dtype=float)
    T1 = np.asarray(inp.get("T1", [3.0, 0, 0, 0]), dtype=float)
    P1 = np.asarray(inp.get("P1", [0.7, 0, 0, 0]), dtype=float)
    sig = inp.get("sigma", {"kind": "sphere3", "radius": 1.0, "offset": list(T0)})
    sigma = SubmanifoldSpec.from_json(sig) if sig else None
    rhos = tuple(inp.get("rhos", (0.2, 0.1, 0.05, 0.025)))
    rep = reducible_restriction_check(split_data(T0, T1, P1), sigma=sigma, rhos=rhos)
    ok = rep.far_rate >= 3.5 and abs(rep.excess_mass[-1] - 1) <= cfg.tol and rep.monotone
    if rep.mu_excess:
        ok = ok and abs(rep.mu_excess[-1] - 1) <= cfg.tol
    rows = [[r, dv, m] + ([mu] if rep.mu_excess else []) for r, dv, m, mu in
            zip(rep.rhos, rep.far_deviation, rep.excess_mass, rep.mu_excess or [None] * len(rhos))]
    cols = ["rho", "far_deviation", "excess_mass"] + (["mu_excess"] if rep.mu_excess else [])
    return rep.to_json(), {}, bool(ok), {"columns": cols, "rows": rows}


def _vanish(cfg, budget):
    from .vanishing import verify_vanishing
    ks = _range(cfg.inputs.get("k", "2..5"))
    lmax = int(cfg.inputs.get("lmax", 12))
    rep = verify_vanishing(ks, lmax, relaxed=bool(cfg.inputs.get("relaxed", False)))
    rows = [[r.k, r.l, r.budget, r.n_dimension_vectors, len(r.contributing), int(r.identity_ok)]
            for r in rep.rows if r.contributing]
    series = {"columns": ["k", "l", "budget", "n_dimension_vectors", "n_contributing", "identity_ok"], "rows": rows}
    values = {"all_empty_k_ge_2": rep.all_empty, "identity_ok": rep.identity_ok,
              "nonempty": [[r.k, r.l, [list(c) for c in r.contributing]] for r in rep.rows if r.contributing]}
    return values, {}, rep.all_empty and rep.identity_ok, series


PIPELINES = {"adhm-check": _adhm_check, "charge": _charge, "asd-check": _asd_check,
             "k1-closed-form": _k1_closed_form, "link": _link, "don1": _don1, "delta-limits": _delta_limits,
             "euler": _euler, "reducible-check": _reducible_check, "vanish": _vanish}


def run(cfg, budget=None, timing=False):
    """Execute a scenario; returns (exit_code, document)."""
    t0 = time.perf_counter()
    doc = {"command": cfg.command, "inputs": cfg.inputs, "seed": cfg.seed, "tol": cfg.tol}
    try:
        values, errors, ok, series = PIPELINES[cfg.command](cfg, budget)
    except (ConfigInvalid, KeyError, TypeError, ValueError) as exc:
        doc.update({"status": "input-error", "diagnostic": "%s: %s" % (type(exc).__name__, exc)})
        return 1, doc
    except InstantonError as exc:
        doc.update({"status": "error", "diagnostic": "%s: %s" % (type(exc).__name__, exc)})
        return 1, doc
    doc.update({"values": values, "errors": errors, "pass": bool(ok), "status": "ok"})
    if series is not None:
        doc["series"] = series
    if timing:
        doc["wall_time"] = time.perf_counter() - t0
    return (0 if ok else 2), doc


def emit_plotdata(doc):
    """CSV text of the document's series (header only when there are no rows)."""
    series = doc.get("series") or {"columns": [], "rows": []}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if series["columns"]:
        w.writerow(series["columns"])
    for row in series["rows"]:
        w.writerow(["%.17g" % v if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def build_parser():
    ap = argparse.ArgumentParser(prog="instanton", description="Instanton moduli verification pipelines.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON scenario file")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--budget", type=int, help="sample budget for Monte Carlo commands")
    ap.add_argument("--tol", type=float)
    ap.add_argument("--out", help="write the result here instead of stdout")
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    ap.add_argument("--timing", action="store_true", help="add wall time to the document")
    ap.add_argument("--k", help="k or range a..b (euler, vanish)")
    ap.add_argument("--lmax", type=int, help="largest l for vanish")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            with open(args.config) as fh:
                cfg = ScenarioConfig.loads(fh.read())
            if cfg.command != args.command:
                raise ConfigInvalid("config is for %r, not %r" % (cfg.command, args.command))
        else:
            cfg = ScenarioConfig(args.command)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.tol is not None:
            cfg.tol = args.tol
        if args.k is not None:
            cfg.inputs["k"] = args.k
        if args.lmax is not None:
            cfg.inputs["lmax"] = args.lmax
    except (OSError, ValueError, ConfigInvalid) as exc:
        print("instanton: %s" % exc, file=sys.stderr)
        return 1
    code, doc = run(cfg, budget=args.budget, timing=args.timing)
    text = emit_plotdata(doc) if args.format == "csv" else jsonio.dumps(doc) + "\n"
    out = args.out or cfg.out
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if code == 1:
        print("instanton: %s" % doc.get("diagnostic"), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
