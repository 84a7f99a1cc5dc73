"""Command-line front end.

    ptcf COMMAND --config run.json [--output out] [--seed N] [--threads N]

A run is described by one JSON file with the blocks ``potential``,
``model``, ``caps`` and ``instance``; which blocks a command needs is
listed in ``REQUIRED``.  Unknown keys are rejected.  Exit codes: 0 ok,
2 invalid config or input, 3 resource cap hit, 4 a verification failed,
1 anything else.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from itertools import product

import jsonschema
import numpy as np

from . import __version__
from .errors import DomainError, ResourceCapError, StructuralError

NUM = {"type": "number"}
POS = {"type": "number", "exclusiveMinimum": 0}
INT0 = {"type": "integer", "minimum": 0}
INT1 = {"type": "integer", "minimum": 1}
POINT = {"oneOf": [NUM, {"type": "array", "items": NUM, "minItems": 1}]}
CLUSTER = {"type": "array", "items": POINT}
CLUSTERS = {"type": "array", "items": CLUSTER, "minItems": 1}
SIZES = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


POTENTIALS = {
    "hard_sphere": _obj({"kind": {}, "diameter": {"type": "number", "minimum": 0}, "d": INT1, "B": NUM}),
    "lennard_jones": _obj({"kind": {}, "phi0": POS, "r0": POS, "d": INT1, "B": NUM}, ["B"]),
    "hard_core_power_tail": _obj({"kind": {}, "r1": POS, "r0": POS, "r2": POS, "phi1": POS, "phi2": NUM,
                                  "s": POS, "eps0": POS, "d": INT1, "B": NUM}),
    "custom": _obj({"kind": {}, "csv": {"type": "string"}, "hard_core": NUM, "d": INT1, "B": NUM}, ["csv"]),
}

BOX = {"oneOf": [
    {"type": "array", "items": NUM, "minItems": 2, "maxItems": 2},
    _obj({"lower": {"type": "array", "items": NUM}, "upper": {"type": "array", "items": NUM}}, ["lower", "upper"]),
]}

CAPS_DEFAULTS = {
    "n_max": 3, "vertex_cap": 10, "tree_cap": 7, "ursell_cap": 7, "quad_order": 3,
    "max_piece": 0.5, "mc_samples": 20000, "seed": 0,
}

SCHEMA = _obj({
    "potential": {"type": "object", "properties": {"kind": {"enum": sorted(POTENTIALS)}}, "required": ["kind"]},
    "model": _obj({"beta": POS, "z": POS, "box": BOX}),
    "caps": _obj({
        "n_max": INT0, "vertex_cap": INT0, "tree_cap": INT0, "ursell_cap": INT0,
        "quad_order": {"type": "integer", "minimum": 1}, "max_piece": POS,
        "mc_samples": {"type": "integer", "minimum": 16}, "seed": INT0,
    }),
    "instance": {"type": "object"},
})

INSTANCES = {
    "enumerate-forests": _obj({"sizes": SIZES, "n": INT0, "clusters": CLUSTERS,
                               "gamma": CLUSTER, "h": POS}),
    "count-forests": _obj({"m_max": INT0, "l_max": INT0, "n_max": INT0,
                           "cases": {"type": "array", "items": _obj({"sizes": SIZES, "n": INT0}, ["sizes", "n"])}}),
    "verify-identities": _obj({"n_max": INT0, "l_max": INT0, "m_max": INT0, "cayley_max": INT0,
                               "random_cases": INT0}),
    "eval-kernel": _obj({"kernel": {"enum": ["T", "Q"]}, "clusters": CLUSTERS, "gamma": CLUSTER,
                         "h": POS}, ["kernel", "clusters"]),
    "compute-ptcf": _obj({"clusters": CLUSTERS, "route": {"enum": ["forest_series", "mobius", "both"]}},
                         ["clusters"]),
    "compute-bounds": _obj({"sizes": SIZES, "alpha": POS, "h": POS, "nu1": POS, "nubar1": POS, "C": POS,
                            "nu0": NUM}, ["sizes", "alpha"]),
    "check-decay": _obj({"clusters": CLUSTERS, "separations": {"type": "array", "items": POS, "minItems": 1},
                         "alpha": POS}, ["clusters", "separations", "alpha"]),
    "resum-check": _obj({"cases": INT0, "tolerance": POS}),
}

REQUIRED = {
    "enumerate-forests": (), "count-forests": (), "verify-identities": (),
    "eval-kernel": ("potential", "model"), "compute-ptcf": ("potential", "model"),
    "compute-bounds": (), "check-decay": ("potential", "model"), "resum-check": ("model",),
}


# ------------------------------------------------------------------ config

def _path(err):
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def _validate(instance, schema, prefix=""):
    errors = sorted(jsonschema.Draft7Validator(schema).iter_errors(instance), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        where = prefix + _path(err) if err.absolute_path else (prefix.rstrip(".") or "<root>")
        raise DomainError(f"config error at {where}: {err.message}")


def resolve_config(raw, command):
    _validate(raw, SCHEMA)
    cfg = copy.deepcopy(raw)
    if "potential" in cfg:
        _validate(cfg["potential"], POTENTIALS[cfg["potential"]["kind"]], "potential.")
    _validate(cfg.get("instance", {}), INSTANCES[command], "instance.")
    for block in REQUIRED[command]:
        if block not in cfg:
            raise DomainError(f"config error: command {command} needs a '{block}' block")
    cfg["caps"] = {**CAPS_DEFAULTS, **cfg.get("caps", {})}
    cfg.setdefault("instance", {})
    if "model" in cfg:
        cfg["model"] = {"beta": 1.0, "box": [-2.0, 2.0], **cfg["model"]}
    return cfg


def build_potential(block):
    from .potentials import Custom, HardCorePowerTail, HardSphere, LennardJones

    p = {k: v for k, v in block.items() if k not in ("kind", "B")}
    kind = block["kind"]
    if kind == "hard_sphere":
        return HardSphere(**p)
    if kind == "lennard_jones":
        return LennardJones(**p)
    if kind == "hard_core_power_tail":
        return HardCorePowerTail(**p)
    return Custom.from_csv(p["csv"], hard_core=p.get("hard_core", 0.0), d=p.get("d", 1), B=block.get("B"))


def build_box(box):
    from .quadrature import VolumeCutoff

    if isinstance(box, list):
        return VolumeCutoff.interval(*box)
    return VolumeCutoff(tuple(box["lower"]), tuple(box["upper"]))


def build_spec(cfg, z=None):
    from .correlations import SeriesSpec
    from .quadrature import QuadratureSpec

    caps, model = cfg["caps"], cfg["model"]
    if z is None and "z" not in model:
        raise DomainError("config error at model.z: activity is required")
    quad = QuadratureSpec(order=caps["quad_order"], max_piece=caps["max_piece"],
                          mc_samples=caps["mc_samples"], seed=caps["seed"])
    return SeriesSpec(build_potential(cfg["potential"]), model["beta"], z or model["z"],
                      build_box(model["box"]), caps["n_max"], cfg["potential"].get("B"), quad)


def _family(clusters, d=None):
    from .configurations import ClusterFamily, PointConfiguration

    return ClusterFamily([PointConfiguration([np.atleast_1d(p) for p in c], d) for c in clusters])


# ------------------------------------------------------------------ output

def real(x) -> str:
    return "%.16e" % x


def _header(cfg, command):
    return {"artifact": "ptcf", "version": __version__, "command": command, "config": cfg}


def _csv(cfg, command, header, rows):
    buf = io.StringIO()
    buf.write("# " + json.dumps(_header(cfg, command), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([real(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _json(cfg, command, body):
    return json.dumps({"header": _header(cfg, command), **body}, sort_keys=True, indent=1) + "\n"


# ------------------------------------------------------------------ commands

def cmd_enumerate_forests(cfg):
    from .configurations import PointConfiguration
    from .forests import enumerate_forests

    inst, cap = cfg["instance"], cfg["caps"]["vertex_cap"]
    if "clusters" in inst:
        fam = _family(inst["clusters"])
        target = (fam, PointConfiguration([np.atleast_1d(p) for p in inst.get("gamma", [])], fam.d))
    else:
        target = (tuple(inst.get("sizes", [1, 1])), inst.get("n", 0))
    lines = [json.dumps({"header": _header(cfg, "enumerate-forests")}, sort_keys=True)]
    for f in enumerate_forests(*target, cap=cap):
        lines.append(json.dumps(f.to_json(), sort_keys=True))
    return "\n".join(lines) + "\n"


def _count_cases(inst):
    if "cases" in inst:
        return [(tuple(c["sizes"]), c["n"]) for c in inst["cases"]]
    out = []
    for m in range(1, inst.get("m_max", 3) + 1):
        for sizes in product(range(1, inst.get("l_max", 2) + 1), repeat=m):
            for n in range(inst.get("n_max", 2) + 1):
                out.append((sizes, n))
    return out


def cmd_count_forests(cfg):
    from .combinatorics import forest_count_formula
    from .forests import count_forests

    rows, bad = [], 0
    for sizes, n in _count_cases(cfg["instance"]):
        got = count_forests(sizes, n, cap=cfg["caps"]["vertex_cap"])
        want = forest_count_formula(sizes, n)
        bad += got != want
        rows.append((len(sizes), ",".join(map(str, sizes)), n, got, want))
    out = _csv(cfg, "count-forests", ["m", "l", "n", "enumerated", "formula"], rows)
    return out, bad == 0


def cmd_verify_identities(cfg):
    from . import combinatorics as cb

    inst = cfg["instance"]
    n_max, l_max = inst.get("n_max", 4), inst.get("l_max", 3)
    m_max, cay = inst.get("m_max", 4), inst.get("cayley_max", 6)
    rng = np.random.default_rng(cfg["caps"]["seed"])
    rows = []

    def add(name, params, lhs, rhs):
        rows.append((name, params, str(lhs), str(rhs), "true" if lhs == rhs else "false"))

    for n in range(1, cay + 1):
        add("cayley", f"n={n}", sum(1 for _ in cb.labeled_trees(n)), cb.cayley_count(n))
    for n in range(n_max + 1):
        for l in range(1, l_max + 1):
            add("remarkable", f"n={n};l={l}", *cb.remarkable_identity_check(n, l))
            if l + n - 1:
                add("auxiliary_sum", f"n={n};l={l}", *cb.auxiliary_sum_identity(n, l))
    for m in range(1, m_max + 1):
        for sizes in product(range(1, l_max + 1), repeat=m):
            for n in range(n_max + 1):
                p = f"l={','.join(map(str, sizes))};n={n}"
                add("recursion_vs_formula", p, cb.forest_count_recursion(sizes, n), cb.forest_count_formula(sizes, n))
                if m >= 2 and sum(sizes) + n > 1:
                    (M, closed) = cb.m_sums(sizes, n)
                    add("m_sums", p, tuple(M), tuple(closed))
    for _ in range(inst.get("random_cases", 20)):
        m = int(rng.integers(2, 8))
        sizes = tuple(int(x) for x in rng.integers(1, 5, size=m))
        sigma = int(rng.integers(2, m + 1))
        add("partition", f"l={','.join(map(str, sizes))};sigma={sigma}", *cb.partition_identity_check(sizes, sigma))
    out = _csv(cfg, "verify-identities", ["identity", "params", "lhs", "rhs", "ok"], rows)
    return out, all(r[-1] == "true" for r in rows)


def cmd_eval_kernel(cfg):
    from .configurations import PointConfiguration
    from .kernels import kernel_Q, kernel_T
    from .potentials import MayerKernel

    inst, model = cfg["instance"], cfg["model"]
    pot = build_potential(cfg["potential"])
    fam = _family(inst["clusters"], pot.d)
    gamma = PointConfiguration([np.atleast_1d(p) for p in inst.get("gamma", [])], pot.d)
    V = fam.l + len(gamma)
    if V > cfg["caps"]["vertex_cap"]:
        raise ResourceCapError(f"caps.vertex_cap: {V} vertices exceed {cfg['caps']['vertex_cap']}")
    B = cfg["potential"].get("B", None)
    B = pot.default_stability() if B is None else B
    if inst["kernel"] == "T":
        if "z" not in model:
            raise DomainError("config error at model.z: activity is required")
        res = kernel_T(fam, gamma, pot, model["beta"], model["z"], B, detail=True)
    else:
        h = inst.get("h") or model["z"] * math.exp(2 * model["beta"] * B)
        res = kernel_Q(fam, gamma, h, MayerKernel(pot, model["beta"]), detail=True)
    # the recursion is exact; only floating-point rounding remains
    err = abs(res.value) * 1e-15 * max(res.terms, 1)
    return _json(cfg, "eval-kernel", {"value": res.value, "error_estimate": err, "terms": res.terms}), True


def cmd_compute_ptcf(cfg):
    from .correlations import ptcf_forest_series, ptcf_mobius

    spec = build_spec(cfg)
    fam = _family(cfg["instance"]["clusters"], spec.pot.d)
    route = cfg["instance"].get("route", "forest_series")
    runs = {"forest_series": [ptcf_forest_series], "mobius": [ptcf_mobius],
            "both": [ptcf_forest_series, ptcf_mobius]}[route]
    results = [f(fam, spec) for f in runs]
    body = {
        "value": results[0].value,
        "error": results[0].error,
        "route": results[0].route,
        "convergence_flags": list(results[0].flags),
        "coefficients": list(results[0].coefficients),
        "margin": spec.constants["margin"],
    }
    ok = True
    if len(results) == 2:
        diff = abs(results[0].value - results[1].value)
        body["other"] = {"route": results[1].route, "value": results[1].value, "error": results[1].error}
        body["route_difference"] = diff
        ok = diff <= results[0].error + results[1].error
    return _json(cfg, "compute-ptcf", body), ok


def _bound_params(cfg):
    from .potentials import compute_summary, polydecay_integral

    inst = cfg["instance"]
    alpha = inst["alpha"]
    if all(k in inst for k in ("h", "nu1", "C")):
        d = cfg.get("potential", {}).get("d", 1)
        nubar1 = inst.get("nubar1") or polydecay_integral(alpha, d)[0]
        return inst["h"], inst["nu1"], nubar1, inst["C"], inst.get("nu0", 1.0)
    if "potential" not in cfg or "z" not in cfg.get("model", {}):
        raise DomainError("config error at instance: give h, nu1, C or a potential block with model.z")
    pot = build_potential(cfg["potential"])
    beta = cfg["model"]["beta"]
    S = compute_summary(pot, beta, B=cfg["potential"].get("B"), alpha=alpha)
    h = cfg["model"]["z"] * math.exp(2 * beta * S.stability_B)
    return h, S.nu1, polydecay_integral(alpha, pot.d)[0], S.polydecay[0], S.nu0


def cmd_compute_bounds(cfg):
    from .bounds import BoundParams, decay_condition_margin, decay_constant_A
    from .errors import DivergenceError

    inst = cfg["instance"]
    h, nu1, nubar1, C, nu0 = _bound_params(cfg)
    sizes = tuple(inst["sizes"])
    rows = []
    for s in range(1, len(sizes) + 1):
        p = BoundParams(h, nu1, nubar1, C, inst["alpha"], sizes, s, nu0)
        try:
            A = decay_constant_A(p)
        except DivergenceError:
            A = math.inf
        rows.append((len(sizes), s, p.digest(), float(A), float(decay_condition_margin(p))))
    return _csv(cfg, "compute-bounds", ["m", "sigma", "params_hash", "A_value", "condition_margin"], rows), True


def cmd_check_decay(cfg):
    from .bounds import decay_bound_check
    from .potentials import compute_summary

    inst = cfg["instance"]
    spec = build_spec(cfg)
    S = compute_summary(spec.pot, spec.beta, B=spec.B, alpha=inst["alpha"])
    rows, ok = [], True
    for sep in inst["separations"]:
        shifted = []
        for i, c in enumerate(inst["clusters"]):
            pts = [np.atleast_1d(np.asarray(p, dtype=float)).copy() for p in c]
            for p in pts:
                p[0] += i * sep
            shifted.append(pts)
        rep = decay_bound_check(_family(shifted, spec.pot.d), spec.z, spec.beta, spec.pot, spec,
                             inst["alpha"], summary=S)
        if rep["condition_failed"]:
            rows.append((float(sep), abs(rep["ptcf"]), "nan", "condition_failed"))
            continue
        ok &= bool(rep["ok"])
        rows.append((float(sep), abs(rep["ptcf"]), float(rep["bound"]), "true" if rep["ok"] else "false"))
    return _csv(cfg, "check-decay", ["separation", "abs_ptcf", "bound", "ok"], rows), ok


def cmd_resum_check(cfg):
    from .correlations import SeriesSpec, resummation_check
    from .potentials import HardSphere
    from .quadrature import QuadratureSpec

    inst, caps = cfg["instance"], cfg["caps"]
    box = build_box(cfg["model"]["box"])
    quad = QuadratureSpec(order=caps["quad_order"], max_piece=caps["max_piece"], seed=caps["seed"])
    spec = SeriesSpec(HardSphere(0.0, box.d), cfg["model"]["beta"], cfg["model"].get("z", 0.5), box,
                      min(caps["n_max"], 3), None, quad)
    tol = inst.get("tolerance", 1e-10)
    rng = np.random.default_rng(caps["seed"])
    rows, ok = [], True
    for case in range(inst.get("cases", 3)):
        F, H = random_polynomials(rng, box.d)
        lhs, rhs, _ = resummation_check(F, H, spec)
        good = abs(lhs - rhs) <= tol * max(1.0, abs(lhs))
        ok &= good
        rows.append((case, float(lhs), float(rhs), float(abs(lhs - rhs)), "true" if good else "false"))
    return _csv(cfg, "resum-check", ["case", "lhs", "rhs", "abs_diff", "ok"], rows), ok


def random_polynomials(rng, d=1, degree=2):
    """Symmetric polynomial test functions F(n, y) and H(y_a, y_b)."""
    a = rng.normal(size=(5, degree + 1))
    b = rng.normal(size=(5, 5))

    def s(y, coef):
        # a symmetric sum of a 1-d polynomial over the points
        return np.polynomial.polynomial.polyval(y[..., 0], coef).sum(axis=1)

    def F(n, y):
        return a[min(n, 4), 0] + s(y, a[min(n, 4)]) ** 2 if n else np.full(y.shape[0], a[0, 0])

    def H(ya, yb):
        na, nb = ya.shape[1], yb.shape[1]
        return b[min(na, 4), min(nb, 4)] * (1.0 + s(ya, a[0]) * s(yb, a[1]))

    return F, H


COMMANDS = {
    "enumerate-forests": cmd_enumerate_forests,
    "count-forests": cmd_count_forests,
    "verify-identities": cmd_verify_identities,
    "eval-kernel": cmd_eval_kernel,
    "compute-ptcf": cmd_compute_ptcf,
    "compute-bounds": cmd_compute_bounds,
    "check-decay": cmd_check_decay,
    "resum-check": cmd_resum_check,
}


def parser():
    p = argparse.ArgumentParser(prog="ptcf", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run file (default: empty config)")
    p.add_argument("--output", help="output file (default: stdout)")
    p.add_argument("--seed", type=int, help="overrides caps.seed")
    p.add_argument("--threads", type=int, default=1, help="thread cap; computations run serially")
    p.add_argument("--z", type=float, help="overrides model.z")
    p.add_argument("--beta", type=float, help="overrides model.beta")
    p.add_argument("--n-max", type=int, help="overrides caps.n_max")
    p.add_argument("--version", action="version", version=__version__)
    return p


def run(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        raw = {}
        if args.config:
            with open(args.config) as fh:
                raw = json.load(fh)
        if args.threads < 1:
            raise DomainError("--threads must be >= 1")
        if args.seed is not None:
            raw.setdefault("caps", {})["seed"] = args.seed
        if args.n_max is not None:
            raw.setdefault("caps", {})["n_max"] = args.n_max
        for key in ("z", "beta"):
            if getattr(args, key) is not None:
                raw.setdefault("model", {})[key] = getattr(args, key)
        cfg = resolve_config(raw, args.command)
        result = COMMANDS[args.command](cfg)
        text, ok = result if isinstance(result, tuple) else (result, True)
    except (json.JSONDecodeError, OSError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 3
    except (DomainError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # numeric failures
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not ok:
        print("verification failed", file=sys.stderr)
        return 4
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
