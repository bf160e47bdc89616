"""Command-line front end.

Subcommands: constant, verify, sharpness, lemma, majorize, atlas.  Every
command writes rows with the fixed column set ``COLUMNS`` as CSV (default)
or JSON.  Exit codes: 0 pass, 1 check failed, 2 usage or domain error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
import warnings
from dataclasses import dataclass, field

from . import __version__
from .errors import DomainError, GridError
from .families import Params, claimed_constant, make_instance, parse_family
from .gridconfig import load_grid
from .lemmas import run_lemma
from .majorization import principle_check, section4_margin, section4_vectors
from .reduction import best_constant, documented_budget, randomized_verify, sharpness_probe

COLUMNS = ("family", "p", "q", "r", "s", "alpha", "beta", "m_or_n", "estimate", "claimed", "gap", "margin", "pass")
PARAM_NAMES = ("p", "q", "r", "s", "alpha", "beta")
LEMMAS = ("2.1", "2.2", "2.3", "2.4", "2.5")

DEFAULTS = dict(max_m=10**5, trials=1000, seed=42, slack=1e-9, format="csv")


@dataclass
class Report:
    config: dict
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    passed: bool = True


def _row(family, params=None, **kw):
    row = dict.fromkeys(COLUMNS)
    row["family"] = family
    for k, v in (params or {}).items():
        if k in PARAM_NAMES:
            row[k] = v
    row.update(kw)
    return row


# argument parsing ------------------------------------------------------------------

def _int_like(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v.is_integer():
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(v)


def _seed(text):
    v = _int_like(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _float_list(text):
    if text.strip() == "":
        return []
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common(p: argparse.ArgumentParser, params_as_lists=False):
    ptype = _float_list if params_as_lists else float
    p.add_argument("--family")
    for name in PARAM_NAMES:
        p.add_argument(f"--{name}", type=ptype)
    p.add_argument("--max-m", type=_int_like, default=DEFAULTS["max_m"])
    p.add_argument("--trials", type=_int_like, default=DEFAULTS["trials"])
    p.add_argument("--seed", type=_seed, default=DEFAULTS["seed"])
    p.add_argument("--slack", type=float, default=DEFAULTS["slack"])
    p.add_argument("--grid", default="default")
    p.add_argument("--output")
    p.add_argument("--format", choices=("csv", "json"), default=DEFAULTS["format"])
    p.add_argument("--constant-override", type=float)
    p.add_argument("--workers", type=_int_like, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doubleseries",
        description="Sharp constants and checks for weighted double-series inequalities.",
    )
    parser.add_argument("--version", action="version", version=f"doubleseries {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("constant", help="estimate the best constant by the unit-vector scan")
    _common(c)
    v = sub.add_parser("verify", help="randomized verification with the claimed (or overridden) constant")
    _common(v)
    v.add_argument("--n-max", type=_int_like, default=64, help="longest random support")
    s = sub.add_parser("sharpness", help="U(m) at selected m")
    _common(s)
    s.add_argument("--m", type=_float_list, help="comma list of m (default: powers of 10 up to --max-m)")
    lm = sub.add_parser("lemma", help="lemma grids")
    _common(lm)
    lm.add_argument("--which", default="all", help="2.1 ... 2.5, a comma list, or all")
    mj = sub.add_parser("majorize", help="majorization of the vectors behind thm4.3 / thm4.5")
    _common(mj)
    mj.add_argument("--kind", required=True, choices=("thm4.3", "thm4.5", "thm_4_3", "thm_4_5"))
    mj.add_argument("--n-max", type=_int_like, default=1000)
    at = sub.add_parser("atlas", help="constant estimates over a parameter grid")
    _common(at, params_as_lists=True)
    return parser


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("output", "format")}
    cfg["output_format"] = args.format
    cfg["output_path"] = args.output
    cfg["version"] = __version__
    return cfg


def _params(args) -> Params:
    return Params(**{k: getattr(args, k) for k in PARAM_NAMES})


def _instance(args):
    if not args.family:
        raise DomainError("--family is required")
    return make_instance(parse_family(args.family), _params(args))


def _inst_params(inst) -> dict:
    d = inst.params.asdict()
    d["q"] = inst.q
    return d


# commands ----------------------------------------------------------------------------

def cmd_constant(args) -> Report:
    inst = _instance(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est = best_constant(inst, args.max_m)
    target = args.constant_override if args.constant_override is not None else est.claimed
    if target is None:
        raise DomainError(f"{inst.family.value} has no closed-form constant; pass --constant-override")
    budget = documented_budget(inst)
    if est.selection == "sup":
        margin = target - est.value
        ok = est.value <= target * (1 + args.slack) and est.value >= (1 - budget) * target
    else:
        margin = est.value - target
        ok = est.value >= target * (1 - args.slack) and est.value <= (1 + budget) * target
    gap = (target - est.value) / target
    rep = Report(_config(args), passed=bool(ok))
    rep.rows.append(
        _row(inst.family.value, _inst_params(inst), m_or_n=est.arg, estimate=est.value,
             claimed=target, gap=gap, margin=margin, **{"pass": bool(ok)})
    )
    rep.summary = {
        "instance": inst.label(), "selection": est.selection, "arg_extremum": est.arg,
        "trend": est.trend, "extrapolated": est.extrapolated, "converged": est.converged,
        "budget": budget, "M": est.M, "warnings": [str(w.message) for w in caught],
    }
    return rep


def cmd_verify(args) -> Report:
    inst = _instance(args)
    res = randomized_verify(
        inst, trials=args.trials, seed=args.seed, N_max=args.n_max,
        K=args.constant_override, slack=args.slack, workers=args.workers,
    )
    K = res.config["K"]
    rep = Report(_config(args), passed=res.passed)
    rep.rows.append(
        _row(inst.family.value, _inst_params(inst), m_or_n=res.trials, estimate=res.worst_margin,
             claimed=K, gap=res.violations / res.trials, margin=res.worst_margin,
             **{"pass": res.passed})
    )
    rep.summary = {
        "instance": inst.label(), "violations": res.violations, "trials": res.trials,
        "worst_margin": res.worst_margin, "worst_trial": res.worst_trial,
        "worst_seed": res.worst_seed, "worst_distribution": res.worst_distribution,
        "K": K,
    }
    return rep


def cmd_sharpness(args) -> Report:
    inst = _instance(args)
    if args.m:
        ms = [int(m) for m in args.m]
        if any(m < 1 for m in ms):
            raise DomainError("m values must be >= 1")
    else:
        ms = [10**j for j in range(0, 20) if 10**j <= args.max_m]
    claimed = args.constant_override if args.constant_override is not None else claimed_constant(inst)
    rep = Report(_config(args))
    for m, u in sharpness_probe(inst, ms):
        if inst.direction == "lhs_le_K_rhs":
            margin = claimed - u
            ok = u <= claimed * (1 + args.slack)
        else:
            margin = u - claimed
            ok = u >= claimed * (1 - args.slack)
        rep.passed &= bool(ok)
        rep.rows.append(
            _row(inst.family.value, _inst_params(inst), m_or_n=m, estimate=u, claimed=claimed,
                 gap=(claimed - u) / claimed, margin=margin, **{"pass": bool(ok)})
        )
    rep.summary = {"instance": inst.label(), "m": ms}
    return rep


def _lemma_params(params: dict) -> dict:
    out = {k: params[k] for k in ("p", "r", "s") if k in params}
    if "r1" in params:
        out.update(r=params["r1"], s=params["r2"])
    return out


def cmd_lemma(args) -> Report:
    grid = load_grid(args.grid)
    which = LEMMAS if args.which == "all" else tuple(w.strip() for w in args.which.split(","))
    rep = Report(_config(args))
    counts = {}
    for w in which:
        res = run_lemma(w, grid)
        rep.passed &= res.passed
        counts[w] = {"points": res.points, "failures": len(res.failures()), "passed": res.passed}
        for b in res.blocks:
            prm = _lemma_params(b.params)
            for n, value, bound, margin, ok in b.rows():
                rep.rows.append(
                    _row(b.check, prm, m_or_n=n, estimate=value, claimed=bound, margin=margin,
                         **{"pass": ok})
                )
        for name, info in res.extra.items():
            num = next((v for k, v in info.items() if k != "passed" and isinstance(v, (int, float))), None)
            rep.rows.append(_row(f"lemma{res.lemma}/{name}", estimate=num, **{"pass": bool(info["passed"])}))
            counts[w][name] = info
    rep.summary = {"lemmas": counts, "grid": str(args.grid)}
    return rep


def cmd_majorize(args) -> Report:
    kind = args.kind.replace("_", "").replace("thm4", "thm4.").replace("..", ".")
    key = "thm_4_3" if kind.startswith("thm4.3") else "thm_4_5"
    if key == "thm_4_3":
        a, b, prm = args.alpha, args.beta, {"alpha": args.alpha, "beta": args.beta}
        if a is None or b is None:
            raise DomainError("thm4.3 needs --alpha and --beta")
    else:
        a, b, prm = args.r, args.s, {"r": args.r, "s": args.s}
        if a is None or b is None:
            raise DomainError("thm4.5 needs --r and --s")
    if args.n_max < 1:
        raise DomainError("--n-max must be >= 1")
    tol = 1e-12
    rep = Report(_config(args))
    worst = math.inf
    for n in range(1, args.n_max + 1):
        gap, total = section4_margin(key, a, b, n)
        ok = gap >= -tol and total <= tol
        worst = min(worst, gap)
        rep.passed &= ok
        rep.rows.append(_row(key, prm, m_or_n=n, estimate=gap, gap=total, margin=gap, **{"pass": ok}))
    for n in sorted({min(2, args.n_max), args.n_max}):
        x, y = section4_vectors(key, a, b, n)
        for row in principle_check(x, y).rows:
            rep.passed &= row.passed
            rep.rows.append(
                _row(f"{key}/principle:{row.tag}", prm, m_or_n=n, estimate=row.sum_fx,
                     claimed=row.sum_fy, margin=row.margin, **{"pass": row.passed})
            )
    rep.summary = {"kind": key, "n_max": args.n_max, "worst_prefix_gap": worst}
    return rep


def cmd_atlas(args) -> Report:
    if not args.family:
        raise DomainError("--family is required")
    family = parse_family(args.family)
    axes = [(k, sorted(set(getattr(args, k)))) for k in PARAM_NAMES if getattr(args, k) is not None]
    rep = Report(_config(args))
    skipped = 0
    names = [k for k, _ in axes]
    values = [v for _, v in axes]
    points = list(itertools.product(*values)) if axes and all(values) else []
    for point in points:
        prm = dict(zip(names, point))
        try:
            inst = make_instance(family, Params(**prm))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                est = best_constant(inst, args.max_m)
            if est.claimed is None:
                raise DomainError("no closed-form constant")
        except DomainError as exc:
            skipped += 1
            rep.rows.append(_row(family.value, prm, **{"pass": "skipped"}))
            rep.summary.setdefault("skip_reasons", []).append(str(exc))
            continue
        ok = est.within_budget(documented_budget(inst), args.slack)
        rep.passed &= ok
        margin = est.claimed - est.value if est.selection == "sup" else est.value - est.claimed
        rep.rows.append(
            _row(family.value, _inst_params(inst), m_or_n=est.arg, estimate=est.value,
                 claimed=est.claimed, gap=est.gap, margin=margin, **{"pass": ok})
        )
    rep.summary.update(points=len(points), skipped=skipped, family=family.value)
    return rep


COMMANDS = {
    "constant": cmd_constant,
    "verify": cmd_verify,
    "sharpness": cmd_sharpness,
    "lemma": cmd_lemma,
    "majorize": cmd_majorize,
    "atlas": cmd_atlas,
}


# output ------------------------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def render_csv(rep: Report) -> str:
    lines = [",".join(COLUMNS)]
    lines.extend(",".join(_cell(row[c]) for c in COLUMNS) for row in rep.rows)
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def render_json(rep: Report) -> str:
    doc = {
        "version": __version__,
        "config": rep.config,
        "rows": rep.rows,
        "summary": dict(rep.summary, passed=rep.passed, rows=len(rep.rows)),
    }
    return json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n"


def _write(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rep = COMMANDS[args.command](args)
    except (DomainError, GridError, ValueError, OverflowError) as exc:
        print(f"doubleseries {args.command}: error: {exc}", file=sys.stderr)
        return 2
    if args.format == "json":
        _write(render_json(rep), args.output)
    else:
        _write(render_csv(rep), args.output)
        # CSV has no room for the config, so it is echoed next to it
        echo = json.dumps(_jsonable({"version": __version__, "config": rep.config,
                                     "summary": dict(rep.summary, passed=rep.passed)}),
                          sort_keys=True)
        print(f"# {echo}", file=sys.stderr)
        if args.output:
            _write(echo + "\n", args.output + ".config.json")
    return 0 if rep.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
