"""Command-line front end.

Exit codes: 0 success, 1 a domain check failed, 2 bad input or config.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import constituents as cons
from .composition import isometry_defect, load_decomposition, normalize_composite
from .errors import ConstraintViolation, DeflationError, HymeraError, SolverError
from .experiments import ExperimentConfig, envelope_shift, run_trials, summarize, write_outputs
from .perfect import ame43, load_tensor, perfect_check, push_operator, tensor_to_dict
from .superop import available_cones, kac_table, model_table
from .tensor import Tensor
from .tiling import BoundaryWord, deflate, inflate, load_grammar, scale_factor

log = logging.getLogger("hymera")

# constraint classes each family must meet; "scaled" means up to the constant c
REQUIRED = {
    "Y": ("vertical", "horizontal"),
    "R": ("vertical", "horizontal"),
    "Q": ("vertical",),
    "T": ("vertical", "horizontal", "scaled"),
    "S": ("vertical", "horizontal", "scaled"),
}

DOMAIN_ERRORS = (ConstraintViolation, SolverError)


class UsageError(Exception):
    pass


def _emit(args, name: str, text: str) -> None:
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


def _need_seed(args):
    if args.seed is None:
        raise UsageError(f"--seed is required for '{args.verb}'")
    return args.seed


def _parse_theta(text: str) -> cons.ParameterSet:
    """``"1=0.3,3=1.2"`` or a JSON object ``{"1": 0.3}``."""
    text = text.strip()
    if text.startswith("{"):
        d = json.loads(text)
    else:
        d = dict(item.split("=", 1) for item in text.split(",") if item)
    return cons.ParameterSet({int(k): float(v) for k, v in d.items()})


# ---------------------------------------------------------------------------
# verbs


def cmd_verify(args) -> int:
    dec = load_decomposition(args.decomposition)
    if args.params:
        params = _parse_theta(args.params)
    else:
        rng = np.random.Generator(np.random.Philox(key=_need_seed(args)))
        params = cons.ParameterSet.sample(rng, dec.parameter_indices)
    dec = dec.with_params(params)
    overrides = {}
    for item in args.override or []:
        fam, _, path = item.partition("=")
        if fam not in dec.families or not path:
            raise UsageError(f"--override expects FAMILY=file with FAMILY in {dec.families}, got {item!r}")
        t = load_tensor(path)
        overrides[fam] = t.relabel(dict(zip(t.legs, cons.FAMILY_LEGS[fam])))

    tol = args.tol if args.tol is not None else 1e-10
    report = {"decomposition": dec.name, "theta": {str(k): v for k, v in sorted(params.theta.items())},
              "tol": tol, "tensors": {}, "composites": {}}
    ok = True
    raw = {f: overrides[f] if f in overrides else cons.build(f, params) for f in dec.families}
    parts = {}
    for fam, t in raw.items():
        r = cons.classify(t, tol)
        checks = {}
        for need in REQUIRED[fam]:
            if need == "scaled":
                c_ref = cons.closed_form_constant(fam, params) if fam not in overrides else r.scalar_constant
                checks[need] = r.scalar_constant is not None and abs(r.scalar_constant - c_ref) <= tol * max(1, c_ref)
            elif fam in ("T", "S"):
                checks[need] = getattr(r, f"{need}_normalized") <= tol
            else:
                checks[need] = getattr(r, f"{need}_unitary") <= tol
        passed = all(checks.values())
        ok &= passed
        report["tensors"][fam] = {**r.as_dict(), "checks": checks, "pass": passed}
        try:
            parts[fam] = cons.normalized(t, tol) if fam in ("T", "S") else t
        except ConstraintViolation:
            parts[fam] = t
    for role, spec in dec.roles.items():
        entry = {"in": list(spec.in_legs), "out": list(spec.out_legs)}
        try:
            t = dec.composite(role, normalize=False, constituents=parts)
            if spec.in_legs:
                t = normalize_composite(t, spec.in_legs, spec.out_legs, tol)
                entry["isometry_defect"] = isometry_defect(t, spec.in_legs, spec.out_legs)
                entry["pass"] = entry["isometry_defect"] <= tol
            else:
                entry["pass"] = True
        except ConstraintViolation as exc:
            entry["pass"], entry["error"] = False, str(exc)
        ok &= entry["pass"]
        report["composites"][role] = entry
    report["pass"] = ok
    _emit(args, "verify.json", json.dumps(report, indent=2, sort_keys=True, default=float) + "\n")
    for fam, e in report["tensors"].items():
        bad = [k for k, v in e["checks"].items() if not v]
        log.info("%s: %s%s", fam, "pass" if e["pass"] else "FAIL", f" ({', '.join(bad)})" if bad else "")
    return 0 if ok else 1


def cmd_inflate(args) -> int:
    g = load_grammar(args.grammar)
    if args.deflate:
        w = deflate(BoundaryWord(args.deflate), g)
        _emit(args, "deflated.txt", w.letters + "\n")
        return 0
    w = BoundaryWord(args.word)
    lines = [f"# scale factor {scale_factor(g):.12f}", f"0 {w.letters}"]
    for n in range(1, args.layers + 1):
        w = inflate(w, g)
        lines.append(f"{n} {w.letters}")
    _emit(args, "words.txt", "\n".join(lines) + "\n")
    return 0


def _config_from_args(args, name=None) -> ExperimentConfig:
    base = ExperimentConfig.from_file(args.config).to_dict() if getattr(args, "config", None) else {}
    if name:
        base["decomposition"] = name
    if args.cones:
        base["cones"] = args.cones
    if args.weights:
        w = args.weights
        base["weights"] = w if w in ("uniform", "boundary") else [float(x) for x in w.split(",")]
    if getattr(args, "trials", None):
        base["trials"] = args.trials
    if getattr(args, "workers", None):
        base["workers"] = args.workers
    if args.k:
        base["k"] = args.k
    base["base_seed"] = _need_seed(args)
    cfg = ExperimentConfig.from_dict(base)
    cfg.validate()
    return cfg


def cmd_spectrum(args) -> int:
    cfg = _config_from_args(args, args.decomposition)
    cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "trials": 1})
    rec = run_trials(cfg)[0]
    if rec.failed:
        raise SolverError(rec.error)
    rows = [["index", "magnitude", "delta"]] + [[i, repr(m), repr(d)] for i, (m, d) in
                                                enumerate(zip(rec.magnitudes, rec.dimensions))]
    text = "".join(",".join(map(str, r)) + "\n" for r in rows)
    _emit(args, "spectrum.csv", text)
    return 0


def cmd_trials(args) -> int:
    names = args.decomposition or [None]
    summaries = []
    for name in names:
        cfg = _config_from_args(args, name)
        records = run_trials(cfg)
        summ = summarize(records, cfg.targets, cfg.to_dict(with_workers=False))
        out = Path(args.out or "results")
        if len(names) > 1:
            out = out / summ.decomposition
        write_outputs(out, summ, records, figures=not args.no_figures)
        summaries.append(summ)
        e1, e2 = summ.envelopes[1], summ.envelopes[2]
        pairs = ", ".join(f"{p['model']}={'yes' if p['contained'] else 'no'}" for p in summ.primary_pairs)
        print(f"{summ.decomposition}: {summ.trials} trials, {summ.n_failed} failed; "
              f"delta1 [{e1['min']:.4g}, {e1['max']:.4g}] delta2 [{e2['min']:.4g}, {e2['max']:.4g}]; "
              f"targets contained: {pairs}")
    if len(summaries) > 1:
        ref = summaries[0]
        for s in summaries[1:]:
            print(f"envelope shift {ref.decomposition} vs {s.decomposition}: {envelope_shift(ref, s):.4g}")
        if not args.no_figures:
            from .plotting import plot_comparison

            plot_comparison(summaries, Path(args.out or "results") / "comparison.png")
    return 0


def cmd_kac(args) -> int:
    if args.model:
        table = model_table(args.model)
    else:
        table = kac_table(tuple(args.pq))
    rows = [["r", "s", "h", "delta"]] + [[r, s, str(h), str(2 * h)] for (r, s), h in sorted(table.entries.items())]
    _emit(args, "kac.csv", "".join(",".join(map(str, row)) + "\n" for row in rows))
    return 0


def cmd_perfect_check(args) -> int:
    t = ame43() if args.tensor == "ame43" else load_tensor(args.tensor)
    tol = args.tol if args.tol is not None else 1e-10
    res = perfect_check(t, tol, tensor_id=args.tensor)
    _emit(args, "perfect.json", json.dumps(res.as_dict(), indent=2, sort_keys=True) + "\n")
    return 0 if res.is_perfect else 1


def cmd_push(args) -> int:
    op = load_tensor(args.operator).data
    t = load_tensor(args.tensor)
    in_legs = tuple(args.in_legs.split(","))
    out_legs = tuple(args.out_legs.split(",")) if args.out_legs else tuple(x for x in t.legs if x not in in_legs)
    n = int(np.prod([t.dim(x) for x in in_legs]))
    if op.shape != (n, n):
        op = op.reshape(n, n)
    tol = args.tol if args.tol is not None else 1e-8
    res = push_operator(op, t, in_legs, out_legs, tol)
    _emit(args, "pushed.json", json.dumps(tensor_to_dict(Tensor(res, ("row", "col")))) + "\n")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None,
                        help="tolerance (default 1e-10 for algebraic identities, 1e-8 for channel checks)")
    common.add_argument("--seed", type=int, default=None, help="base seed; required by randomized verbs")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hymera", description="Hyperinvariant tensor network laboratory.")
    sub = p.add_subparsers(dest="verb", required=True)

    v = sub.add_parser("verify", parents=[common], help="check constituent constraints and composite isometries")
    v.add_argument("decomposition")
    v.add_argument("--params", help='angles as "1=0.3,3=1.2" or JSON; drawn at random from --seed if absent')
    v.add_argument("--override", action="append", metavar="FAMILY=FILE",
                   help="replace a constituent by a tensor from a JSON file")
    v.set_defaults(func=cmd_verify)

    i = sub.add_parser("inflate", parents=[common], help="inflate or deflate boundary words")
    i.add_argument("--grammar", default="54", help="grammar preset name or JSON file")
    i.add_argument("--word", default="a")
    i.add_argument("--layers", type=int, default=4)
    i.add_argument("--deflate", metavar="WORD", help="deflate WORD one step instead")
    i.set_defaults(func=cmd_inflate)

    def campaign_opts(sp):
        sp.add_argument("--config", help="experiment config JSON")
        sp.add_argument("--cones", nargs="+", choices=available_cones())
        sp.add_argument("--weights", help="uniform, boundary, or comma-separated numbers")
        sp.add_argument("--k", type=int)

    s = sub.add_parser("spectrum", parents=[common], help="scaling dimensions for one random draw")
    s.add_argument("decomposition")
    campaign_opts(s)
    s.set_defaults(func=cmd_spectrum)

    t = sub.add_parser("trials", parents=[common], help="randomized envelope campaign")
    t.add_argument("--decomposition", nargs="+")
    t.add_argument("--trials", type=int)
    t.add_argument("--workers", type=int)
    t.add_argument("--no-figures", action="store_true")
    campaign_opts(t)
    t.set_defaults(func=cmd_trials)

    k = sub.add_parser("kac", parents=[common], help="minimal-model Kac table")
    g = k.add_mutually_exclusive_group(required=True)
    g.add_argument("--model", choices=["ising", "tricritical-ising", "potts3"])
    g.add_argument("--pq", type=int, nargs=2, metavar=("P", "Q"))
    k.set_defaults(func=cmd_kac)

    pc = sub.add_parser("perfect-check", parents=[common], help="test a tensor for perfectness")
    pc.add_argument("tensor", help="tensor JSON file, or 'ame43' for the built-in example")
    pc.set_defaults(func=cmd_perfect_check)

    pu = sub.add_parser("push", parents=[common], help="push an operator through an isometric tensor")
    pu.add_argument("operator")
    pu.add_argument("tensor")
    pu.add_argument("--in", dest="in_legs", required=True, help="comma-separated input legs")
    pu.add_argument("--out-legs", help="comma-separated output legs (default: the rest)")
    pu.set_defaults(func=cmd_push)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DOMAIN_ERRORS as exc:
        print(f"hymera: {exc}", file=sys.stderr)
        return 1
    except (UsageError, DeflationError, HymeraError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"hymera: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
