"""Command-line front end.

One JSON config per run with a "subcommand" discriminator; any leaf can
be overridden with --set dotted.path=value.  All randomness flows from a
single top-level seed recorded in the outputs.

Exit codes: 0 success, 2 usage/parse error, 3 infeasible, 4 internal.
"""

import argparse
import csv
import json
import sys
import time
from dataclasses import fields as dc_fields
from pathlib import Path

from . import channel, ensemble, finite, mcde, optimizer

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_INTERNAL = 4


class UsageError(ValueError):
    pass


def _set_path(doc, dotted, value):
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    try:
        value = json.loads(value)
    except json.JSONDecodeError:
        pass  # keep as string
    node[keys[-1]] = value


def load_config(args):
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot parse config {args.config}: {exc}")
    else:
        doc = {}
    if args.subcommand:
        doc["subcommand"] = args.subcommand
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.workers is not None:
        doc["workers"] = args.workers
    if args.out:
        doc["out"] = args.out
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set needs key=value, got {item!r}")
        _set_path(doc, *item.split("=", 1))
    if "subcommand" not in doc:
        raise UsageError("no subcommand given (flag or config field)")
    return doc


def _ensemble_from_config(doc):
    if "ensemble_file" in doc:
        spec = ensemble.load_json(doc["ensemble_file"])
    elif "ensemble" in doc:
        spec = doc["ensemble"]
    else:
        raise UsageError("config needs 'ensemble' or 'ensemble_file'")
    try:
        return ensemble.ensemble_from_dict(spec)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad ensemble document: {exc}")


def _punct_from_config(doc, e):
    if "puncturing_file" in doc:
        spec = ensemble.load_json(doc["puncturing_file"])
    elif "puncturing" in doc:
        spec = doc["puncturing"]
    else:
        return None
    if isinstance(spec, dict) and "family" in spec:
        return _family_pd(e, spec)
    try:
        return ensemble.punct_from_dict(spec)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad puncturing document: {exc}")


def _family_pd(e, spec):
    fam = spec["family"]
    f = float(spec.get("fraction", 0.0))
    if fam == "spread":
        return ensemble.spreading_distribution(e, f)
    if fam == "cluster":
        return ensemble.clustering_distribution(e, f)
    if fam == "degree2-spread":
        d2 = min(e.lam.degrees)
        return ensemble.mixed_distribution(e, {d2: ("spread", f)})
    raise UsageError(f"unknown puncturing family {fam!r}")


def _mcde_config(doc):
    allowed = {f.name for f in dc_fields(mcde.McdeConfig)}
    params = {k: v for k, v in doc.get("mcde", {}).items() if k in allowed}
    params.setdefault("seed", doc.get("seed", 0))
    params.setdefault("workers", doc.get("workers", 1))
    return mcde.McdeConfig(**params)


def _de_params(doc):
    allowed = {f.name for f in dc_fields(optimizer.DeParams)}
    params = {k: v for k, v in doc.get("de", {}).items() if k in allowed}
    params.setdefault("seed", doc.get("seed", 0))
    params.setdefault("workers", doc.get("workers", 1))
    return optimizer.DeParams(**params)


def _outdir(doc):
    out = Path(doc.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_result(out, name, payload, doc):
    payload = dict(payload)
    payload["seed"] = doc.get("seed", 0)
    payload["meta"] = {"written_at": time.strftime("%Y-%m-%dT%H:%M:%S")}
    with open(out / name, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


# ------------------------------------------------------------- subcommands

def cmd_threshold(doc):
    e = _ensemble_from_config(doc)
    pd = _punct_from_config(doc, e)
    cfg = _mcde_config(doc)
    out = _outdir(doc)
    est = mcde.threshold_search(e, pd, cfg=cfg)
    _write_result(out, "threshold.json", est.to_dict(), doc)
    print(est.summary())
    return EXIT_OK


def cmd_sweep(doc):
    e = _ensemble_from_config(doc)
    cfg = _mcde_config(doc)
    out = _outdir(doc)
    mode = doc.get("axis", "fraction")
    values = doc.get("values", [])
    if not values:
        raise UsageError("sweep needs a nonempty 'values' list")
    points = []
    if mode == "fraction":
        families = doc.get("families", ["spread", "cluster"])
        for fam in families:
            for f in values:
                points.append((f, fam, _family_pd(e, {"family": fam,
                                                      "fraction": f})))
    elif mode == "split":
        # f = f1 (spread on low degree) + f2 (clustered on high degree)
        total = float(doc["total_fraction"])
        dlo, dhi = min(e.lam.degrees), max(e.lam.degrees)
        for f1 in values:
            pd = ensemble.mixed_distribution(
                e, {dlo: ("spread", f1), dhi: ("cluster", total - f1)})
            points.append((f1, f"split(total={total})", pd))
    elif mode == "clusterization":
        total = float(doc["total_fraction"])
        for k in values:
            pd = ensemble.mixed_distribution(
                e, {d: (("fixed", int(k)), total * ensemble.node_fraction(e, d))
                    for d in e.lam.degrees})
            points.append((k, "fixed-k", pd))
    else:
        raise UsageError(f"unknown sweep axis {mode!r}")
    rows = []
    for x, fam, pd in points:
        est = mcde.threshold_search(e, pd, cfg=cfg)
        f = ensemble.overall_fraction(e, pd)
        rp = ensemble.punctured_rate(e, pd) if f > 0 else ensemble.design_rate(e)
        rows.append([x, fam, est.sigma_star_mean, est.sigma_star_std,
                     est.ebn0_star_db, rp])
        print(f"{fam} x={x}: {est.summary()}")
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "family", "sigma_star", "sigma_std", "ebn0_db", "r_p"])
        w.writerows(rows)
    return EXIT_OK


def cmd_optimize(doc):
    e = _ensemble_from_config(doc)
    cfg = _mcde_config(doc)
    de = _de_params(doc)
    out = _outdir(doc)
    screen = None
    if "screen" in doc:
        screen = mcde.cheap_config(cfg, **doc["screen"])
    target = doc.get("target", "puncturing")
    if target == "puncturing":
        rp = float(doc["r_p"])
        pd, est = optimizer.optimize_puncturing(
            e, rp, de, cfg, screen_cfg=screen,
            checkpoint_path=out / "checkpoint.json")
        ensemble.save_json(ensemble.punct_to_dict(pd), out / "distribution.json")
        payload = {"r_p": rp, "threshold": est.to_dict(),
                   "f_k": pd.k_marginal(e),
                   "k_bar": {str(d): pd.mean_bits(d) for d in e.lam.degrees}}
        _write_result(out, "optimize.json", payload, doc)
    elif target == "degrees":
        ens, est = optimizer.optimize_degrees(
            e.field, float(doc.get("rate", 0.5)), int(doc.get("d_max", 10)),
            de, cfg, screen_cfg=screen)
        ensemble.save_json(ensemble.ensemble_to_dict(ens), out / "ensemble.json")
        _write_result(out, "optimize.json", {"threshold": est.to_dict()}, doc)
    else:
        raise UsageError(f"unknown optimize target {target!r}")
    print(est.summary())
    return EXIT_OK


def cmd_fer(doc):
    e = _ensemble_from_config(doc)
    pd = _punct_from_config(doc, e) or ensemble.no_puncturing(e)
    out = _outdir(doc)
    seed = doc.get("seed", 0)
    frames = int(doc.get("frames", 0))
    if frames < 1:
        raise UsageError("fer needs frames >= 1")
    n_symbols = int(doc.get("n_symbols", 1000))
    max_iter = int(doc.get("max_iter", 100))
    if "graph_file" in doc:
        with open(doc["graph_file"]) as fh:
            graph = finite.graph_from_text(fh.read())
    else:
        graph = finite.peg_construct(e, n_symbols, seed)
        with open(out / "graph.txt", "w") as fh:
            fh.write(finite.graph_to_text(graph))
    pattern = finite.sample_pattern(graph, pd, seed)
    with open(out / "pattern.txt", "w") as fh:
        fh.write(finite.pattern_to_text(pattern))
    f = ensemble.overall_fraction(e, pd)
    rate = ensemble.punctured_rate(e, pd) if f > 0 else ensemble.design_rate(e)
    grid = doc.get("ebn0_db_grid")
    if grid:
        sigmas = [channel.sigma_from_ebn0_db(x, rate) for x in grid]
    else:
        sigmas = doc.get("sigma_grid", [])
    if not sigmas:
        raise UsageError("fer needs 'ebn0_db_grid' or 'sigma_grid'")
    rows = []
    for sigma in sigmas:
        ch = channel.ChannelParams(sigma=float(sigma), p=e.p)
        fer, ci, run, errs = finite.fer_sim(
            graph, pattern, ch, e.field, frames, max_iter=max_iter, seed=seed,
            max_errors=int(doc.get("max_errors", 100)))
        ebn0 = channel.ebn0_db_from_sigma(sigma, rate)
        rows.append([sigma, ebn0, run, errs, fer, ci])
        print(f"sigma={sigma:.4f} Eb/N0={ebn0:.3f} dB: "
              f"FER={fer:.4g} ± {ci:.4g} ({errs}/{run})")
    with open(out / "fer.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sigma", "ebn0_db", "frames", "errors", "fer", "ci"])
        w.writerows(rows)
    return EXIT_OK


def cmd_capacity(doc):
    out = _outdir(doc)
    rates = doc.get("rates")
    if not rates:
        raise UsageError("capacity needs a nonempty 'rates' list")
    rows = []
    for r in rates:
        sigma = channel.shannon_sigma(float(r))
        rows.append([r, sigma, channel.ebn0_db_from_sigma(sigma, float(r))])
        print(f"rate={r}: sigma={sigma:.6f} Eb/N0={rows[-1][2]:.4f} dB")
    with open(out / "capacity.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rate", "sigma", "ebn0_db"])
        w.writerows(rows)
    return EXIT_OK


DISPATCH = {"threshold": cmd_threshold, "sweep": cmd_sweep,
            "optimize": cmd_optimize, "fer": cmd_fer,
            "capacity": cmd_capacity}


def build_parser():
    ap = argparse.ArgumentParser(prog="nbpunct", description=__doc__)
    ap.add_argument("subcommand", nargs="?", choices=sorted(DISPATCH))
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--set", action="append", metavar="dotted.path=value")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        doc = load_config(args)
        sub = doc["subcommand"]
        if sub not in DISPATCH:
            raise UsageError(f"unknown subcommand {sub!r}")
        return DISPATCH[sub](doc)
    except (UsageError, ensemble.EnsembleError) as exc:
        if isinstance(exc, (ensemble.OverPuncturedError,
                            ensemble.InfeasibleDistributionError)):
            print(f"infeasible: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (optimizer.InfeasibilityError, mcde.BracketError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception as exc:  # pragma: no cover - last resort
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
