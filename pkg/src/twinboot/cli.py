"""Command-line entry point: ``twinboot run|sweep|report``.

Failures print one JSON line to stderr, ``{"error": <kind>, "message": ...}``,
and exit nonzero (2 for invalid arguments or config, 3 for I/O errors,
1 otherwise).
"""
import argparse
import json
import sys

from twinboot import experiments as ex


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgError(message)


def _parser():
    p = _Parser(prog="twinboot", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--preset", choices=sorted(ex.PRESETS))
        sp.add_argument("--config", help="YAML config file layered over the preset")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="dotted config override (repeatable)")
        sp.add_argument("--workers", type=int, help="concurrent seeds")

    run = sub.add_parser("run", help="run one config over its seeds")
    common(run)
    run.add_argument("--seed", type=int, help="run only this seed")
    run.add_argument("--seeds", help="seed list, e.g. 1..10 or 1,2,3")
    run.add_argument("--out", default="runs", help="output directory")

    sweep = sub.add_parser("sweep", help="vary one config field across values")
    common(sweep)
    sweep.add_argument("--axis", required=True, help="config field or alias (e.g. M, lr)")
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--seeds", help="seed list, e.g. 1..10")
    sweep.add_argument("--out", default="sweeps", help="output directory")

    rep = sub.add_parser("report", help="aggregate summaries with 95%% t intervals")
    rep.add_argument("--in", dest="in_dir", required=True, help="directory of run outputs")
    return p


def _fail(kind, message, code):
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def _config(args):
    cfg = ex.resolve_config(args.preset, args.config, args.overrides)
    if args.workers is not None:
        cfg.set("workers", args.workers)
    seeds = None
    if getattr(args, "seed", None) is not None:
        seeds = [args.seed]
    elif args.seeds is not None:
        seeds = ex.parse_seeds(args.seeds)
    if seeds is not None:
        cfg.set("seeds", seeds)
    cfg.validate()
    return cfg


def _print_table(rows, header):
    print("\t".join(header))
    for row in rows:
        print("\t".join(str(v) for v in row))


def cmd_run(args):
    cfg = _config(args)
    records = ex.run_experiment(cfg)
    ex.emit_outputs(records, cfg, args.out)
    for r in records:
        state = "diverged" if r.diverged else "ok"
        sigma = r.metrics.get("final_sigma", float("nan"))
        print(f"seed={r.seed} status={state} final_sigma={sigma:.6g} out={ex.seed_dir(args.out, r.seed)}")
    return 0


def cmd_sweep(args):
    cfg = _config(args)
    values = [ex.parse_value(v) for v in args.values.split(",") if v.strip()]
    result = ex.run_sweep(cfg, args.axis, values)
    ex.emit_sweep(result, cfg, args.out)
    _print_table([[r["axis_value"], f"{r['sigma_mean']:.6g}", f"{r['sigma_std']:.6g}",
                   f"{r['sigma_theory']:.6g}", r["n_seeds"]] for r in result.rows],
                 [result.axis, "sigma_mean", "sigma_std", "sigma_theory", "n_seeds"])
    return 0


def cmd_report(args):
    result = ex.report(args.in_dir)
    rows = []
    for group, entry in result.items():
        for metric, st in entry["metrics"].items():
            rows.append([group, metric, f"{st['mean']:.6g}", f"{st['ci95']:.3g}", st["n"]])
    _print_table(rows, ["group", "metric", "mean", "ci95", "n"])
    return 0


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
        handler = {"run": cmd_run, "sweep": cmd_sweep, "report": cmd_report}[args.command]
        return handler(args)
    except _ArgError as exc:
        return _fail("invalid_argument", str(exc), 2)
    except ex.ConfigError as exc:
        return _fail("invalid_argument", str(exc), 2)
    except OSError as exc:
        return _fail("io_error", str(exc), 3)
    except (ValueError, KeyError, TypeError) as exc:
        return _fail("invalid_argument", str(exc), 2)
    except Exception as exc:  # noqa: BLE001
        return _fail(type(exc).__name__, str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
