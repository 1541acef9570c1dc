"""Command line entry point: ``sobocomp <subcommand> --config <path>``.

Exit codes: 0 success, 1 precondition or hypothesis violation, 2 invariant
failure, 3 configuration or I/O error.
"""

import argparse
import os
import sys

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
SUBCOMMANDS = ("cover", "poincare", "apcheck", "doubling", "exponents", "partition", "sobolev-local",
               "compact-general", "compact-abstract", "compact-local", "compact-quasimetric")


def build_parser():
    ap = argparse.ArgumentParser(prog="sobocomp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--threads", type=int, help="cap on BLAS threads (also SOBOCOMP_THREADS)")
    return ap


def _cap_threads(k):
    if k is None:
        env = os.environ.get("SOBOCOMP_THREADS")
        k = int(env) if env and env.isdigit() else None
    if k:
        for v in THREAD_VARS:
            os.environ[v] = str(k)


def run_scenario(command, cfg, out_dir):
    from .pipelines import PIPELINES
    from .report import canonical_json, write_text

    summary, tables = PIPELINES[command](cfg)
    prefix = cfg["output"].get("prefix", "report")
    body = {"command": command, "config": cfg.to_dict(), "result": summary}
    paths = [os.path.join(out_dir, f"{prefix}.json")]
    write_text(paths[0], canonical_json(body))
    for suffix, text in sorted(tables.items()):
        paths.append(os.path.join(out_dir, f"{prefix}_{suffix}.csv"))
        write_text(paths[-1], text)
    return paths


def main(argv=None):
    args = build_parser().parse_args(argv)
    _cap_threads(args.threads)

    from .config import load_config
    from .errors import SobocompError
    from .report import canonical_json

    try:
        cfg = load_config(args.config)
        out_dir = args.out or cfg["output"].get("dir", "out")
        paths = run_scenario(args.command, cfg, out_dir)
    except SobocompError as exc:
        kind = type(exc).__name__
        print(f"sobocomp {args.command}: {kind}: {exc}", file=sys.stderr)
        if exc.witness is not None:
            print("witness: " + canonical_json(exc.witness, indent=0).replace("\n", ""), file=sys.stderr)
        return exc.exit_code
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
