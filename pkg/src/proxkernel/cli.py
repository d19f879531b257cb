"""Command line entry point: ``proxkernel {encode,gram,cluster,sweep}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .binning import fit_bin_centers
from .dataset import DataError, load_csv
from .encoder import Representation, encode_dataset
from .evaluation import (ExperimentConfig, SCHEMA_VERSION, SyntheticSpec, missing_rate_sweep,
                         run_experiment, scaling_bench, sensitivity_sweep, trend_is_declining,
                         write_reports, write_rows)
from .kernel import gram, min_eigenvalue

log = logging.getLogger("proxkernel")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _markers(text: str) -> set[str]:
    return set(text.split(","))


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _prefix(args, default_suffix: str) -> Path:
    if args.output:
        return Path(args.output)
    return Path(Path(args.input).stem + default_suffix)


def _resolved(args) -> dict:
    return {k: (sorted(v) if isinstance(v, set) else v)
            for k, v in vars(args).items() if k != "func"}


def _load(args):
    return load_csv(args.input, missing_markers=args.markers, label_column=args.label)


def cmd_encode(args) -> int:
    ds = _load(args)
    model = fit_bin_centers(ds, args.bins)
    rep = encode_dataset(ds, model)
    out = _prefix(args, "")
    model.save(f"{out}.model.json")
    rep.save_csv(f"{out}.rep.csv")
    rep.save_sparse(f"{out}.rep.txt", extra={"dataset_hash": ds.content_hash()})
    meta = {"schema_version": SCHEMA_VERSION, "run_config": _resolved(args),
            "dataset_hash": ds.content_hash(), "fallback_levels": rep.level_counts()}
    Path(f"{out}.encode.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    for level, count in rep.level_counts().items():
        print(f"{level}: {count}")
    return EXIT_OK


def cmd_gram(args) -> int:
    rep = Representation.load_sparse(args.input)
    head = json.loads(Path(args.input).read_text(encoding="utf-8").split("\n", 1)[0])
    gm = gram(rep, dataset_hash=head.get("dataset_hash"))
    gm.save(args.output or Path(args.input).with_suffix(".gram.csv"))
    if args.check_psd:
        print(f"min_eigenvalue: {min_eigenvalue(gm):.6e}")
    return EXIT_OK


def _config(args, method=None) -> ExperimentConfig:
    return ExperimentConfig(method=method or args.method, n_bins=args.bins, runs=args.runs,
                            seed=args.seed, restarts=args.restarts, max_iter=args.max_iter)


def cmd_cluster(args) -> int:
    ds = _load(args)
    if ds.labels is None:
        raise DataError("cluster needs --label naming the ground-truth column")
    report = run_experiment(ds, _config(args))
    out = _prefix(args, f".{report.method}")
    write_reports([report], f"{out}.json", f"{out}.csv", run_config=_resolved(args))
    print(f"{ds.name} {report.method} mean_nmi={report.mean_nmi:.4f} std={report.std_nmi:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    chosen = [name for name in ("rates", "bin_counts", "scale") if getattr(args, name)]
    if len(chosen) != 1:
        raise UsageError("give exactly one of --rates, --bins, --scale")
    out = Path(args.output) if args.output else Path(f"sweep-{chosen[0]}")
    if args.scale:
        spec = SyntheticSpec(d=args.dim, missing_rate=args.missing_rate, seed=args.seed)
        rows = scaling_bench(args.scale, spec, n_bins=args.n_bins, repeats=args.repeats)
        write_rows(rows, f"{out}.csv")
        Path(f"{out}.json").write_text(json.dumps(
            {"schema_version": SCHEMA_VERSION, "run_config": _resolved(args), "rows": rows},
            indent=2, sort_keys=True) + "\n")
        for r in rows:
            print(f"n={r['n']} fit={r['fit_s']:.4f}s encode={r['encode_s']:.4f}s")
        return EXIT_OK
    if args.input is None:
        raise UsageError("--input is required for --rates and --bins sweeps")
    ds = _load(args)
    if args.rates:
        if not ds.is_complete:
            raise DataError("--rates needs a fully observed dataset; this one has missing cells")
        reports = missing_rate_sweep(ds, args.rates, _config(args))
        print(f"declining trend: {trend_is_declining(reports)}")
    else:
        reports = sensitivity_sweep(ds, args.bin_counts, _config(args, method="pk"))
    write_reports(reports, f"{out}.json", f"{out}.csv", run_config=_resolved(args))
    for r in reports:
        print(f"n_bins={r.n_bins} rate={r.rate} mean_nmi={r.mean_nmi:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="proxkernel", description="Proximity kernel for incomplete data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(p, required=True):
        p.add_argument("--input", required=required, help="CSV file with a header row")
        p.add_argument("--label", default=None, help="ground-truth column name")
        p.add_argument("--markers", type=_markers, default={"?", ""},
                       help="comma-separated missing markers (default: '?,')")
        p.add_argument("--output", default=None, help="output path prefix")

    def run_args(p):
        p.add_argument("--runs", type=int, default=10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--restarts", type=int, default=10)
        p.add_argument("--max-iter", type=int, default=300)

    p = sub.add_parser("encode", help="write representation and bin model")
    data_args(p)
    p.add_argument("--bins", type=int, default=4)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("gram", help="gram matrix from a sparse representation file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)
    p.add_argument("--check-psd", action="store_true")
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("cluster", help="k-means + NMI experiment")
    data_args(p)
    p.add_argument("--method", choices=["pk", "mean"], default="pk")
    p.add_argument("--bins", type=int, default=4)
    run_args(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("sweep", help="missing-rate, bin-count or scaling sweep")
    data_args(p, required=False)
    p.add_argument("--method", choices=["pk", "mean"], default="pk")
    p.add_argument("--rates", type=_float_list, default=None)
    p.add_argument("--bins", dest="bin_counts", type=_int_list, default=None)
    p.add_argument("--scale", type=_int_list, default=None)
    p.add_argument("--n-bins", type=int, default=4, help="bins for --rates and --scale")
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--missing-rate", type=float, default=0.1)
    p.add_argument("--repeats", type=int, default=3)
    run_args(p)
    p.set_defaults(func=cmd_sweep, bins=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "sweep":
        args.bins = args.n_bins
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"proxkernel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, ValueError) as exc:
        print(f"proxkernel: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
