"""Command-line interface: ``ctst {test,bench,simulate,seismic,curves}``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import CTSTError, InputError, NodeCountMismatchError, NumericalError, ParseError
from .evaluation import BENCH_SELECTION, afroc_auc, afroc_curve, roc_auc, roc_curve, run_benchmark
from .graph import Graph
from .io import (
    dumps,
    load_config,
    load_graph,
    load_samples,
    read_json,
    write_curve_csv,
    write_json,
    write_report_csv,
    write_samples_csv,
)
from .permutation import METHODS, SELECTIONS, run_method
from .scenarios import SCENARIOS, ScenarioSpec, generate
from .seismic import (
    StationSet,
    build_multiplex,
    knn_spatial_graph,
    preprocess_station,
    resample,
    segment_windows,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("ctst")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with run settings")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n-perm", type=int, dest="n_perm")
    p.add_argument("--pi-star", type=float, dest="pi_star")
    p.add_argument("--seed", type=int)
    p.add_argument("--anchors-max", type=int, dest="anchors_max")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--solver", choices=("cbcd", "pcg"))
    p.add_argument("--threads", type=int, help="cap on worker processes and BLAS threads")
    p.add_argument(
        "--selection",
        choices=SELECTIONS,
        help="arrangement seen by hyperparameter selection (default: pooled for tests, observed for bench)",
    )


def _config_from(args):
    keys = ("method", "alpha", "n_perm", "pi_star", "seed", "anchors_max", "tol", "max_iter", "solver", "threads", "selection")
    return load_config(args.config, **{k: getattr(args, k, None) for k in keys})


def _emit(obj, out) -> None:
    text = dumps(obj) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _log_fit(result) -> None:
    meta = result.metadata
    if "hyperparams" in meta:
        log.info("selected hyperparameters: %s", meta["hyperparams"])
    if "objective" in meta:
        log.info("final objective: %s", meta["objective"])


def _run(cfg, g, samples):
    with threadpool_limits(limits=cfg.threads):
        return run_method(cfg.method, g, samples, cfg.alpha, cfg.n_perm, cfg.pi_star, cfg.test_config(), cfg.seed)


# ---------------------------------------------------------------------------
# subcommands


def cmd_test(args) -> int:
    cfg = _config_from(args)
    g = load_graph(args.graph)
    samples = load_samples(args.samples)
    if g.num_nodes != samples.num_nodes:
        raise NodeCountMismatchError(f"graph has {g.num_nodes} nodes, samples cover {samples.num_nodes}")
    result = _run(cfg, g, samples)
    _log_fit(result)
    log.info("rejected %d of %d nodes", len(result.rejected), result.num_nodes)
    out = result.to_dict()
    out["config"] = cfg.to_dict()
    _emit(out, args.out)
    return EXIT_OK


def _scenario(args, seed) -> ScenarioSpec:
    return ScenarioSpec(
        args.scenario,
        args.n,
        args.n_prime,
        seed,
        getattr(args, "null", False),
        nodes_per_cluster=args.nodes_per_cluster,
        grid_shape=tuple(args.grid_shape),
    )


def cmd_bench(args) -> int:
    cfg = _config_from(args)
    methods = args.bench_methods or [cfg.method]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = _scenario(args, cfg.seed)
    summaries = []
    for method in methods:
        with threadpool_limits(limits=cfg.threads):
            rep = run_benchmark(
                spec, method, args.null, args.alt, cfg.seed, alpha=cfg.alpha, config=cfg.test_config(BENCH_SELECTION)
            )
        log.info("%s on %s: AFROC-AUC %.4f, ROC-AUC %.4f", method, spec.name, rep.afroc_auc, rep.roc_auc)
        write_json(out_dir / f"{method}_report.json", rep.to_dict())
        write_curve_csv(out_dir / f"{method}_afroc.csv", rep.afroc)
        write_curve_csv(out_dir / f"{method}_roc.csv", rep.roc)
        summaries.append(rep.summary())
    write_report_csv(out_dir / "report.csv", summaries)
    _emit(summaries, None)
    return EXIT_OK


def cmd_simulate(args) -> int:
    inst = generate(_scenario(args, args.seed))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "graph.json", inst.graph.to_dict())
    if args.csv:
        write_samples_csv(out_dir / "samples.csv", inst.samples)
    else:
        write_json(out_dir / "samples.json", inst.samples.to_dict())
    write_json(out_dir / "truth.json", {"affected": sorted(inst.affected), "center": inst.center})
    return EXIT_OK


def cmd_curves(args) -> int:
    rep = read_json(args.report)
    try:
        null_stats = [np.asarray(s, dtype=float) for s in rep["null_stats"]]
        alt_runs = [(np.asarray(r["stats"], dtype=float), r["affected"]) for r in rep["alt_runs"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{args.report}: malformed report ({exc})") from exc
    af = afroc_curve(null_stats, alt_runs)
    rc = roc_curve(alt_runs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_curve_csv(out_dir / "afroc.csv", af)
    write_curve_csv(out_dir / "roc.csv", rc)
    _emit({"afroc_auc": afroc_auc(af), "roc_auc": roc_auc(rc)}, None)
    return EXIT_OK


def _read_stations(path) -> tuple[list, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        ids = [r["id"].strip() for r in rows]
        coords = np.array([[float(r["lat"]), float(r["lon"])] for r in rows]).reshape(-1, 2)
    except FileNotFoundError as exc:
        raise ParseError(f"file not found: {path}") from exc
    except (KeyError, ValueError, TypeError, AttributeError) as exc:
        raise ParseError(f"{path}: expected columns id,lat,lon ({exc})") from exc
    if not ids:
        raise ParseError(f"{path}: no stations")
    return ids, coords


def _read_waveform(directory: Path, sid: str, fs_flag):
    """``(data, fs, event_index)`` from ``<id>.json`` or ``<id>.csv``; ``None`` if absent."""
    jpath, cpath = directory / f"{sid}.json", directory / f"{sid}.csv"
    if jpath.exists():
        d = read_json(jpath)
        try:
            data = np.asarray(d["data"], dtype=float)
            fs = float(d.get("fs", fs_flag) if fs_flag is None else fs_flag)
            ev = d.get("event_index")
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{jpath}: malformed waveform ({exc})") from exc
    elif cpath.exists():
        if fs_flag is None:
            raise InputError(f"{cpath}: CSV waveforms need --fs")
        rows = []
        with open(cpath, newline="") as fh:
            for row in csv.reader(fh):
                try:
                    rows.append([float(x) if x.strip() else np.nan for x in row])
                except ValueError:
                    if rows:
                        raise ParseError(f"{cpath}: non-numeric value after the header")
        data, fs, ev = np.asarray(rows, dtype=float), float(fs_flag), None
    else:
        return None
    if data.ndim == 1:
        data = data[:, None]
    return data, fs, ev


def cmd_seismic(args) -> int:
    cfg = _config_from(args)
    ids, coords = _read_stations(args.stations)
    wdir = Path(args.waveforms)
    loaded, keep = [], []
    fs = event = None
    for sid in ids:
        w = _read_waveform(wdir, sid, args.fs)
        if w is None:
            log.warning("station %s has no waveform file; dropped", sid)
            continue
        data, f, ev = w
        if fs is not None and f != fs:
            raise InputError(f"station {sid} has sampling rate {f}, expected {fs}")
        fs = f
        ev = args.event_index if args.event_index is not None else ev
        if ev is None:
            raise InputError("event index missing: pass --event-index or set it in the waveform files")
        if event is not None and ev != event:
            raise InputError(f"station {sid} has event index {ev}, expected {event}")
        event = int(ev)
        loaded.append(data)
        keep.append(ids.index(sid))
    if not loaded:
        raise InputError("no station has waveform data")
    length = min(x.shape[0] for x in loaded)
    dims = {x.shape[1] for x in loaded}
    if len(dims) != 1:
        raise InputError(f"stations disagree on channel count: {sorted(dims)}")
    stations = StationSet(
        [ids[i] for i in keep], coords[keep], np.stack([x[:length] for x in loaded]), fs
    )
    span = args.num_windows * args.window_len
    scale = 1.0 if args.resample_to is None else fs / args.resample_to
    lo, hi = max(0, event - int(np.ceil(span * scale))), event + int(np.ceil(span * scale))
    complete = stations.complete(lo, hi)
    for sid in set(stations.ids) - set(complete.ids):
        log.warning("station %s has missing data in the analysis span; dropped", sid)
    if complete.num_stations == 0:
        raise InputError("no station has complete data in the analysis span")

    processed = np.stack([preprocess_station(np.nan_to_num(s), fs) for s in complete.series])
    if args.resample_to is not None:
        processed = resample(processed, fs, args.resample_to, axis=1)
        event = int(round(event * args.resample_to / fs))
    samples = segment_windows(processed, event, args.num_windows, args.window_len)

    N = complete.num_stations
    if N > args.k:
        base = knn_spatial_graph(complete, args.k)
    else:
        log.warning("only %d stations; using the complete graph", N)
        base = Graph(N, [(u, v) for u in range(N) for v in range(u + 1, N)])
    mux = build_multiplex(base, args.num_windows)
    result = _run(cfg, mux.graph, samples)
    _log_fit(result)

    comps = mux.graph.connected_components(result.rejected) if result.rejected else []
    largest = max(comps, key=len) if comps else []
    out = result.to_dict()
    for rec in out["nodes"]:
        v, t = mux.split(rec["node"])
        rec["station"] = complete.ids[v]
        rec["window"] = t
    out["stations"] = list(complete.ids)
    out["spatial_edges"] = [[u, v] for u, v, _ in base.edges]
    out["largest_component"] = [
        {"node": int(x), "station": complete.ids[mux.split(x)[0]], "window": mux.split(x)[1]} for x in sorted(largest)
    ]
    out["config"] = cfg.to_dict()
    _emit(out, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctst", description="Collaborative two-sample tests over a graph.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run a test on a graph and node samples")
    p.add_argument("--graph", required=True)
    p.add_argument("--samples", required=True, help="samples JSON, or CSV with node,set,idx,x1..xd")
    p.add_argument("--out", help="result file (default: stdout)")
    _add_run_flags(p)
    p.set_defaults(func=cmd_test)

    def scenario_flags(q):
        q.add_argument("--scenario", required=True, choices=SCENARIOS)
        q.add_argument("--n", type=int, default=50)
        q.add_argument("--n-prime", type=int, default=50, dest="n_prime")
        q.add_argument("--nodes-per-cluster", type=int, default=25, dest="nodes_per_cluster")
        q.add_argument("--grid-shape", type=int, nargs=2, default=(10, 10), dest="grid_shape", metavar=("ROWS", "COLS"))

    p = sub.add_parser("bench", help="AFROC/ROC benchmark on a synthetic scenario")
    scenario_flags(p)
    p.add_argument("--null", type=int, default=200, help="number of null instances")
    p.add_argument("--alt", type=int, default=200, help="number of alternative instances")
    p.add_argument("--compare", action="append", dest="bench_methods", choices=METHODS,
                   help="benchmark several methods on the same instances (repeatable)")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_run_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", help="write one synthetic instance")
    scenario_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--null", action="store_true", help="draw both samples from p")
    p.add_argument("--csv", action="store_true", help="write samples as CSV")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("seismic", help="space-time test on station waveforms")
    p.add_argument("--stations", required=True, help="CSV with id,lat,lon")
    p.add_argument("--waveforms", required=True, help="directory of <id>.json or <id>.csv files")
    p.add_argument("--event-index", type=int, dest="event_index")
    p.add_argument("--fs", type=float, help="sampling rate for CSV waveforms (Hz)")
    p.add_argument("--resample-to", type=float, dest="resample_to", help="rate after preprocessing (Hz)")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--num-windows", type=int, default=10, dest="num_windows")
    p.add_argument("--window-len", type=int, default=100, dest="window_len")
    p.add_argument("--out", help="result file (default: stdout)")
    _add_run_flags(p)
    p.set_defaults(func=cmd_seismic)

    p = sub.add_parser("curves", help="recompute AFROC/ROC from a saved benchmark report")
    p.add_argument("--report", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.set_defaults(func=cmd_curves)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except NumericalError as exc:
        return _fail(exc, EXIT_NUMERICAL)
    except (CTSTError, ValueError, OSError) as exc:
        return _fail(exc, EXIT_INPUT)


def _fail(exc: Exception, code: int) -> int:
    """Machine-readable error record on stderr."""
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(dumps(record, indent=None) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
