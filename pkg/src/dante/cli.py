"""Command-line entry point.

Subcommands: simgen, extract-corpus, train-embeddings, nearest, run, serve,
registry. `dante run` is the pipeline; the rest are the supporting tools
around it.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from dante import __version__
from dante.alerting import AlertRules
from dante.clustering import ClustererConfig
from dante.concepts import ConceptRegistry, Severity
from dante.config import PipelineConfig
from dante.embedding import EmbeddingTable, TrainConfig, nearest_ports, train
from dante.flows import RejectLog, parse_flow_log
from dante.pipeline import REGISTRY_FILE, Pipeline
from dante.server import StateView, make_server, serve_forever_in_thread
from dante.simgen import catalog, generate, load_scenario, write_csv
from dante.windows import WindowConfig, assign_windows, extract_sequences



def _open_input(path: str):
    if path == "-":
        return sys.stdin
    return open(path, "r", encoding="utf-8")


def _add_window_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window-min", type=int, default=240, help="window length L in minutes")
    p.add_argument("--step-min", type=int, default=60, help="step size S in minutes")
    p.add_argument("--sequence-key", choices=["src", "src-dst"], default="src")
    p.add_argument("--max-seq-len", type=int, default=100_000)
    p.add_argument("--min-packets", type=int, default=3,
                   help="drop sources with fewer packets per window")
    p.add_argument("--lateness-min", type=int, default=5)


def cmd_simgen(args) -> int:
    names = catalog()
    if args.scenario in names:
        scenario = names[args.scenario]
    elif os.path.exists(args.scenario):
        scenario = load_scenario(args.scenario)
    else:
        print(f"error: {args.scenario!r} is neither a catalog name nor a file", file=sys.stderr)
        print(f"catalog: {', '.join(sorted(names))}", file=sys.stderr)
        return 2
    if args.seed is not None:
        from dataclasses import replace

        scenario = replace(scenario, seed=args.seed)
    records, truth = generate(scenario)
    write_csv(records, args.out)
    if args.truth:
        with open(args.truth, "w", encoding="utf-8") as fh:
            fh.write(truth.to_json() + "\n")
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_extract_corpus(args) -> int:
    config = WindowConfig(args.window_min, args.step_min)
    rejects = RejectLog()
    with _open_input(args.input) as fh:
        records = parse_flow_log(fh, args.format, rejects)
        from dante.flows import filter_low_volume_sources

        count = 0
        with open(args.out, "w", encoding="utf-8") as out:
            for window, recs in assign_windows(records, config, args.lateness_min):
                kept = filter_low_volume_sources(recs, args.min_packets)
                for seq in extract_sequences(kept, window.index, args.sequence_key, args.max_seq_len):
                    out.write(" ".join(str(p) for p in seq.ports) + "\n")
                    count += 1
    print(f"wrote {count} sequences to {args.out} ({rejects.total} rejected lines)")
    return 0


def cmd_train_embeddings(args) -> int:
    with open(args.corpus, "r", encoding="utf-8") as fh:
        corpus = [
            [int(tok) for tok in line.split()] for line in fh if line.strip()
        ]
    config = TrainConfig(
        dim=args.dim,
        context_window=args.context_window,
        negative_samples=args.negative,
        epochs=args.epochs,
        learning_rate=args.lr,
        min_count=args.min_count,
        seed=args.seed,
    )
    table = train(corpus, config)
    table.save(args.out)
    print(f"trained on {len(corpus)} sequences; {len(table)} ports -> {args.out}")
    return 0


def cmd_nearest(args) -> int:
    table = EmbeddingTable.load(args.table)
    try:
        neighbors = nearest_ports(args.port, table, args.k)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for port, sim in neighbors:
        print(f"{port}\t{sim:.4f}")
    return 0


def _config_from_args(args) -> PipelineConfig:
    if args.config:
        config = PipelineConfig.load(args.config)
        overrides = {}
        if args.state_dir:
            overrides["state_dir"] = args.state_dir
        if overrides:
            config = config.with_overrides(**overrides)
        return config
    if not args.table or not args.state_dir:
        raise SystemExit("either --config or both --table and --state-dir are required")
    return PipelineConfig(
        embedding_table=args.table,
        state_dir=args.state_dir,
        window=WindowConfig(args.window_min, args.step_min),
        clusterer=ClustererConfig(
            eps=args.eps, min_pts=args.min_pts, algorithm=args.clusterer
        ),
        rules=AlertRules(
            min_cluster_size=args.min_cluster_size,
            spike_factor=args.spike_factor,
            trailing_windows=args.trailing_windows,
        ),
        jaccard_threshold=args.jaccard_threshold,
        beta=args.beta,
        input_format=args.format,
        min_packets=args.min_packets,
        lateness_min=args.lateness_min,
        sequence_key=args.sequence_key,
        max_seq_len=args.max_seq_len,
        seed=args.seed,
        country_table=args.country_table,
    )


def cmd_run(args) -> int:
    config = _config_from_args(args)
    pipeline = Pipeline(config)

    server = None
    if args.serve:
        host, _, port = args.serve.rpartition(":")
        view = StateView(config.state_dir, pipeline=pipeline, table=pipeline.table)
        server = make_server((host or "127.0.0.1", int(port)), view, ui_dir=args.ui_dir)
        serve_forever_in_thread(server)
        print(f"serving API on http://{host or '127.0.0.1'}:{port}")

    handles = [_open_input(p) for p in args.input]
    try:
        summary = pipeline.run(handles)
    finally:
        for fh in handles:
            if fh is not sys.stdin:
                fh.close()
    print(summary.format())

    if server is not None:
        print("pipeline finished; API still serving (Ctrl-C to stop)")
        try:
            import time

            while True:
                time.sleep(1)
        except KeyboardInterrupt:
            server.shutdown()
    return 0


def cmd_serve(args) -> int:
    table = None
    if args.table and os.path.exists(args.table):
        table = EmbeddingTable.load(args.table)
    view = StateView(args.state_dir, pipeline=None, table=table)
    host, _, port = args.listen.rpartition(":")
    server = make_server((host or "127.0.0.1", int(port)), view, ui_dir=args.ui_dir)
    print(f"serving http://{host or '127.0.0.1'}:{port} from {args.state_dir}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def _registry_path(args) -> str:
    if args.registry:
        return args.registry
    if args.state_dir:
        return os.path.join(args.state_dir, REGISTRY_FILE)
    raise SystemExit("provide --registry <file> or --state-dir <dir>")


def cmd_registry(args) -> int:
    path = _registry_path(args)
    registry = ConceptRegistry.load(path)
    if args.registry_cmd == "list":
        for model in registry.ordered():
            print(
                f"{model.concept_id}  first={model.first_seen:<5d} last={model.last_seen:<5d} "
                f"seen={model.occurrence_count:<4d} {model.category.value:<14s} "
                f"{model.severity.value:<10s} {model.note}"
            )
        return 0
    if args.registry_cmd == "show":
        model = registry.get(args.id)
        data = model.to_dict()
        data.pop("forest")
        print(json.dumps(data, indent=2, sort_keys=True))
        return 0
    if args.registry_cmd == "annotate":
        registry.annotate(args.id, Severity(args.severity), note=args.note)
        registry.save(path)
        print(f"{args.id} -> {args.severity}")
        return 0
    raise SystemExit(f"unknown registry command {args.registry_cmd!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dante",
        description="Darknet traffic mining: embeddings, temporal clustering, alerts.",
    )
    parser.add_argument("--version", action="version", version=f"dante {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simgen", help="generate synthetic darknet traffic")
    p.add_argument("--scenario", required=True, help="catalog name or scenario file")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--truth", help="write ground-truth JSON here")
    p.set_defaults(func=cmd_simgen)

    p = sub.add_parser("extract-corpus", help="flow log -> port-sequence corpus")
    p.add_argument("--input", required=True, help="flow log path or -")
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--out", required=True)
    _add_window_flags(p)
    p.set_defaults(func=cmd_extract_corpus)

    p = sub.add_parser("train-embeddings", help="train the port embedding table")
    p.add_argument("--corpus", required=True, help="one space-separated port sequence per line")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--context-window", type=int, default=5)
    p.add_argument("--negative", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.025)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_embeddings)

    p = sub.add_parser("nearest", help="nearest ports by embedding similarity")
    p.add_argument("--table", required=True)
    p.add_argument("--port", type=int, required=True)
    p.add_argument("-k", type=int, default=10)
    p.set_defaults(func=cmd_nearest)

    p = sub.add_parser("run", help="run the pipeline over a flow log")
    p.add_argument("--config", help="pipeline config JSON (overrides the flags below)")
    p.add_argument("--input", action="append", required=True,
                   help="flow log path or -; repeat for multiple sources")
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--table", help="embedding table path")
    p.add_argument("--state-dir", help="state directory (checkpoints, reports, alerts)")
    _add_window_flags(p)
    p.add_argument("--eps", type=float, default=0.3)
    p.add_argument("--min-pts", type=int, default=30)
    p.add_argument("--clusterer", choices=["dbscan", "kmeans"], default="dbscan")
    p.add_argument("--jaccard-threshold", type=float, default=0.3)
    p.add_argument("--beta", type=float, default=0.7)
    p.add_argument("--min-cluster-size", type=int, default=100)
    p.add_argument("--spike-factor", type=float, default=3.0)
    p.add_argument("--trailing-windows", type=int, default=24)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--country-table", default=None)
    p.add_argument("--serve", metavar="ADDR:PORT", help="also serve the HTTP API")
    p.add_argument("--ui-dir", default=_default_ui_dir(), help="static UI assets for /ui/")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="serve the API over an existing state dir")
    p.add_argument("--state-dir", required=True)
    p.add_argument("--listen", default="127.0.0.1:8300")
    p.add_argument("--table", help="embedding table (enables port context)")
    p.add_argument("--ui-dir", default=_default_ui_dir())
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("registry", help="inspect or annotate the concept registry")
    p.add_argument("registry_cmd", choices=["list", "show", "annotate"])
    p.add_argument("id", nargs="?", help="concept id for show/annotate")
    p.add_argument("--registry", help="registry file path")
    p.add_argument("--state-dir", help="state dir containing the registry")
    p.add_argument("--severity", choices=[s.value for s in Severity], default="malicious")
    p.add_argument("--note", default="")
    p.set_defaults(func=cmd_registry)

    return parser


def _default_ui_dir() -> str | None:
    here = os.path.dirname(os.path.abspath(__file__))
    for candidate in (
        os.path.join(here, "..", "..", "frontend", "dist"),
        os.path.join(os.getcwd(), "frontend", "dist"),
    ):
        if os.path.isdir(candidate):
            return os.path.realpath(candidate)
    return None


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
