"""Command-line interface.

Subcommands: attack, sweep, classify, export-anno, aggregate-anno,
serve-victim, gen-fixture.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .attack import AttackConfig
from .constraints import ConstraintConfig
from .corpus import save_corpus
from .fixtures import make_fixture_corpus
from .oracle import OverlapRanker, victim_request_handler
from .protocol import TransportError, make_http_server, serve_stdio
from .runner import (
    ANNOTATION_TASKS,
    BUILTIN_VICTIMS,
    AttackTypeClassifier,
    ExperimentConfig,
    ablation_sweep,
    aggregate_annotations,
    export_annotation_batch,
    run_experiment,
    write_annotation_batch,
)


def _parse_constraints(spec: str, epsilon: float | None) -> ConstraintConfig:
    """Comma list of enabled checks out of {stopwords,pos,sim,grammar}; 'none' for raw."""
    if spec == "none":
        enabled = set()
    else:
        enabled = {part.strip() for part in spec.split(",") if part.strip()}
    unknown = enabled - {"stopwords", "pos", "sim", "grammar"}
    if unknown:
        raise SystemExit(f"unknown constraint(s): {sorted(unknown)}")
    return ConstraintConfig(
        use_stopwords="stopwords" in enabled,
        use_pos="pos" in enabled,
        sim_threshold=(epsilon if epsilon is not None else 0.5) if "sim" in enabled else None,
        use_grammar="grammar" in enabled,
    )


def _experiment_config(args) -> ExperimentConfig:
    if args.stopwords or args.pos_lexicon:
        from .lexsub import configure

        configure(stopwords_path=args.stopwords, pos_lexicon_path=args.pos_lexicon)
    attack = AttackConfig(
        provider=args.provider,
        k=args.k,
        constraints=_parse_constraints(args.constraints, args.epsilon),
        target=args.target,
        max_substitutions=args.max_substitutions,
        seed=args.seed,
    )
    return ExperimentConfig(
        corpus_path=args.corpus,
        corpus_format=args.format,
        relevance_path=args.relevance,
        victim=args.victim,
        attack=attack,
        word_selection=args.word_selection,
        embeddings_path=args.embeddings,
        mlm_endpoint=args.mlm_endpoint,
        encoder_endpoint=args.encoder_endpoint,
        grammar_endpoint=args.grammar_endpoint,
        max_instances=args.max_instances,
        round_ids=tuple(args.rounds) if args.rounds else None,
        out_dir=args.out,
        workers=args.workers,
    )


def _add_experiment_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", default=None,
                        help="corpus file; omit to use the built-in fixture corpus")
    parser.add_argument("--format", default="toy", choices=["toy", "visdial_v1"])
    parser.add_argument("--relevance", default=None,
                        help="dense-relevance side file (visdial_v1 only)")
    parser.add_argument("--victim", default="builtin:overlap-q",
                        help=f"builtin:<{'|'.join(sorted(BUILTIN_VICTIMS))}>, url:..., or cmd:...")
    parser.add_argument("--provider", default="embedding", choices=["embedding", "mlm"])
    parser.add_argument("--embeddings", default=None,
                        help="word-vector file; omit for the bundled fixture table")
    parser.add_argument("--stopwords", default=None,
                        help="custom stopword list; omit for the bundled file")
    parser.add_argument("--pos-lexicon", default=None,
                        help="custom POS lexicon; omit for the bundled file")
    parser.add_argument("--mlm-endpoint", default=None)
    parser.add_argument("--encoder-endpoint", default=None)
    parser.add_argument("--grammar-endpoint", default=None)
    parser.add_argument("--epsilon", type=float, default=0.5)
    parser.add_argument("--k", type=int, default=50)
    parser.add_argument("--target", default="question", choices=["question", "history"])
    parser.add_argument("--constraints", default="stopwords,pos,sim",
                        help="comma list from {stopwords,pos,sim,grammar}, or 'none'")
    parser.add_argument("--word-selection", default="importance",
                        choices=["importance", "random"])
    parser.add_argument("--max-substitutions", type=int, default=None)
    parser.add_argument("--max-instances", type=int, default=None)
    parser.add_argument("--rounds", type=int, nargs="*", default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--workers", type=int, default=1)


def cmd_attack(args) -> int:
    cfg = _experiment_config(args)
    try:
        outcome = run_experiment(cfg)
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 2
    print(outcome.report.format_table())
    if cfg.attack.target == "history":
        shares = outcome.segment_shares()
        if shares:
            print("attacked segments: " + "  ".join(
                f"{kind} {share * 100:.1f}%" for kind, share in shares.items()))
    if cfg.out_dir:
        print(f"results written to {cfg.out_dir}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _experiment_config(args)
    try:
        entries = ablation_sweep(cfg, args.axis, values=args.values)
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 2
    width = max(len(e.label) for e in entries)
    print(f"{'setting':<{width}}  success  Aft.R@1  Aft.NDCG  Aft.MRR")
    for entry in entries:
        r = entry.report

        def fmt(name):
            value = r.metrics[name].after
            return "-" if value is None else f"{value * 100:.1f}"

        print(f"{entry.label:<{width}}  {r.n_success:>7}  {fmt('R@1'):>7}  "
              f"{fmt('NDCG'):>8}  {fmt('MRR'):>7}")
    return 0


def cmd_classify(args) -> int:
    classifier = AttackTypeClassifier()
    pairs = []
    if args.pairs:
        for line in Path(args.pairs).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                a, b = line.split()[:2]
                pairs.append((a, b))
    elif args.words:
        pairs.append(tuple(args.words))
    else:
        raise SystemExit("give --pairs FILE or two words")
    for a, b in pairs:
        print(f"{a}\t{b}\t{classifier.classify(a, b)}")
    return 0


def cmd_export_anno(args) -> int:
    records = [json.loads(line) for line in Path(args.results).read_text(encoding="utf-8").splitlines() if line.strip()]
    tags_by_image = None
    if args.corpus:
        from .corpus import load_corpus

        tags_by_image = {
            d.image_id: d.image_tags
            for d in load_corpus(args.corpus, args.format, args.relevance)
        }
    items = export_annotation_batch(records, tasks=args.tasks, sample=args.sample,
                                    seed=args.seed, tags_by_image=tags_by_image)
    write_annotation_batch(items, args.out)
    print(f"wrote {len(items)} items to {args.out}")
    return 0


def cmd_aggregate_anno(args) -> int:
    summary = aggregate_annotations(args.ratings)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_serve_victim(args) -> int:
    victim = OverlapRanker(BUILTIN_VICTIMS[args.preset])
    handler = victim_request_handler(victim)
    if args.stdio:
        serve_stdio(handler)
        return 0
    server = make_http_server(handler, host=args.host, port=args.port)
    host, port = server.server_address[:2]
    print(f"serving victim {args.preset} at http://{host}:{port}/", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_gen_fixture(args) -> int:
    corpus = make_fixture_corpus(args.dialogs, args.rounds_per_dialog, seed=args.seed)
    save_corpus(corpus, args.out)
    n = sum(len(d.rounds) for d in corpus)
    print(f"wrote {len(corpus)} dialogs ({n} instances) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialattack",
        description="Black-box synonym-substitution attacks on answer-ranking dialog models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", help="attack a corpus and report robustness metrics")
    _add_experiment_args(p)
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("sweep", help="run an ablation sweep")
    _add_experiment_args(p)
    p.add_argument("--axis", required=True,
                   choices=["epsilon", "constraint_stack", "word_selection", "stopwords"])
    p.add_argument("--values", type=float, nargs="*", default=None,
                   help="threshold values for the epsilon axis")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("classify", help="classify substitution pairs by attack type")
    p.add_argument("words", nargs="*", help="one original/replacement pair")
    p.add_argument("--pairs", default=None, help="file with one 'original replacement' per line")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("export-anno", help="export successful attacks as an annotation batch")
    p.add_argument("--results", required=True, help="results.jsonl from an attack run")
    p.add_argument("--out", required=True)
    p.add_argument("--tasks", nargs="*", default=list(ANNOTATION_TASKS))
    p.add_argument("--sample", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corpus", default=None,
                   help="corpus file to join image tags into with-image items")
    p.add_argument("--format", default="toy", choices=["toy", "visdial_v1"])
    p.add_argument("--relevance", default=None)
    p.set_defaults(fn=cmd_export_anno)

    p = sub.add_parser("aggregate-anno", help="aggregate a ratings file")
    p.add_argument("--ratings", required=True)
    p.set_defaults(fn=cmd_aggregate_anno)

    p = sub.add_parser("serve-victim", help="serve a builtin ranker behind the wire protocol")
    p.add_argument("--preset", default="overlap-q", choices=sorted(BUILTIN_VICTIMS))
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8300)
    p.add_argument("--stdio", action="store_true",
                   help="serve newline-delimited JSON on stdio instead of HTTP")
    p.set_defaults(fn=cmd_serve_victim)

    p = sub.add_parser("gen-fixture", help="write the fixture corpus as a toy JSONL file")
    p.add_argument("--out", required=True)
    p.add_argument("--dialogs", type=int, default=40)
    p.add_argument("--rounds-per-dialog", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gen_fixture)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
