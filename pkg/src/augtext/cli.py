"""Command-line entry point.

Subcommands cover the whole pipeline: augment a dataset, filter augmented
sentences by loss, run the method-comparison and training-size protocols,
render t-SNE projections, and time augmentation backends. Every command
writes a JSON run manifest next to its outputs; with --backend mock all
commands are hermetic and reproduce byte-identically from the same seed.

Exit codes: 2 bad flags, 3 backend unavailable, 4 data errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugmentParams, augment_dataset, load_lexicon, load_stopwords
from .backends import BackendConfig, Backends
from .classifier import TrainConfig, load_params
from .corpus import load_augmented, load_csv, load_jsonl, sample_subset, save_augmented
from .errors import BackendError, BackendUnavailable, DataError
from .experiments import compare_methods, size_curve, time_augmentation, tsne_2d
from .filtering import FilterConfig, filter_lowest_loss, score_augmented
from .reports import (
    RunManifest,
    now_iso,
    results_markdown,
    write_compare_report,
    write_size_curve,
    write_timing_csv,
    write_tsne,
)

EXIT_BAD_FLAGS = 2
EXIT_BACKEND = 3
EXIT_DATA = 4

AUG_CHOICES = ["imf", "ri", "rs", "rd", "sr", "bt", "br"]
COMPARE_CHOICES = ["vanilla", "real_sample"] + AUG_CHOICES


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(_apply_config_file(parser, argv))
    try:
        return args.func(args, argv)
    except BackendError as e:
        print(f"backend error: {e}", file=sys.stderr)
        return EXIT_BACKEND
    except (DataError, FileNotFoundError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Expand `key = value` lines from --config into flags.

    Config entries are injected right after the subcommand so flags given
    explicitly on the command line still win (argparse keeps the last
    occurrence of a repeated option).
    """
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return argv
    path = Path(known.config)
    if not path.exists():
        parser.error(f"config file not found: {path}")
    injected: list[str] = []
    for line_no, line in enumerate(path.read_text("utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            parser.error(f"{path}:{line_no}: expected 'key = value'")
        injected += [f"--{key.strip().replace('_', '-')}", value.strip()]
    for i, token in enumerate(argv):
        if not token.startswith("-"):
            return argv[: i + 1] + injected + argv[i + 1 :]
    return argv + injected


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--backend", choices=["mock", "http"], default="mock",
                     help="model backend (default: mock, fully hermetic)")
    sub.add_argument("--shim-url", default=None,
                     help="model sidecar base URL (or env AUGTEXT_SHIM_URL)")
    sub.add_argument("--model-name", default=None, help="model label for manifests")
    sub.add_argument("--timeout", type=float, default=30.0)
    sub.add_argument("--retries", type=int, default=2)
    sub.add_argument("--max-inflight", type=int, default=4)
    sub.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                     help="parallel augmentation workers (default: all cores)")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out-dir", default=".", help="directory for artifacts")
    sub.add_argument("--config", default=None, help="key = value defaults file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="augtext",
        description="Text augmentation via iterative mask filling, with baselines and a benchmark harness.",
    )
    parser.add_argument("--version", action="version", version=f"augtext {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("augment", help="augment a dataset, one JSONL out")
    _add_common(p)
    p.add_argument("--method", choices=AUG_CHOICES, required=True)
    p.add_argument("--input", required=True, help="dataset (.jsonl or .csv)")
    p.add_argument("--output", required=True, help="augmented JSONL path")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--n-aug", type=int, default=1)
    p.add_argument("--pivot", default="tr")
    p.add_argument("--lexicon", default=None, help="synonym lexicon TSV")
    p.add_argument("--stopwords", default=None, help="stopword list file")
    p.set_defaults(func=cmd_augment)

    p = commands.add_parser("filter", help="keep the lowest-loss augmented sentences")
    _add_common(p)
    p.add_argument("--keep", type=float, required=True, help="fraction to keep, e.g. 0.8")
    p.add_argument("--vanilla-model", required=True, help="trained params .npz")
    p.add_argument("--aug", required=True, help="augmented JSONL to filter")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_filter)

    p = commands.add_parser("compare", help="method comparison table")
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--train-size", type=int, required=True)
    p.add_argument("--methods", default="vanilla,real_sample," + ",".join(AUG_CHOICES))
    p.add_argument("--n-aug", default="1,4", help="comma list of augmentation ratios")
    p.add_argument("--keep", default="0.8", help="comma list of keep fractions")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--pivot", default="tr")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--stopwords", default=None)
    p.set_defaults(func=cmd_compare)

    p = commands.add_parser("curve", help="training-size vs accuracy curve")
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--sizes", required=True, help="comma list of training sizes")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.set_defaults(func=cmd_curve)

    p = commands.add_parser("tsne", help="2-d projection of real vs augmented texts")
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--n", type=int, default=100, help="sampled examples per dataset")
    p.add_argument("--method", choices=AUG_CHOICES, default="imf")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--pivot", default="tr")
    p.add_argument("--perplexity", type=float, default=None)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--stopwords", default=None)
    p.set_defaults(func=cmd_tsne)

    p = commands.add_parser("bench", help="time augmenting sentences")
    _add_common(p)
    p.add_argument("--method", choices=AUG_CHOICES, required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--input", default=None, help="dataset to draw sentences from")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--pivot", default="tr")
    p.set_defaults(func=cmd_bench)

    p = commands.add_parser("rerun", help="re-execute a recorded run manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_rerun)

    return parser


def _backends(args) -> Backends:
    if args.backend == "http":
        try:
            config = BackendConfig(
                kind="http",
                endpoint=args.shim_url,
                model_name=args.model_name,
                timeout=args.timeout,
                retries=args.retries,
                max_inflight=args.max_inflight,
            )
        except ValueError as e:
            raise BackendUnavailable(str(e)) from e
        return Backends.http(config)
    return Backends.mock()


def _load_dataset(path: str):
    if path.endswith(".csv"):
        return load_csv(path)
    return load_jsonl(path)


def _resources(args):
    lexicon = load_lexicon(getattr(args, "lexicon", None))
    stopwords = load_stopwords(getattr(args, "stopwords", None))
    return lexicon, stopwords


def _manifest(args, argv: list[str], command: str) -> RunManifest:
    config = {
        k: v for k, v in vars(args).items()
        if k not in ("func",) and isinstance(v, (str, int, float, bool, type(None)))
    }
    return RunManifest(
        command=command,
        argv=argv,
        config=config,
        global_seed=getattr(args, "seed", 0),
        backend={},
        started_at=now_iso(),
    )


def _require_backend_ready(args, backends: Backends) -> None:
    """Fail fast (exit 3) when an http backend is unreachable."""
    if args.backend == "http":
        backends.mlm.health()


def cmd_augment(args, argv) -> int:
    backends = _backends(args)
    _require_backend_ready(args, backends)
    lexicon, stopwords = _resources(args)
    dataset = _load_dataset(args.input)
    params = AugmentParams(
        k=args.k, alpha=args.alpha, n_aug=args.n_aug,
        pivot_lang=args.pivot, global_seed=args.seed,
    )
    manifest = _manifest(args, argv, "augment")
    manifest.backend = backends.identity()
    items = augment_dataset(
        dataset, args.method, params, backends,
        lexicon=lexicon, stopwords=stopwords, jobs=args.jobs,
    )
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_augmented(out, items)
    manifest.finished_at = now_iso()
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    print(f"wrote {len(items)} augmented examples to {out}")
    return 0


def cmd_filter(args, argv) -> int:
    if not Path(args.vanilla_model).exists():
        raise DataError(f"model file not found: {args.vanilla_model}")
    params = load_params(args.vanilla_model)
    items = load_augmented(args.aug)
    manifest = _manifest(args, argv, "filter")
    try:
        if any(item.loss is None for item in items):
            backends = _backends(args)
            _require_backend_ready(args, backends)
            manifest.backend = backends.identity()
            items = score_augmented(params, backends.encoder, items)
        kept = filter_lowest_loss(items, FilterConfig(keep_fraction=args.keep))
    except ValueError as e:
        raise DataError(f"unscorable items: {e}") from e
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_augmented(out, kept)
    manifest.finished_at = now_iso()
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    print(f"kept {len(kept)} of {len(items)} augmented examples ({len(items) - len(kept)} dropped)")
    return 0


def _train_cfg(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )


def cmd_compare(args, argv) -> int:
    backends = _backends(args)
    _require_backend_ready(args, backends)
    lexicon, stopwords = _resources(args)
    dataset = _load_dataset(args.input)
    test = _load_dataset(args.test)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in COMPARE_CHOICES]
    if bad:
        print(f"unknown methods {bad}; choose from {COMPARE_CHOICES}", file=sys.stderr)
        return EXIT_BAD_FLAGS
    n_augs = [int(x) for x in args.n_aug.split(",") if x.strip()]
    keeps = [float(x) for x in args.keep.split(",") if x.strip()]
    manifest = _manifest(args, argv, "compare")
    manifest.backend = backends.identity()
    report = compare_methods(
        dataset, test, args.train_size, methods,
        n_augs=n_augs, keep_fractions=keeps, n_runs=args.runs,
        backends=backends, cfg=_train_cfg(args),
        aug_params=AugmentParams(k=args.k, alpha=args.alpha,
                                 pivot_lang=args.pivot, global_seed=args.seed),
        lexicon=lexicon, stopwords=stopwords, jobs=args.jobs,
    )
    paths = write_compare_report(report, args.out_dir)
    manifest.finished_at = now_iso()
    manifest.write(Path(args.out_dir) / "compare.manifest.json")
    print(results_markdown(report.results))
    if report.failures:
        print(f"{len(report.failures)} cell(s) failed; see {paths['markdown']}", file=sys.stderr)
    return 0


def cmd_curve(args, argv) -> int:
    backends = _backends(args)
    _require_backend_ready(args, backends)
    dataset = _load_dataset(args.input)
    test = _load_dataset(args.test)
    sizes = [int(x) for x in args.sizes.split(",") if x.strip()]
    manifest = _manifest(args, argv, "curve")
    manifest.backend = backends.identity()
    results = size_curve(dataset, test, sizes, args.runs, backends.encoder, _train_cfg(args))
    write_size_curve(results, args.out_dir)
    manifest.finished_at = now_iso()
    manifest.write(Path(args.out_dir) / "curve.manifest.json")
    print(results_markdown(results))
    return 0


def cmd_tsne(args, argv) -> int:
    backends = _backends(args)
    _require_backend_ready(args, backends)
    lexicon, stopwords = _resources(args)
    dataset = _load_dataset(args.input)
    n = min(args.n, len(dataset))
    sampled = sample_subset(dataset, n, args.seed)
    params = AugmentParams(k=args.k, alpha=args.alpha,
                           pivot_lang=args.pivot, global_seed=args.seed)
    manifest = _manifest(args, argv, "tsne")
    manifest.backend = backends.identity()
    augmented = augment_dataset(sampled, args.method, params, backends,
                                lexicon=lexicon, stopwords=stopwords, jobs=args.jobs)
    texts = [ex.text for ex in sampled.examples] + [item.text for item in augmented]
    vectors = backends.encoder.encode(texts)
    coords = tsne_2d(vectors, perplexity=args.perplexity,
                     iterations=args.iterations, seed=args.seed)
    ids = [ex.id for ex in sampled.examples] + [item.orig_id for item in augmented]
    flags = [False] * len(sampled.examples) + [True] * len(augmented)
    paths = write_tsne(coords, ids, flags, args.out_dir)
    manifest.finished_at = now_iso()
    manifest.write(Path(args.out_dir) / "tsne.manifest.json")
    print(f"wrote {paths['csv']} and {paths['figure']}")
    return 0


def _bench_sentences(args) -> list[str]:
    if args.input:
        dataset = _load_dataset(args.input)
        texts = [ex.text for ex in dataset.examples]
        if len(texts) < args.n:
            raise DataError(f"dataset has {len(texts)} sentences, need {args.n}")
        return texts[: args.n]
    rng = np.random.default_rng(args.seed)
    vocab = ("market", "report", "city", "game", "storm", "price", "team",
             "health", "music", "road", "water", "film", "law", "peace")
    return [
        " ".join(rng.choice(vocab, size=8)) for _ in range(args.n)
    ]


def cmd_bench(args, argv) -> int:
    backends = _backends(args)
    _require_backend_ready(args, backends)
    lexicon, stopwords = _resources(args)
    sentences = _bench_sentences(args)
    params = AugmentParams(k=args.k, alpha=args.alpha,
                           pivot_lang=args.pivot, global_seed=args.seed)
    manifest = _manifest(args, argv, "bench")
    manifest.backend = backends.identity()
    row = time_augmentation(args.method, sentences, backends, params,
                            lexicon=lexicon, stopwords=stopwords)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_timing_csv([row], out_dir / "bench.csv")
    manifest.finished_at = now_iso()
    manifest.write(out_dir / "bench.manifest.json")
    print(f"{row.method}: {row.n_sentences} sentences in {row.seconds:.3f} s "
          f"(model {row.model}, params {row.param_count})")
    return 0


def cmd_rerun(args, argv) -> int:
    manifest = RunManifest.read(args.manifest)
    print(f"re-executing: augtext {' '.join(manifest.argv)}")
    return main(manifest.argv)


if __name__ == "__main__":
    sys.exit(main())
