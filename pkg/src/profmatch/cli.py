"""Command line entry point: generate, fit-lda, train, match, evaluate,
mitigate and experiment subcommands.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 infeasible countermeasure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .countermeasures import (ImportanceProfile, InfeasibleError, countermeasure_experiment, default_tau_grid,
                              enumerate_levels, optimize_plan, save_sweep)
from .evaluation import GLOBAL, TARGETED, evaluate, precision_recall_curve, save_curve, save_report
from .matching import (attack_from_matrix, build_score_matrix, load_matches, sample_victims, save_matches,
                       save_matrix)
from .pipeline import (EVAL_SEED_OFFSET, EXPERIMENTS, TRAINERS, baseline_comparison, coupled_only,
                       experiment_features, fit_topic_model, labeled_features, prepare_seed, run_experiments,
                       train_on_features)
from .profiles import DataError, load_corpus, load_labels, save_corpus, save_labels
from .reference import load_providers
from .similarity import SimilarityConfig, compute_similarity_vector
from .synth import GeneratorConfig, generate, load_vocab_spec, parse_config_text
from .topics import load_lda, save_lda
from .training import LINEAR, load_model, save_model, score_pair

log = logging.getLogger("profmatch")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; we reserve 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- manifest --------------------------------------------------------------------

def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def write_json(data, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_safe(data), fh, sort_keys=True, indent=1)
        fh.write("\n")


class Run:
    """Collects what a manifest records while a subcommand executes."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.started = _now()
        self.config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "verbose")}
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.seeds: dict[str, int] = {}
        self.model_hash: str | None = None
        self.sub_models: dict[str, str] = {}
        self.extra: dict = {}

    def input(self, path):
        if path is not None:
            self.inputs[str(path)] = _sha256(path)
        return path

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def finish(self) -> None:
        """One manifest per output directory, listing the files in it."""
        finished = _now()
        by_dir: dict[str, list[str]] = {}
        for name in sorted(set(self.outputs)):
            head, _, tail = name.rpartition("/")
            by_dir.setdefault(head, []).append(name)
        by_dir.setdefault("", [])
        for sub, names in by_dir.items():
            manifest = {
                "command": self.command if not sub else f"{self.command} {sub}",
                "config": self.config,
                "inputs": self.inputs,
                "outputs": {n.rpartition("/")[2]: _sha256(self.out / n) for n in names},
                "seeds": self.seeds,
                "model_hash": self.sub_models.get(sub, self.model_hash),
                "version": __version__,
                "started": self.started,
                "finished": finished,
            }
            if not sub:
                manifest.update(self.extra)
            write_json(manifest, self.out / sub / "manifest.json")


# --- shared loading ----------------------------------------------------------------

def _providers(args, run: Run):
    for p in (args.gazetteer, args.names):
        run.input(p)
    if args.lexicon:
        run.input(Path(args.lexicon) / "positive.txt")
        run.input(Path(args.lexicon) / "negative.txt")
    return load_providers(args.gazetteer, args.names, args.lexicon)


def _require(args, *flags):
    for flag in flags:
        if getattr(args, flag.lstrip("-").replace("-", "_")) is None:
            raise UsageError(f"{args.command} needs {flag}")


def _corpora(args, run: Run):
    _require(args, "--aux", "--target")
    aux = load_corpus(run.input(args.aux), "aux")
    target = load_corpus(run.input(args.target), "target")
    return aux, target


def _labels(args, run: Run, aux, target):
    _require(args, "--labels")
    return load_labels(run.input(args.labels), aux, target)


def _topic_model(args, run: Run):
    return load_lda(run.input(args.lda_model)) if args.lda_model else None


def _generator_config(args, run: Run) -> GeneratorConfig:
    if args.config:
        with open(run.input(args.config), encoding="utf-8") as fh:
            cfg = parse_config_text(fh.read())
    else:
        cfg = GeneratorConfig()
    if args.zero_noise:
        cfg = GeneratorConfig.zero_noise(**{k: getattr(cfg, k) for k in
                                            ("n_coupled", "n_uncoupled_per_side", "seed", "posts_per_profile",
                                             "embedding_dim", "n_alternate_photos", "alternate_photo_sigma",
                                             "words_per_post")})
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "n_coupled", None) is not None:
        changes["n_coupled"] = args.n_coupled
    if getattr(args, "n_uncoupled", None) is not None:
        changes["n_uncoupled_per_side"] = args.n_uncoupled
    return GeneratorConfig.from_dict({**cfg.to_dict(), **changes})


# --- subcommands --------------------------------------------------------------------

def cmd_generate(args, run: Run) -> int:
    cfg = _generator_config(args, run)
    providers = _providers(args, run)
    vocab = load_vocab_spec(run.input(args.vocab_spec)) if args.vocab_spec else None
    aux, target, labels = generate(cfg, providers.gazetteer, providers.lexicon, vocab, providers.names)
    save_corpus(aux, run.path("aux.jsonl"))
    save_corpus(target, run.path("target.jsonl"))
    save_labels(labels, run.path("labels.csv"))
    run.config["generator"] = cfg.to_dict()
    run.seeds["generator"] = cfg.seed
    return EXIT_OK


def cmd_fit_lda(args, run: Run) -> int:
    aux, target = _corpora(args, run)
    seed = args.seed or 0
    model = fit_topic_model([aux, target], seed=seed, theta=args.topics, iterations=args.iterations,
                            limit=args.limit)
    save_lda(model, run.path("lda_model.json"))
    run.seeds["lda"] = seed
    run.model_hash = model.digest()
    return EXIT_OK


def cmd_train(args, run: Run) -> int:
    aux, target = _corpora(args, run)
    labels = _labels(args, run, aux, target)
    providers = _providers(args, run)
    lda = _topic_model(args, run)
    config = SimilarityConfig()
    F, y = labeled_features(aux, target, labels, providers, lda, config)
    names = config.feature_names
    exp1 = train_on_features(F, y, names, names, args.trainer, config, args.C, args.epsilon)
    model = exp1
    if args.experiment != "exp1":
        model = train_on_features(F, y, names, experiment_features(args.experiment, names, exp1), args.trainer,
                                  config, args.C, args.epsilon)
    save_model(model, run.path("model.json"))
    run.model_hash = model.digest()
    run.extra["weights"] = dict(zip(model.feature_names, model.weights.tolist()))
    run.extra["w0"] = model.w0
    return EXIT_OK


def cmd_match(args, run: Run) -> int:
    _require(args, "--model")
    aux, target = _corpora(args, run)
    model = load_model(run.input(args.model))
    run.model_hash = model.digest()
    providers = _providers(args, run)
    lda = _topic_model(args, run)
    if args.victims:
        victims = [line.strip() for line in open(run.input(args.victims), encoding="utf-8") if line.strip()]
    elif args.n_victims:
        victims = sample_victims(target.ids, args.n_victims, args.seed or 0)
        run.seeds["victims"] = args.seed or 0
    else:
        victims = None
    if victims is not None:
        unknown = [v for v in victims if v not in target]
        if unknown:
            raise DataError(f"unknown victim id {unknown[0]!r}")
        target = target.subset(victims)
    matrix = build_score_matrix(aux, target, model, providers, lda)
    threshold = -np.inf if args.threshold is None else args.threshold
    result = attack_from_matrix(matrix, threshold)
    save_matrix(matrix, run.path("matrix.csv"))
    save_matches(result, run.path("matches.csv"))
    run.extra["attack_kind"] = TARGETED if victims is not None else GLOBAL
    return EXIT_OK


def cmd_evaluate(args, run: Run) -> int:
    _require(args, "--matches")
    aux, target = _corpora(args, run)
    labels = _labels(args, run, aux, target)
    result = load_matches(run.input(args.matches))
    kind = args.attack
    curve, operating = precision_recall_curve(result, labels, attack_kind=kind)
    if args.threshold is not None:
        threshold = args.threshold
    elif operating is not None:
        threshold = operating.threshold
    else:
        threshold = result.threshold
    report = evaluate(result.with_threshold(threshold), labels, kind)
    save_report(report, run.path("eval.json"),
                {"operating_threshold": None if operating is None else operating.threshold})
    save_curve(curve, run.path("curve.csv"))
    return EXIT_OK


def _importance(args, run: Run) -> ImportanceProfile:
    if not args.importance:
        return ImportanceProfile()
    with open(run.input(args.importance), encoding="utf-8") as fh:
        return ImportanceProfile({str(k): float(v) for k, v in json.load(fh).items()})


def cmd_mitigate(args, run: Run) -> int:
    _require(args, "--model", "--tau")
    aux, target = _corpora(args, run)
    model = load_model(run.input(args.model))
    if model.kind != LINEAR:
        raise DataError(f"{args.model}: mitigation needs a linear regression model")
    run.model_hash = model.digest()
    providers = _providers(args, run)
    lda = _topic_model(args, run)
    importance = _importance(args, run)
    if args.pair:
        pairs = [tuple(p) for p in args.pair]
        for a, t in pairs:
            if a not in aux:
                raise DataError(f"unknown aux id {a!r}")
            if t not in target:
                raise DataError(f"unknown target id {t!r}")
    else:
        labels = _labels(args, run, aux, target)
        pairs = [(lab.aux_id, lab.target_id) for lab in labels if lab.coupled]
    plans = []
    infeasible = 0
    for a, t in pairs:
        pa, pt = aux.get(a), target.get(t)
        levels = enumerate_levels((pa, pt), model, providers, lda, args.grid_size)
        baseline = score_pair(model, compute_similarity_vector(pa, pt, providers, lda, model.config))
        entry = {"aux_id": a, "target_id": t, "baseline_similarity": baseline, "tau": args.tau}
        try:
            plan = optimize_plan(levels, importance, model, args.tau)
            entry.update(plan.to_dict())
            entry["feasible"] = True
        except InfeasibleError as exc:
            entry.update({"feasible": False, "min_similarity": exc.min_similarity})
            infeasible += 1
        plans.append(entry)
    write_json({"plans": plans, "infeasible_count": infeasible}, run.path("plans.json"))
    if infeasible:
        log.error("%d of %d pairs cannot reach tau=%g", infeasible, len(pairs), args.tau)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _save_outcome(directory: Path, model, outcome, run: Run, prefix: str) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for name, writer in (("model.json", lambda p: save_model(model, p)),
                         ("matrix.csv", lambda p: save_matrix(outcome.matrix, p)),
                         ("matches.csv", lambda p: save_matches(outcome.result, p)),
                         ("eval.json", lambda p: save_report(outcome.report, p, {
                             "operating_threshold": None if outcome.operating is None
                             else outcome.operating.threshold})),
                         ("curve.csv", lambda p: save_curve(outcome.curve, p))):
        writer(run.path(f"{prefix}/{name}"))


def cmd_experiment(args, run: Run) -> int:
    cfg = _generator_config(args, run)
    providers = _providers(args, run)
    vocab = load_vocab_spec(run.input(args.vocab_spec)) if args.vocab_spec else None
    seed = cfg.seed
    train_cfg = test_cfg = None
    if args.n_coupled is not None or args.n_uncoupled is not None:
        # training split three times the evaluation split, as in the default shape
        train_cfg = replace(cfg, n_coupled=3 * cfg.n_coupled, n_uncoupled_per_side=3 * cfg.n_uncoupled_per_side)
        test_cfg = replace(cfg, seed=seed + EVAL_SEED_OFFSET)
    sr = prepare_seed(cfg, seed, providers, vocab, lda_iterations=args.iterations, theta=args.topics,
                      train_config=train_cfg, test_config=test_cfg)
    run.seeds.update({"train": seed, "eval": seed + EVAL_SEED_OFFSET, "lda": seed})
    exps = EXPERIMENTS if args.experiment == "all" else (args.experiment,)
    needed = list(exps)
    if args.countermeasures and args.cm_experiment not in needed:
        needed.append(args.cm_experiment)
    results = run_experiments(sr, needed, args.trainer, args.threshold)
    summary = {}
    for exp in exps:
        model, outcome = results[exp]
        _save_outcome(run.out / exp, model, outcome, run, exp)
        run.sub_models[exp] = model.digest()
        summary[exp] = {"model_hash": model.digest(), **outcome.report.to_dict()}
    if args.baseline:
        model, outcome = results["exp1"] if "exp1" in results else run_experiments(sr, ["exp1"], args.trainer,
                                                                                 args.threshold)["exp1"]
        cmp = baseline_comparison(sr, outcome, args.k)
        write_json({"hungarian": cmp.hungarian.to_dict(), "knn": asdict(cmp.knn), "k": args.k},
                   run.path("baseline.json"))
    if args.countermeasures:
        model, _ = results[args.cm_experiment]
        if model.kind != LINEAR:
            raise UsageError("countermeasures need --trainer linreg")
        aux, target, labels = coupled_only(sr.test)
        base = [score_pair(model, compute_similarity_vector(aux.get(l.aux_id), target.get(l.target_id),
                                                            providers, sr.topic_model, model.config))
                for l in labels]
        rows = countermeasure_experiment(aux, target, labels, model, default_tau_grid(base, args.n_tau),
                                         providers, sr.topic_model)
        save_sweep(rows, run.path("countermeasures.csv"))
        summary["countermeasures"] = [asdict(r) for r in rows]
    write_json(summary, run.path("summary.json"))
    run.model_hash = results[exps[0]][0].digest()
    return EXIT_OK


# --- parser ----------------------------------------------------------------------------

def _add_reference(p):
    p.add_argument("--gazetteer", help="gazetteer CSV (place,lat,lon); bundled file by default")
    p.add_argument("--names", help="name/gender CSV (name,male_count,female_count); bundled by default")
    p.add_argument("--lexicon", help="directory with positive.txt and negative.txt; bundled by default")


def _add_generator(p):
    p.add_argument("--config", help="generator settings file, key=value per line")
    p.add_argument("--zero-noise", action="store_true", help="disable every noise source and missing value")
    p.add_argument("--n-coupled", type=int)
    p.add_argument("--n-uncoupled", type=int, help="uncoupled profiles per side")
    p.add_argument("--vocab-spec", help="topic vocabulary JSON (topic -> words)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="profmatch", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
        p.set_defaults(func=func)
        return p

    p = command("generate", cmd_generate, "write synthetic aux/target corpora and labels")
    _add_generator(p)
    _add_reference(p)

    p = command("fit-lda", cmd_fit_lda, "fit the topic model on the posts of both corpora")
    p.add_argument("--aux")
    p.add_argument("--target")
    p.add_argument("--topics", type=int, default=20)
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--limit", type=int, default=15000, help="maximum number of sampled posts")

    p = command("train", cmd_train, "learn attribute weights from labeled pairs")
    for flag in ("--aux", "--target", "--labels", "--lda-model"):
        p.add_argument(flag)
    p.add_argument("--experiment", choices=EXPERIMENTS, default="exp1")
    p.add_argument("--trainer", choices=sorted(TRAINERS), default="linreg")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.1)
    _add_reference(p)

    p = command("match", cmd_match, "score every pair and run the assignment attack")
    for flag in ("--aux", "--target", "--model", "--lda-model", "--victims"):
        p.add_argument(flag)
    p.add_argument("--n-victims", type=int, help="sample this many target profiles as victims")
    p.add_argument("--threshold", type=float)
    _add_reference(p)

    p = command("evaluate", cmd_evaluate, "precision, recall and success rate of a match run")
    for flag in ("--aux", "--target", "--labels", "--matches"):
        p.add_argument(flag)
    p.add_argument("--attack", choices=(GLOBAL, TARGETED), default=GLOBAL)
    p.add_argument("--threshold", type=float, help="default: operating point of the curve")

    p = command("mitigate", cmd_mitigate, "distortion plans keeping pair scores under tau")
    for flag in ("--aux", "--target", "--labels", "--model", "--lda-model", "--importance"):
        p.add_argument(flag)
    p.add_argument("--tau", type=float)
    p.add_argument("--pair", nargs=2, action="append", metavar=("AUX_ID", "TARGET_ID"))
    p.add_argument("--grid-size", type=int, default=5)
    _add_reference(p)

    p = command("experiment", cmd_experiment, "generate, train and attack in one go")
    p.add_argument("--experiment", choices=EXPERIMENTS + ("all",), default="all")
    p.add_argument("--trainer", choices=sorted(TRAINERS), default="linreg")
    p.add_argument("--threshold", type=float, help="default: operating point per experiment")
    p.add_argument("--topics", type=int, default=20)
    p.add_argument("--iterations", type=int, default=500, help="topic model sweeps")
    p.add_argument("--baseline", action="store_true", help="also run the KNN baseline")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--countermeasures", action="store_true", help="also sweep tau on the coupled pairs")
    p.add_argument("--cm-experiment", choices=EXPERIMENTS, default="exp3")
    p.add_argument("--n-tau", type=int, default=8)
    _add_generator(p)
    _add_reference(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:   # usage errors, --help, --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    run = None
    try:
        run = Run(args.command, args)
        code = args.func(args, run)
        run.finish()
        return code
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"profmatch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"profmatch: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DataError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"profmatch: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
