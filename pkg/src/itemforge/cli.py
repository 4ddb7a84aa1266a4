"""``forge``: command-line entry point for the whole pipeline.

Subcommands: synth, ingest, generate, train, eval, agent-eval, report. Every
artifact carries a metadata record with the tool version, the seed and the
sha256 of each input file. Options can also come from a TOML config file with
one table per subcommand (``[train]``, ``[agent-eval]``, ...); command-line
flags win over config values.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from itemforge import FORMAT_VERSIONS, __version__
from itemforge.agent import eval_conversations, load_conversations, synth_conversations, write_conversations
from itemforge.catalog import CatalogError, load_catalog, load_interactions, synth_catalog, write_catalog
from itemforge.catalog import write_interactions
from itemforge.conditions import ConditionError
from itemforge.encoder import INIT_SCALE, EncoderModel, TokenizerConfig, TrainConfig, TrainingError, train
from itemforge.llm_bridge import DeterministicFallback, LLMError, Remote
from itemforge.retrieval import EvalError, EvalReport, evaluate
from itemforge.taskgen import HARD_NEGATIVE_FRACTION, MixConfig, TaskGenError, generate_dataset, load_dataset
from itemforge.taskgen import write_dataset
from itemforge.templates import TASKS, TemplateError, default_templates, load_templates, write_templates

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("itemforge")

CATALOG_FILE = "catalog.jsonl"
INTERACTIONS_FILE = "interactions.jsonl"
TEMPLATES_FILE = "templates.jsonl"
CONVERSATIONS_FILE = "conversations.jsonl"

RUNTIME_ERRORS = (
    CatalogError, ConditionError, TemplateError, TaskGenError, TrainingError, EvalError, LLMError,
    ValueError, OSError,
)


class UsageError(Exception):
    pass


# --- helpers -------------------------------------------------------------------


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_meta(command: str, seed: Optional[int], inputs: Sequence[Path]) -> dict:
    """Provenance record; inputs are keyed by file name so runs are relocatable."""
    return {
        "tool": "itemforge",
        "version": __version__,
        "command": command,
        "seed": seed,
        "inputs": {p.name: sha256_file(p) for p in inputs},
    }


def require(*paths: Path) -> None:
    for p in paths:
        if not p.exists():
            raise FileNotFoundError(f"input not found: {p}")


def catalog_paths(directory: Path) -> tuple[Path, Path]:
    return directory / CATALOG_FILE, directory / INTERACTIONS_FILE


def make_backend(args):
    if args.llm == "fallback":
        return DeterministicFallback()
    if not args.endpoint or not args.model_name:
        raise UsageError("--llm remote needs --endpoint and --model")
    return Remote(args.endpoint, args.model_name, auth_env=args.auth_env, max_in_flight=max(1, args.jobs),
                  replay_log=Path(args.replay_log) if args.replay_log else None)


# --- subcommands ---------------------------------------------------------------


def cmd_synth(args) -> None:
    out = Path(args.out)
    catalog, interactions = synth_catalog(args.seed, args.items, args.users)
    convs = synth_conversations(catalog, interactions, args.conversations, args.conv_seed) if args.conversations else []
    out.mkdir(parents=True, exist_ok=True)
    meta = run_meta("synth", args.seed, []) | {"items": args.items, "users": args.users}
    cat_path, int_path = catalog_paths(out)
    write_catalog(catalog, cat_path, meta)
    write_interactions(interactions, int_path, meta)
    write_templates(default_templates(), out / TEMPLATES_FILE, meta)
    if convs:
        write_conversations(convs, out / CONVERSATIONS_FILE, run_meta("synth", args.conv_seed, [cat_path, int_path]))
    print(f"wrote {len(catalog)} items, {len(interactions)} users, {len(convs)} conversations to {out}")


def cmd_ingest(args) -> None:
    src_cat, src_int = Path(args.catalog_file), Path(args.interactions_file)
    require(src_cat, src_int)
    catalog = load_catalog(src_cat, name=args.name)
    interactions = load_interactions(src_int, catalog)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = run_meta("ingest", None, [src_cat, src_int])
    cat_path, int_path = catalog_paths(out)
    write_catalog(catalog, cat_path, meta)
    write_interactions(interactions, int_path, meta)
    print(f"ingested {len(catalog)} items and {len(interactions)} users into {out}")


def cmd_generate(args) -> None:
    cat_path, int_path = catalog_paths(Path(args.catalog))
    inputs = [cat_path, int_path] + ([Path(args.templates)] if args.templates else [])
    require(*inputs)
    try:
        train_out, test_out = (Path(p) for p in args.split_out.split(","))
    except ValueError:
        raise UsageError("--split-out takes two comma-separated paths: TRAIN,TEST") from None
    catalog = load_catalog(cat_path)
    interactions = load_interactions(int_path, catalog)
    templates = load_templates(args.templates) if args.templates else default_templates()
    mix = MixConfig(total=args.total, test_total=args.test_total)
    train_set, test_set = generate_dataset(catalog, interactions, templates, mix, make_backend(args), args.seed,
                                           jobs=args.jobs, hard_fraction=args.hard_negatives)
    meta = run_meta("generate", args.seed, inputs) | {"hard_negatives": args.hard_negatives}
    write_dataset(train_set, train_out, meta | {"split": "train"})
    write_dataset(test_set, test_out, meta | {"split": "test"})
    print(f"wrote {len(train_set)} train samples to {train_out} and {len(test_set)} test samples to {test_out}")


def cmd_train(args) -> None:
    data_path, (cat_path, _) = Path(args.dataset), catalog_paths(Path(args.catalog))
    inputs = [data_path, cat_path] + ([Path(args.init)] if args.init else [])
    require(*inputs)
    catalog = load_catalog(cat_path)
    dataset = [s for s in load_dataset(data_path) if s.split == "train"]
    if args.init:
        model_init = EncoderModel.load(args.init)
    else:
        tok = TokenizerConfig(args.buckets, not args.no_word_tokens, not args.no_trigrams,
                              args.max_query_tokens, args.max_item_tokens)
        init_seed = args.seed if args.init_seed is None else args.init_seed
        model_init = EncoderModel.init(init_seed, tok, dim=args.dim, scale=args.init_scale)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch, learning_rate=args.lr,
                      warmup_fraction=args.warmup, seed=args.seed, max_steps=args.max_steps)
    model = train(dataset, catalog, model_init, cfg)
    model.meta = model.meta | {"run": run_meta("train", args.seed, inputs)}
    model.save(args.out)
    losses = model.meta.get("epoch_losses", [])
    print(f"trained {model.meta.get('train_steps', 0)} steps; epoch losses {losses}; wrote {args.out}")


def cmd_eval(args) -> None:
    data_path, model_path = Path(args.dataset), Path(args.model)
    cat_path, _ = catalog_paths(Path(args.catalog))
    require(data_path, cat_path, model_path)
    catalog = load_catalog(cat_path)
    model = EncoderModel.load(model_path)
    dataset = [s for s in load_dataset(data_path) if s.split == "test"]
    if not dataset:
        raise EvalError(f"{data_path} has no test-split samples")
    report = evaluate(dataset, catalog, model, k=args.k, seed=args.seed, ood_label=args.ood_label)
    report.meta["run"] = run_meta("eval", args.seed, [data_path, cat_path, model_path])
    report.save(args.out, include_timing=args.timing)
    print_table([(Path(args.out).stem, report)])


def cmd_agent_eval(args) -> None:
    conv_path, model_path = Path(args.conversations), Path(args.model)
    cat_path, _ = catalog_paths(Path(args.catalog))
    require(conv_path, cat_path, model_path)
    catalog = load_catalog(cat_path)
    model = EncoderModel.load(model_path)
    report = eval_conversations(load_conversations(conv_path), catalog, model, k=args.k, user_only=args.user_only)
    report.meta["run"] = run_meta("agent-eval", None, [conv_path, cat_path, model_path])
    report.save(args.out)
    print_table([(Path(args.out).stem, report)])


def comparison_rows(reports: Sequence[tuple[str, EvalReport]]) -> list[dict]:
    rows = []
    for source, r in reports:
        domain = r.meta.get("catalog", "?")
        if r.meta.get("ood"):
            domain += " (ood)"
        for task, score in r.tasks.items():
            rows.append({"model": r.meta.get("model_fingerprint", "?"), "domain": domain, "task": task,
                         "metric": score.metric, "value": score.value, "count": score.count, "source": source})
    return rows


def print_table(reports: Sequence[tuple[str, EvalReport]], out=None) -> None:
    """Tasks down the side, one column per (model, domain)."""
    out = out or sys.stdout
    rows = comparison_rows(reports)
    columns: list[tuple[str, str]] = []
    for row in rows:
        if (row["model"], row["domain"]) not in columns:
            columns.append((row["model"], row["domain"]))
    order = {t: i for i, t in enumerate(TASKS)}
    tasks = sorted({r["task"] for r in rows}, key=lambda t: (order.get(t, len(order)), t))
    cell = {(r["model"], r["domain"], r["task"]): r for r in rows}
    labels = [f"#{i + 1}" for i in range(len(columns))]
    for label, (model, domain) in zip(labels, columns):
        sources = sorted({r["source"] for r in rows if (r["model"], r["domain"]) == (model, domain)})
        print(f"{label}: model {model} on {domain} [{', '.join(sources)}]", file=out)
    print(f"{'task':<7}{'metric':<12}" + "".join(f"{lab:>9}" for lab in labels), file=out)
    for task in tasks:
        metric = next(r["metric"] for r in rows if r["task"] == task)
        values = [cell.get((m, d, task)) for m, d in columns]
        print(f"{task:<7}{metric:<12}" + "".join(f"{v['value']:>9.3f}" if v else f"{'-':>9}" for v in values),
              file=out)


def cmd_report(args) -> None:
    paths = [Path(p) for p in args.inputs]
    require(*paths)
    reports = [(p.stem, EvalReport.load(p)) for p in paths]
    print_table(reports)
    if args.out:
        merged = {"meta": run_meta("report", None, paths), "rows": comparison_rows(reports)}
        Path(args.out).write_text(json.dumps(merged, indent=2, sort_keys=True) + "\n")


# --- parser --------------------------------------------------------------------


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="forge", description="Item-retrieval task synthesis, training and evaluation.")
    versions = ", ".join(f"{k} v{v}" for k, v in FORMAT_VERSIONS.items())
    parser.add_argument("--version", action="version", version=f"forge {__version__} (formats: {versions})")
    parser.add_argument("--config", help="TOML file with one table per subcommand")
    parser.add_argument("--jobs", type=int, default=1, help="worker cap for parallel stages (default 1)")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    subs: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("synth", help="write a synthetic catalog, interaction log, templates and conversations")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--items", type=int, default=500)
    p.add_argument("--users", type=int, default=300)
    p.add_argument("--conversations", type=int, default=50, help="conversation fixture size (0 to skip)")
    p.add_argument("--conv-seed", type=int, default=7)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)
    subs["synth"] = p

    p = sub.add_parser("ingest", help="validate and normalize an external catalog and interaction log")
    p.add_argument("--catalog", dest="catalog_file", required=True, help="catalog jsonl file")
    p.add_argument("--interactions", dest="interactions_file", required=True, help="interactions jsonl file")
    p.add_argument("--name", help="catalog name (default: from the file header or file name)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ingest)
    subs["ingest"] = p

    p = sub.add_parser("generate", help="synthesize train/test query samples")
    p.add_argument("--catalog", required=True, help="directory with catalog.jsonl and interactions.jsonl")
    p.add_argument("--templates", help="templates file (default: the built-in pool)")
    p.add_argument("--total", type=int, default=1200)
    p.add_argument("--test-total", type=int, default=400)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--split-out", required=True, metavar="TRAIN,TEST")
    p.add_argument("--hard-negatives", type=float, default=HARD_NEGATIVE_FRACTION,
                   help="share of condition-task negatives drawn as near misses")
    p.add_argument("--llm", choices=["fallback", "remote"], default="fallback")
    p.add_argument("--endpoint", help="OpenAI-compatible base URL for --llm remote")
    p.add_argument("--model", dest="model_name", help="model name for --llm remote")
    p.add_argument("--auth-env", default="OPENAI_API_KEY", help="env var holding the bearer token")
    p.add_argument("--replay-log", help="jsonl cache of remote completions")
    p.set_defaults(func=cmd_generate)
    subs["generate"] = p

    p = sub.add_parser("train", help="train the encoder on a train split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--warmup", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, help="stop after this many steps (0 writes the untrained model)")
    p.add_argument("--init", help="start from this model instead of a fresh one")
    p.add_argument("--init-seed", type=int, help="seed of the fresh table (default: --seed)")
    p.add_argument("--init-scale", type=float, default=INIT_SCALE)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--buckets", type=int, default=65536)
    p.add_argument("--no-word-tokens", action="store_true")
    p.add_argument("--no-trigrams", action="store_true")
    p.add_argument("--max-query-tokens", type=int, default=512)
    p.add_argument("--max-item-tokens", type=int, default=256)
    p.set_defaults(func=cmd_train)
    subs["train"] = p

    p = sub.add_parser("eval", help="score a model on a test split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, help="recorded in the report")
    p.add_argument("--ood-label", help="mark the report as out of domain under this name")
    p.add_argument("--timing", action="store_true", help="include wall-clock time in the report file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)
    subs["eval"] = p

    p = sub.add_parser("agent-eval", help="Hit@k from raw conversation transcripts")
    p.add_argument("--conversations", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--user-only", action="store_true", help="embed user turns only")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_agent_eval)
    subs["agent-eval"] = p

    p = sub.add_parser("report", help="compare reports per (model, domain, task)")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="REPORT")
    p.add_argument("--out", help="also write the merged rows as JSON")
    p.set_defaults(func=cmd_report)
    subs["report"] = p
    return parser, subs


def apply_config(path: Path, command: str, sub: argparse.ArgumentParser) -> None:
    """Use the config table for ``command`` as defaults for its flags."""
    with open(path, "rb") as fh:
        try:
            config = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"bad config {path}: {exc}") from None
    table = config.get(command, {})
    if not isinstance(table, dict):
        raise UsageError(f"config [{command}] must be a table")
    flags = {opt[2:].replace("-", "_"): a.dest for a in sub._actions for opt in a.option_strings
             if opt.startswith("--") and opt != "--help"}
    defaults = {}
    for key, value in table.items():
        dest = flags.get(key.replace("-", "_"))
        if dest is None:
            raise UsageError(f"config [{command}] has unknown key {key!r}")
        defaults[dest] = value
    # Required flags satisfied by the config file are no longer required.
    for action in sub._actions:
        if action.dest in defaults:
            action.required = False
    sub.set_defaults(**defaults)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if known.config:
        command = next((a for a in rest if a in subs), None)
        try:
            if not Path(known.config).exists():
                raise UsageError(f"config file not found: {known.config}")
            if command:
                apply_config(Path(known.config), command, subs[command])
        except UsageError as exc:
            parser.print_usage(sys.stderr)
            print(f"forge: error: {exc}", file=sys.stderr)
            return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors (2), --help and --version (0)
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        parser.print_usage(sys.stderr)
        print("forge: error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except UsageError as exc:
        subs[args.command].print_usage(sys.stderr)
        print(f"forge {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except RUNTIME_ERRORS as exc:
        print(f"forge {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
