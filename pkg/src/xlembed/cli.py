"""Command-line entry point: ``xlembed <subcommand> [flags]``.

Every subcommand accepts ``--config <json>``; values in that file fill in
flags that were not given explicitly. Each run writes
``resolved_config.json`` beside its outputs and, separately, a
``run_metadata.json`` holding the wall-clock time, so machine outputs are
byte-identical across re-runs.

Exit codes: 0 success, 1 validation error (bad flags, bad input data,
violated invariants), 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .bench import aggregate, builtin_manifest, emit_report, load_manifest, parse_machine_report, run_suite
from .datamodel import (Direction, ValidationError, canonical_json, parse_nli_lines, read_instances, read_jsonl,
                        read_translations, validate_train_instance, write_instances)
from .encoder import ToyEncoderParams, encoder_from_spec, load_params, save_params
from .mining import MiningSettings, mine_hard_negatives, parse_window, score_teacher, teacher_from_spec
from .pipeline import ExpansionSettings, build_dataset
from .trainer import TrainConfig, train_epoch

SUMMARY_FILE = "summary.json"

# per-subcommand defaults; argparse itself never fills defaults so that
# explicit flags can be told apart from config-file values
DEFAULTS = {
    "build-data": {"langs": None, "configs": ",".join(d.value for d in Direction), "qe_threshold": 0.75},
    "mine": {"corpus": None, "encoder": "toy:13:32", "max_neg": 15, "window": "2:100", "seed": 13,
             "strategy": "uniform"},
    "score-teacher": {"teacher": "toy-oracle:0"},
    "train": {"epochs": 1, "batch_size": 8, "group_size": 8, "lr": 1e-5, "warmup_ratio": 0.1,
              "temperature": 0.02, "same_dataset_within_batch": True, "kd": True, "seed": 0, "init": None,
              "dim": 32, "log_every": 100, "checkpoint_every": 100},
    "evaluate": {"suite": "lite", "manifest": None, "data_root": None, "seed": 0, "name": None},
    "report": {"format": "text_table", "by": None, "decimals": 1},
    "selftest": {},
}
REQUIRED = {"build-data": ("nli", "translations", "langs", "out"), "mine": ("in", "out"),
            "score-teacher": ("in", "out"), "train": ("data", "out"), "evaluate": ("encoder", "out"),
            "report": ("paths",)}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="xlembed", description=__doc__.splitlines()[0], argument_default=argparse.SUPPRESS)
    p.add_argument("--version", action="version", version=f"xlembed {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def cmd(name, help_):
        s = sub.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)
        s.add_argument("--config", help="JSON file of flag values (explicit flags win)")
        return s

    s = cmd("build-data", "expand NLI data into filtered contrastive instances")
    s.add_argument("--nli", help="NLI records, one JSON object per line")
    s.add_argument("--translations", help="translation records with QE scores")
    s.add_argument("--langs", help="comma-separated target languages")
    s.add_argument("--configs", help="comma-separated directions (tgt_src, src_tgt, tgt_tgt, src_src)")
    s.add_argument("--qe-threshold", type=float, dest="qe_threshold")
    s.add_argument("--out", help="output instances file")

    s = cmd("mine", "append hard negatives from a corpus")
    s.add_argument("--in", dest="in", help="input instances")
    s.add_argument("--corpus", help='corpus file of {"text": ...} records (default: the instances\' passages)')
    s.add_argument("--encoder", help="encoder spec: toy:<seed>:<dim>, file:<path> or checkpoint:<path>")
    s.add_argument("--max-neg", type=int, dest="max_neg")
    s.add_argument("--window", help="rank window lo:hi (1-based, inclusive)")
    s.add_argument("--strategy", choices=("uniform", "top"))
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output instances file")

    s = cmd("score-teacher", "attach teacher scores to every instance")
    s.add_argument("--in", dest="in")
    s.add_argument("--teacher", help="file:<path>, const:<value>, encoder:<spec> or toy-oracle:<seed>")
    s.add_argument("--out")

    s = cmd("train", "train the toy encoder")
    s.add_argument("--data")
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int, dest="batch_size")
    s.add_argument("--group-size", type=int, dest="group_size")
    s.add_argument("--lr", type=float)
    s.add_argument("--warmup-ratio", type=float, dest="warmup_ratio")
    s.add_argument("--temperature", type=float)
    s.add_argument("--same-dataset-within-batch", dest="same_dataset_within_batch",
                   action=argparse.BooleanOptionalAction)
    s.add_argument("--kd", action=argparse.BooleanOptionalAction, help="knowledge distillation term")
    s.add_argument("--log-every", type=int, dest="log_every")
    s.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    s.add_argument("--init", help="starting encoder: toy:<seed>:<dim> or checkpoint:<path> (default toy:<seed>:<dim>)")
    s.add_argument("--dim", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory")

    s = cmd("evaluate", "run a benchmark suite and write a machine-format summary")
    s.add_argument("--suite", help="built-in suite name (lite)")
    s.add_argument("--manifest", help="manifest file (overrides --suite)")
    s.add_argument("--encoder")
    s.add_argument("--data-root", dest="data_root", help="directory holding <task>/<lang>.jsonl files")
    s.add_argument("--name", help="row label in reports (default: the encoder spec)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory")

    s = cmd("report", "print one or more evaluation summaries")
    s.add_argument("paths", nargs="+", help="evaluation output directories or summary files")
    s.add_argument("--format", choices=("text_table", "machine"))
    s.add_argument("--by", choices=("task", "family"))
    s.add_argument("--decimals", type=int)

    cmd("selftest", "run the bundled oracle checks")
    return p


def resolve(command: str, explicit: dict) -> dict:
    """Merge defaults, config-file values and explicit flags, in that order of precedence."""
    opts = dict(DEFAULTS[command])
    config_path = explicit.pop("config", None)
    if config_path is not None:
        try:
            with open(config_path, encoding="utf-8") as f:
                from_file = json.load(f)
        except json.JSONDecodeError as e:
            raise ValidationError(f"config file is not valid JSON: {e}") from None
        if not isinstance(from_file, dict):
            raise ValidationError("config file must hold a JSON object")
        known = set(opts) | set(REQUIRED.get(command, ()))
        unknown = sorted(k.replace("-", "_") for k in from_file if k.replace("-", "_") not in known)
        if unknown:
            raise ValidationError(f"unknown config keys for {command}: {unknown}")
        opts.update({k.replace("-", "_"): v for k, v in from_file.items()})
    opts.update(explicit)
    missing = [k for k in REQUIRED.get(command, ()) if opts.get(k) is None]
    if missing:
        raise ValidationError(f"{command}: missing required option(s) {', '.join('--' + m for m in missing)}")
    return opts


def _write_run_files(directory: Path, command: str, opts: dict) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "resolved_config.json").write_text(
        canonical_json({"command": command, "options": opts, "version": __version__}) + "\n", encoding="utf-8")
    (directory / "run_metadata.json").write_text(
        canonical_json({"command": command, "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z")}) + "\n",
        encoding="utf-8")


def _beside(path) -> Path:
    return Path(path).resolve().parent


def _write_out(path, instances) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    write_instances(path, instances)


def _csv(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


# -- subcommands ------------------------------------------------------------------


def cmd_build_data(o: dict) -> int:
    with open(o["nli"], encoding="utf-8") as f:
        examples = parse_nli_lines(f)
    settings = ExpansionSettings(tuple(_csv(o["langs"])), frozenset(Direction.parse(c) for c in _csv(o["configs"])),
                                 float(o["qe_threshold"]))
    instances, stats = build_dataset(examples, read_translations(o["translations"]), settings)
    _write_out(o["out"], instances)
    _write_run_files(_beside(o["out"]), "build-data", o)
    print(canonical_json(stats))
    return 0


def cmd_mine(o: dict) -> int:
    instances = read_instances(o["in"])
    if o["corpus"] is not None:
        corpus = [r["text"] for r in read_jsonl(o["corpus"])]
    else:
        corpus = sorted({t for inst in instances for t in (*inst.pos, *inst.neg)})
    settings = MiningSettings(int(o["max_neg"]), parse_window(o["window"]), int(o["seed"]),
                              strategy=o["strategy"])
    encoder = encoder_from_spec(o["encoder"])
    E = encoder.embed(corpus)
    Q = encoder.embed([inst.query for inst in instances])
    mined = [mine_hard_negatives(inst, corpus, E, q, settings) for inst, q in zip(instances, Q)]
    for inst in mined:
        validate_train_instance(inst)
    _write_out(o["out"], mined)
    _write_run_files(_beside(o["out"]), "mine", o)
    return 0


def cmd_score_teacher(o: dict) -> int:
    teacher = teacher_from_spec(o["teacher"])
    scored = [score_teacher(inst, teacher) for inst in read_instances(o["in"])]
    for inst in scored:
        validate_train_instance(inst)
    _write_out(o["out"], scored)
    _write_run_files(_beside(o["out"]), "score-teacher", o)
    return 0


def cmd_train(o: dict) -> int:
    cfg = TrainConfig(epochs=int(o["epochs"]), batch_size=int(o["batch_size"]), group_size=int(o["group_size"]),
                      learning_rate=float(o["lr"]), warmup_ratio=float(o["warmup_ratio"]),
                      temperature=float(o["temperature"]),
                      same_dataset_within_batch=bool(o["same_dataset_within_batch"]),
                      knowledge_distillation=bool(o["kd"]), log_every=int(o["log_every"]),
                      checkpoint_every=int(o["checkpoint_every"]), seed=int(o["seed"]))
    init = o["init"] or f"toy:{cfg.seed}:{int(o['dim'])}"
    kind, _, rest = init.partition(":")
    if kind == "toy":
        try:
            seed, dim = (int(x) for x in rest.split(":"))
        except ValueError:
            raise ValidationError(f"bad init spec {init!r}; expected toy:<seed>:<dim>") from None
        params = ToyEncoderParams.init(seed, dim)
    elif kind == "checkpoint":
        params = load_params(rest)
    else:
        raise ValidationError(f"unknown init spec {init!r}; expected toy:... or checkpoint:...")
    instances = read_instances(o["data"])
    for inst in instances:
        validate_train_instance(inst)
    out = Path(o["out"])
    params, log, _ = train_epoch(instances, params, cfg, out_dir=out)
    save_params(out / "final.npz", params, step=log[-1]["step"], config_hash=cfg.hash())
    _write_run_files(out, "train", {**o, "init": init})
    print(canonical_json({"first": log[0], "last": log[-1]}))
    return 0


def cmd_evaluate(o: dict) -> int:
    manifest = load_manifest(o["manifest"]) if o["manifest"] else builtin_manifest(o["suite"])
    encoder = encoder_from_spec(o["encoder"])
    table = run_suite(manifest, encoder, seed=int(o["seed"]), data_root=o["data_root"])
    summary = aggregate(table, manifest.aggregation, o["name"] or o["encoder"])
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    emit_report(summary, "machine", out=out / SUMMARY_FILE)
    _write_run_files(out, "evaluate", o)
    print(f"{summary.name}: overall {summary.overall:.1f} ({manifest.aggregation})")
    return 0


def cmd_report(o: dict) -> int:
    summaries = []
    for p in o["paths"]:
        path = Path(p)
        if path.is_dir():
            path = path / SUMMARY_FILE
        summaries.extend(parse_machine_report(path.read_text(encoding="utf-8")))
    if not summaries:
        raise ValidationError("no summaries to report")
    sys.stdout.write(emit_report(summaries, o["format"], by=o["by"], decimals=int(o["decimals"])))
    return 0


def cmd_selftest(o: dict) -> int:
    from .selftest import run_all

    results = run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return 0 if all(ok for _, ok, _ in results) else 2


COMMANDS = {"build-data": cmd_build_data, "mine": cmd_mine, "score-teacher": cmd_score_teacher,
            "train": cmd_train, "evaluate": cmd_evaluate, "report": cmd_report, "selftest": cmd_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = vars(parser.parse_args(argv))
    except SystemExit as e:
        return int(e.code or 0)
    command = args.pop("command", None)
    if command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return COMMANDS[command](resolve(command, args))
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - every other failure is a runtime error
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
