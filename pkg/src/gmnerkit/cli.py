"""Command-line entry point: ``gmnerkit <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Callable, Iterable, Optional, Sequence

from . import __version__
from .config import CliConfig, load_config
from .core import GmnerSample, clamp_triples, triple_from_dict
from .dataio import (
    GrecSample,
    PredictionRecord,
    SchemaRecord,
    filter_grec_multitarget,
    load_samples,
    read_jsonl,
    split_schema_dataset,
    write_json,
    write_jsonl,
    write_text,
)
from .grpo import filter_group, group_advantages
from .metrics import metrics_report
from .parsing import PromptSpec, ReasoningStyle, parse_completion, render_prompt, shots_from_records
from .rewards import RewardConfig, score_completion, score_triples

logger = logging.getLogger("gmnerkit")


class CliError(Exception):
    pass


def _ordered_map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _emit_jsonl(path: Optional[str], records: Iterable[dict]) -> None:
    if path:
        write_jsonl(path, records)
    else:
        for r in records:
            sys.stdout.write(json.dumps(r, ensure_ascii=False) + "\n")


def _emit_json(path: Optional[str], obj) -> None:
    if path:
        write_json(path, obj)
    else:
        sys.stdout.write(json.dumps(obj, ensure_ascii=False, indent=2) + "\n")


def _raw_records(path: str) -> list[dict]:
    def ident(d: dict) -> dict:
        return d

    records, _ = read_jsonl(path, ident, strict=True)
    return records


def _samples_by_id(path: str, cfg: CliConfig) -> dict[str, GmnerSample]:
    samples, _ = load_samples(path, strict=cfg.strict_io)
    out = {}
    for s in samples:
        if s.id in out:
            raise CliError(f"{path}: duplicate sample id {s.id!r}")
        out[s.id] = s
    return out


def _record_style(rec: dict, default: ReasoningStyle) -> ReasoningStyle:
    return ReasoningStyle(rec["style"]) if rec.get("style") else default


def _gold_for(samples: dict[str, GmnerSample], rec: dict, path: str) -> GmnerSample:
    sid = str(rec.get("sample_id"))
    if sid not in samples:
        raise CliError(f"{path}: no gold sample for sample_id {sid!r}")
    return samples[sid]


# -- subcommands -------------------------------------------------------------

def cmd_parse(args, cfg: CliConfig) -> None:
    style = ReasoningStyle(args.style)
    records = _raw_records(args.input)

    def one(rec: dict) -> dict:
        if "completion" not in rec:
            raise CliError(f"{args.input}: record for {rec.get('sample_id')!r} has no 'completion'")
        parsed = parse_completion(rec["completion"], _record_style(rec, style))
        return {"sample_id": rec.get("sample_id"), **parsed.to_dict()}

    _emit_jsonl(args.out, _ordered_map(one, records, args.workers))


def cmd_score(args, cfg: CliConfig) -> None:
    style = ReasoningStyle(args.style)
    samples = _samples_by_id(args.gold, cfg)
    records = _raw_records(args.pred)
    rc: RewardConfig = cfg.reward

    def one(rec: dict) -> dict:
        sample = _gold_for(samples, rec, args.pred)
        rstyle = _record_style(rec, style)
        if "completions" in rec:
            bds = [score_completion(c, rstyle, sample, rc) for c in rec["completions"]]
            return {
                "sample_id": sample.id,
                "rewards": [b.total for b in bds],
                "breakdowns": [b.to_dict() for b in bds],
            }
        if rec.get("completion") is not None:
            b = score_completion(rec["completion"], rstyle, sample, rc)
        elif rec.get("triples") is not None:
            preds = clamp_triples([triple_from_dict(t) for t in rec["triples"]], sample.image_width, sample.image_height)
            b = score_triples(preds, list(sample.gold), rc)
        else:
            raise CliError(f"{args.pred}: record for {sample.id!r} has no completion(s) or triples")
        return {"sample_id": sample.id, **b.to_dict()}

    _emit_jsonl(args.out, _ordered_map(one, records, args.workers))


def _group_rewards(rec: dict, path: str) -> list[float]:
    rewards = rec.get("rewards")
    if not isinstance(rewards, list) or not rewards:
        raise CliError(f"{path}: group {rec.get('sample_id')!r} needs a non-empty 'rewards' list")
    return rewards


def cmd_advantage(args, cfg: CliConfig) -> None:
    records = _raw_records(args.groups)
    out = []
    for rec in records:
        rewards = _group_rewards(rec, args.groups)
        out.append({"sample_id": rec.get("sample_id"), "rewards": rewards, "advantages": group_advantages(rewards)})
    _emit_jsonl(args.out, out)


def cmd_filter(args, cfg: CliConfig) -> None:
    records = _raw_records(args.groups)
    kept, rows = [], []
    for rec in records:
        keep, st = filter_group(_group_rewards(rec, args.groups), cfg.filter)
        rows.append({"sample_id": rec.get("sample_id"), "keep": keep, **st.to_dict()})
        if keep:
            kept.append(rec)
    _emit_jsonl(args.out, kept)
    if args.report:
        write_json(args.report, {
            "thresholds": {
                "min_std": cfg.filter.min_std,
                "min_max": cfg.filter.min_max,
                "median_low": cfg.filter.median_low,
                "median_high": cfg.filter.median_high,
            },
            "total": len(records),
            "kept": len(kept),
            "dropped": len(records) - len(kept),
            "groups": rows,
        })


def cmd_eval(args, cfg: CliConfig) -> None:
    style = ReasoningStyle(args.style)
    samples = _samples_by_id(args.gold, cfg)
    preds, _ = read_jsonl(args.pred, PredictionRecord.from_dict, strict=True)
    by_id = {}
    for p in preds:
        if p.sample_id in by_id:
            raise CliError(f"{args.pred}: duplicate prediction for sample_id {p.sample_id!r}")
        if p.sample_id not in samples:
            raise CliError(f"{args.pred}: no gold sample for sample_id {p.sample_id!r}")
        s = samples[p.sample_id]
        if p.triples is not None:
            triples = list(p.triples)
        else:
            triples = parse_completion(p.completion, p.style or style).answer
        by_id[p.sample_id] = clamp_triples(triples, s.image_width, s.image_height)
    try:
        report = metrics_report(by_id, list(samples.values()), args.mode, cfg.iou_threshold)
    except ValueError as e:
        raise CliError(str(e)) from e
    _emit_json(args.out, report)


def cmd_split(args, cfg: CliConfig) -> None:
    records = _raw_records(args.input)
    for n, r in enumerate(records, 1):
        if "sample_id" not in r:
            raise CliError(f"{args.input}: record {n} has no sample_id")
        SchemaRecord.from_dict(r)
    d1, d2 = split_schema_dataset(records, cfg.split_fraction, args.seed)
    write_jsonl(args.out_d1, d1)
    write_jsonl(args.out_d2, d2)
    logger.info("split %d records: %d to d1, %d to d2", len(records), len(d1), len(d2))


def cmd_grec_filter(args, cfg: CliConfig) -> None:
    samples, _ = read_jsonl(args.input, GrecSample.from_dict, strict=cfg.strict_io)
    kept, dropped = filter_grec_multitarget(samples)
    _emit_jsonl(args.out, (s.to_dict() for s in kept))
    logger.info("kept %d GREC samples, dropped %d multi-target", len(kept), dropped)


def cmd_render_prompt(args, cfg: CliConfig) -> None:
    shots: tuple = ()
    if args.shots:
        shots = shots_from_records(_raw_records(args.shots))
    text = render_prompt(PromptSpec(args.template, args.sentence, args.image, shots))
    if args.out:
        write_text(args.out, text)
    else:
        sys.stdout.write(text)


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (sections: reward, filter, clip)")
    common.add_argument("--lenient", action="store_true", help="skip malformed input records with a warning")
    common.add_argument("--workers", type=int, default=1, help="threads for per-record work; output order is unchanged")
    common.add_argument("-v", "--verbose", action="store_true")

    styles = [s.value for s in ReasoningStyle]
    p = argparse.ArgumentParser(prog="gmnerkit", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sp = sub.add_parser("parse", parents=[common], help="parse tagged completions")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--style", choices=styles, default="formal")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("score", parents=[common], help="reward completions against gold samples")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gold", required=True)
    sp.add_argument("--style", choices=styles, default="formal")
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("advantage", parents=[common], help="group-normalized advantages")
    sp.add_argument("--groups", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_advantage)

    sp = sub.add_parser("filter", parents=[common], help="keep groups by reward statistics")
    sp.add_argument("--groups", required=True)
    sp.add_argument("--out")
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_filter)

    sp = sub.add_parser("eval", parents=[common], help="corpus metrics report")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gold", required=True)
    sp.add_argument("--mode", choices=["gmner", "mner", "eeg"], default="gmner")
    sp.add_argument("--style", choices=styles, default="formal")
    sp.add_argument("--iou-threshold", type=float)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("split", parents=[common], help="split schema records into SFT and RL parts")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--fraction", type=float)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-d1", required=True)
    sp.add_argument("--out-d2", required=True)
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("grec-filter", parents=[common], help="drop multi-region GREC samples")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_grec_filter)

    sp = sub.add_parser("render-prompt", parents=[common], help="render a prompt template")
    sp.add_argument("--template", required=True, choices=["instruction", "formal", "conclusion", "distill"])
    sp.add_argument("--sentence", required=True)
    sp.add_argument("--image", default="<image>")
    sp.add_argument("--shots", help="JSONL of {sentence, image, answer}")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_render_prompt)
    return p


def _resolve_config(args) -> CliConfig:
    cfg = load_config(args.config) if args.config else CliConfig()
    if args.lenient:
        cfg = cfg.with_overrides(strict_io=False)
    if getattr(args, "iou_threshold", None) is not None:
        cfg = cfg.with_overrides(iou_threshold=args.iou_threshold)
    if getattr(args, "fraction", None) is not None:
        cfg = cfg.with_overrides(split_fraction=args.fraction)
    if getattr(args, "sigma", None) is not None:
        cfg = cfg.with_overrides(reward=replace(cfg.reward, sigma=args.sigma))
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = _resolve_config(args)
        args.func(args, cfg)
    except (CliError, ValueError, KeyError, OSError) as e:
        msg = f"missing key {e}" if isinstance(e, KeyError) else str(e)
        print(f"gmnerkit {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
