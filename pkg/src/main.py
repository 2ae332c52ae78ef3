import argparse
import json
import logging
import sys
import uuid
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from corpus.builder import EVAL_SPLITS, PROBE_SPLIT, Corpus, build_corpus
from engine.tensor import resolve_dtype
from evaluation.attack import attack_to_png
from evaluation.report import (
    BASELINE_COLUMNS,
    BASELINE_FILE,
    PROBE_COLUMNS,
    PROBE_FILE,
    REPORT_FILE,
    SUMMARY_FILE,
    BaselineRow,
    render_directory,
    write_csv,
)
from evaluation.scoring import UNATTACKED, AttackEntry, accuracy, block_alignment_probe, recall, transfer_matrix
from models.detectors import DetectorNet
from models.generator import GeneratorNet, build_generator
from models.loading import load_model
from selfcheck import run_selfcheck
from training.ensemble import EnsembleSpec, leave_one_out
from training.grid_search import alpha_grid_search
from training.trainer import train_attack, train_detector, write_run_artifacts
from utils.config.run_config import PipelineConfig, TrainConfig, load_pipeline_config
from utils.file.file import list_images
from utils.log.config import LOG_FILE_NAME
from utils.log.err_trace import log_failure, one_line_error
from utils.log.write_log import RunContext, run_context, setup_logging
from utils.manifest import RunManifest, build_id, ensure_writable, write_manifest

logger = logging.getLogger(__name__)

GENERATOR_NAME = "generator"
CHECKPOINT_SUFFIX = ".afgn"


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="pipeline JSON config")
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    common.add_argument("--out", type=str, default=None, help="output directory of this command")
    common.add_argument("--force", action="store_true", help="overwrite an existing run in --out")
    common.add_argument("--precision", choices=["float64", "float32"], default=None)
    common.add_argument("--log-level", type=str, default=None)
    common.add_argument("--no-progress", action="store_true", help="disable progress bars")

    parser = argparse.ArgumentParser(prog="afgen", description="Anti-forensic generator pipeline (desk scale)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("gen-data", parents=[common], help="build the synthetic corpus")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--image-size", type=int, default=None)

    p = sub.add_parser("train-detectors", parents=[common], help="pretrain the detector zoo on the D-set")
    p.add_argument("--corpus", type=str, default=None)
    p.add_argument("--archs", nargs="+", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch", type=int, default=None)

    p = sub.add_parser("train-attack", parents=[common], help="train a generator against a victim or an ensemble")
    p.add_argument("--corpus", type=str, default=None)
    p.add_argument("--detectors", type=str, required=True, help="directory of detector checkpoints")
    p.add_argument("--victim", type=str, default=None)
    p.add_argument("--ensemble", nargs="+", default=None)
    p.add_argument("--beta", nargs="+", type=float, default=None)
    p.add_argument("--zero-knowledge", action="store_true",
                   help="train against every available detector except the victim")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--no-final-relu", action="store_true")
    p.add_argument("--grid", action="store_true", help="select alpha by grid search first (white-box only)")

    p = sub.add_parser("attack", parents=[common], help="attack a directory of PNGs of any size")
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--input", type=str, required=True)
    p.add_argument("--tile", type=int, default=None)

    p = sub.add_parser("eval", parents=[common], help="transfer matrix, baselines and block-alignment probe")
    p.add_argument("--attacks", type=str, required=True, help="directory holding train-attack runs")
    p.add_argument("--victims", type=str, required=True, help="directory of detector checkpoints")
    p.add_argument("--corpus", type=str, default=None)
    p.add_argument("--crop-draws", type=int, default=None)

    p = sub.add_parser("report", parents=[common], help="render the markdown summary of eval runs")
    p.add_argument("--reports", type=str, required=True)

    sub.add_parser("selfcheck", parents=[common], help="run the fast invariant checks")
    return parser.parse_args(argv)


def _opt(args: argparse.Namespace, name: str) -> Any:
    return getattr(args, name, None)


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    section = "attack" if args.command == "train-attack" else "detector"
    return {
        "seed": args.seed,
        "precision": args.precision,
        "log_level": args.log_level,
        "progress": False if args.no_progress else None,
        "corpus_dir": _opt(args, "corpus"),
        "workers": _opt(args, "workers"),
        "corpus.image_size": _opt(args, "image_size"),
        "archs": _opt(args, "archs"),
        f"{section}.epochs": _opt(args, "epochs"),
        f"{section}.lr": _opt(args, "lr"),
        f"{section}.batch": _opt(args, "batch"),
        "attack.alpha": _opt(args, "alpha"),
        "attack.victim": _opt(args, "victim"),
        "attack.ensemble": _opt(args, "ensemble"),
        "attack.beta": _opt(args, "beta"),
        "attack.final_relu": False if _opt(args, "no_final_relu") else None,
        "eval.tile": _opt(args, "tile"),
        "eval.crop_draws": _opt(args, "crop_draws"),
    }


def default_out(args: argparse.Namespace, cfg: PipelineConfig) -> Path:
    if args.out:
        return Path(args.out)
    root = Path(cfg.out_dir)
    if args.command == "gen-data":
        return Path(cfg.corpus_dir)
    if args.command == "train-attack":
        tag = "zk" if cfg.attack.ensemble else "wb"
        return root / "attacks" / f"{tag}_{cfg.attack.victim or '_'.join(cfg.attack.ensemble)}"
    return root / {"train-detectors": "detectors", "attack": "attacked", "eval": "eval",
                   "report": "report", "selfcheck": "selfcheck"}[args.command]


def load_detectors(directory: str, dtype: np.dtype) -> Dict[str, DetectorNet]:
    paths = sorted(Path(directory).glob(f"*{CHECKPOINT_SUFFIX}"))
    if not paths:
        raise FileNotFoundError(f"no detector checkpoints in {directory}")
    detectors = {}
    for path in paths:
        model = load_model(path, dtype)
        if not isinstance(model, DetectorNet):
            raise ValueError(f"{path} holds a {model.kind}, not a detector")
        detectors[path.stem] = model
    return detectors


def cmd_gen_data(args: argparse.Namespace, cfg: PipelineConfig, out: Path) -> List[Path]:
    corpus = build_corpus(cfg.corpus, out, workers=cfg.workers, progress=cfg.progress)
    return sorted(corpus.root.glob("*.csv")) + [corpus.root / "corpus.json"]


def cmd_train_detectors(args: argparse.Namespace, cfg: PipelineConfig, out: Path) -> List[Path]:
    corpus = Corpus(cfg.corpus_dir)
    eval_images, eval_labels = corpus.labeled(EVAL_SPLITS, resolve_dtype(cfg.precision))
    fakes = eval_images[eval_labels == 0]
    outputs, baseline = [], []
    for kind in cfg.archs:
        run_cfg = TrainConfig(**{**cfg.detector.model_dump(), "arch": kind})
        detector, log = train_detector(kind, corpus, run_cfg)
        outputs += write_run_artifacts(out, kind, detector, log, run_cfg)
        row = BaselineRow(victim=kind, accuracy=accuracy(detector, eval_images, eval_labels, cfg.eval.batch),
                          recall=recall(detector, fakes, cfg.eval.batch), n_images=len(eval_images))
        logger.info(f"{kind}: eval accuracy={row.accuracy:.4f} recall={row.recall:.4f}")
        baseline.append(row.model_dump())
    outputs.append(write_csv(pd.DataFrame(baseline, columns=BASELINE_COLUMNS), out / BASELINE_FILE))
    return outputs


def attack_target(cfg: PipelineConfig, detectors: Dict[str, DetectorNet]) -> EnsembleSpec:
    attack = cfg.attack
    missing = [n for n in list(attack.ensemble) + [attack.victim] if n and n not in detectors]
    if missing:
        raise KeyError(f"no checkpoint for detector(s) {missing}; available: {sorted(detectors)}")
    if attack.ensemble:
        return EnsembleSpec(names=tuple(attack.ensemble), detectors=tuple(detectors[n] for n in attack.ensemble),
                            beta=tuple(attack.beta), victim=attack.victim)
    if not attack.victim:
        raise ValueError("train-attack needs --victim, --ensemble, or both")
    return EnsembleSpec.single(attack.victim, detectors[attack.victim])


def cmd_train_attack(args: argparse.Namespace, cfg: PipelineConfig, out: Path) -> List[Path]:
    dtype = resolve_dtype(cfg.precision)
    detectors = load_detectors(args.detectors, dtype)
    corpus = Corpus(cfg.corpus_dir)
    outputs: List[Path] = []
    run_cfg = cfg.attack
    if args.grid:
        if run_cfg.ensemble or not run_cfg.victim:
            raise ValueError("--grid searches alpha against a single white-box victim")
        grid = alpha_grid_search(cfg.eval.alpha_grid, detectors[run_cfg.victim], corpus, run_cfg,
                                 epochs=cfg.eval.grid_epochs, floor=cfg.eval.asr_floor, eval_batch=cfg.eval.batch)
        outputs.append(write_csv(grid.table, out / "alpha_grid.csv"))
        run_cfg = run_cfg.model_copy(update={"alpha": grid.selected_alpha})
    target = attack_target(cfg, detectors)
    generator = build_generator(seed=run_cfg.seed, final_relu=run_cfg.final_relu, dtype=dtype)
    trained = target if run_cfg.ensemble else target.detectors[0]
    generator, log = train_attack(generator, trained, corpus, run_cfg)
    outputs += write_run_artifacts(out, GENERATOR_NAME, generator, log, run_cfg)
    return outputs


def cmd_attack(args: argparse.Namespace, cfg: PipelineConfig, out: Path) -> List[Path]:
    generator = load_model(args.checkpoint, resolve_dtype(cfg.precision))
    if not isinstance(generator, GeneratorNet):
        raise ValueError(f"{args.checkpoint} holds a {generator.kind}, not a generator")
    inputs = list_images(args.input)
    if not inputs:
        raise FileNotFoundError(f"no PNG images in {args.input}")
    return attack_to_png(generator, inputs, out, tile=cfg.eval.tile, progress=cfg.progress)


def discover_attacks(directory: str, dtype: np.dtype) -> List[AttackEntry]:
    entries = []
    for run_json in sorted(Path(directory).rglob(f"{GENERATOR_NAME}.json")):
        ckpt = run_json.with_suffix(CHECKPOINT_SUFFIX)
        if not ckpt.is_file():
            raise FileNotFoundError(f"{run_json} has no checkpoint {ckpt.name} next to it")
        run = json.loads(run_json.read_text(encoding="utf-8"))
        trained_against = tuple(run.get("ensemble") or [run.get("victim")])
        entries.append(AttackEntry(name=run_json.parent.name, generator=load_model(ckpt, dtype),
                                   trained_against=trained_against))
    if not entries:
        raise FileNotFoundError(f"no trained generators under {directory}")
    return entries


def cmd_eval(args: argparse.Namespace, cfg: PipelineConfig, out: Path) -> List[Path]:
    dtype = resolve_dtype(cfg.precision)
    victims = load_detectors(args.victims, dtype)
    attacks = discover_attacks(args.attacks, dtype)
    corpus = Corpus(cfg.corpus_dir)
    eval_images, eval_labels = corpus.labeled(EVAL_SPLITS, dtype)
    fakes = eval_images[eval_labels == 0]

    baseline = [BaselineRow(victim=name, accuracy=accuracy(d, eval_images, eval_labels, cfg.eval.batch),
                            recall=recall(d, fakes, cfg.eval.batch), n_images=len(eval_images)).model_dump()
                for name, d in victims.items()]
    entries = [AttackEntry(name=UNATTACKED, generator=None)] + attacks
    report = transfer_matrix(entries, victims, fakes, seed=cfg.seed, batch=cfg.eval.batch, progress=cfg.progress)

    probe_rows = []
    large = corpus.images(PROBE_SPLIT, dtype)
    if len(large):
        for entry in attacks:
            name = entry.white_box_victim
            if name in victims:
                result = block_alignment_probe(victims[name], entry.generator, large, draws=cfg.eval.crop_draws,
                                               seed=cfg.seed, batch=cfg.eval.batch, victim_name=name,
                                               attack_name=entry.name)
                probe_rows.append(result.as_row())
    outputs = [
        write_csv(report.to_frame(), out / REPORT_FILE),
        write_csv(pd.DataFrame(baseline, columns=BASELINE_COLUMNS), out / BASELINE_FILE),
        write_csv(pd.DataFrame(probe_rows, columns=PROBE_COLUMNS), out / PROBE_FILE),
    ]
    summary = out / SUMMARY_FILE
    summary.write_text(render_directory(out), encoding="utf-8")
    return outputs + [summary]


def cmd_report(args: argparse.Namespace, cfg: PipelineConfig, out: Path) -> List[Path]:
    text = render_directory(args.reports)
    out.mkdir(parents=True, exist_ok=True)
    summary = out / SUMMARY_FILE
    summary.write_text(text, encoding="utf-8")
    print(text, end="")
    return [summary]


def cmd_selfcheck(args: argparse.Namespace, cfg: PipelineConfig, out: Path) -> List[Path]:
    outcomes = run_selfcheck()
    for o in outcomes:
        print(f"{'ok  ' if o.ok else 'FAIL'} {o.name}: {o.detail}")
    failed = [o.name for o in outcomes if not o.ok]
    if failed:
        raise RuntimeError(f"selfcheck failed: {', '.join(failed)}")
    return []


COMMANDS: Dict[str, Callable[[argparse.Namespace, PipelineConfig, Path], List[Path]]] = {
    "gen-data": cmd_gen_data,
    "train-detectors": cmd_train_detectors,
    "train-attack": cmd_train_attack,
    "attack": cmd_attack,
    "eval": cmd_eval,
    "report": cmd_report,
    "selfcheck": cmd_selfcheck,
}


def resolve_zero_knowledge(args: argparse.Namespace, cfg: PipelineConfig) -> PipelineConfig:
    """--zero-knowledge: every detector checkpoint except the victim and the always-excluded ones."""
    if not getattr(args, "zero_knowledge", False):
        return cfg
    if not cfg.attack.victim:
        raise ValueError("--zero-knowledge needs --victim")
    available = sorted(p.stem for p in Path(args.detectors).glob(f"*{CHECKPOINT_SUFFIX}"))
    members = leave_one_out(available, cfg.attack.victim, cfg.always_exclude)
    attack = TrainConfig(**{**cfg.attack.model_dump(), "ensemble": members, "beta": []})
    return cfg.model_copy(update={"attack": attack})


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    try:
        cfg = load_pipeline_config(args.config, config_overrides(args))
        cfg = resolve_zero_knowledge(args, cfg)
        out = default_out(args, cfg)
        ensure_writable(out, args.force)
        setup_logging(log_file=str(out / LOG_FILE_NAME), log_level=cfg.log_level)
    except Exception as e:
        print(one_line_error(e), file=sys.stderr)
        return 1

    token = run_context.set(RunContext(run_id=uuid.uuid4().hex[:12], command=args.command))
    manifest = RunManifest(command=args.command, argv=list(argv if argv is not None else sys.argv[1:]),
                           config_path=args.config, config=cfg.snapshot(), build_id=build_id())
    try:
        logger.info(f"{args.command}: output in {out}")
        outputs = COMMANDS[args.command](args, cfg, out)
        write_manifest(manifest.finish(outputs), out)
        logger.info(f"{args.command} finished, {len(outputs)} outputs")
        return 0
    except Exception as e:
        log_failure(logger, e, args.command)
        print(one_line_error(e), file=sys.stderr)
        return 1
    finally:
        run_context.reset(token)


if __name__ == "__main__":
    sys.exit(main())
