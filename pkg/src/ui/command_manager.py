"""
Command-line surface: gen-data, train, eval, sweep, gradcheck and inspect.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import argparse
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from src.core.grad_check import grad_check_leaves
from src.core.tensor import Tensor, dtype_for
from src.data.features import check_dims, load_features, write_features
from src.data.segment import Segment
from src.data.splits import split
from src.data.synthetic import SyntheticConfig, gen_dataset
from src.entities.cell import StepTrace, run_sequence
from src.entities.edges import EdgeKind
from src.entities.model import AnticipationModel, build_model, parameter_report
from src.pipeline.anticipation import (
    BatchLabels, anticipation_loss, forward_frames, sample_frames
)
from src.pipeline.metrics import evaluate
from src.pipeline.optim import build_optimizer
from src.pipeline.sweep import SweepPoint, sweep
from src.pipeline.trainer import TrainingLog, train
from src.ui.report_manager import ReportManager
from src.utils.checkpoint import apply_parameters, load_checkpoint, save_checkpoint
from src.utils.config import RunConfig, config_summary
from src.utils.constants import (
    BANK_SIZES, CTP_VARIANTS, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, GRADCHECK_TOLERANCE,
    PRECISION_DOUBLE, STRATEGIES, STRATEGY_CLASS_TOKEN, STRATEGY_TEMPLATE_BANK
)
from src.utils.errors import ConfigError, ContractError, URMError
from src.utils.event_handler import EventHandler, TrainingEvent
from src.utils.logger_config import get_logger, get_logger_manager

logger = get_logger(__name__)

STRATEGY_ALL = "all"

# Dimensions forced by `gradcheck`
GRADCHECK_OVERRIDES = {
    "data.grid_h": 2,
    "data.grid_w": 2,
    "data.feature_dim": 8,
    "data.num_verbs": 3,
    "data.num_nouns": 2,
    "data.num_actions": 0,
    "model.width": 8,
    "model.heads": 2,
    "edges.bank_size": 4,
    "anticipation.num_frames": 3,
    "anticipation.stride_s": 0.25,
    "anticipation.intervals_s": [0.75, 0.5, 0.25],
    "run.precision": PRECISION_DOUBLE,
}
GRADCHECK_BATCH = 2


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from None


def _variant_list(text: str) -> List[str]:
    variants = [item.strip() for item in text.split(",") if item.strip()]
    unknown = [v for v in variants if v not in CTP_VARIANTS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown variant(s) {', '.join(unknown)}; "
                                         f"choose from {', '.join(CTP_VARIANTS)}")
    return variants


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file (section.key = value lines)")
    common.add_argument("--seed", type=int, help="override run.seed")
    common.add_argument("--deterministic", action="store_true", default=None,
                        help="single-threaded, order-fixed execution")
    common.add_argument("--out", help="output path (file or directory, per command)")
    common.add_argument("--log-level", help="override run.log_level")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="main.py", description="Recurrent graph model for action anticipation")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    commands.add_parser("gen-data", parents=[common], help="write a synthetic feature file")

    p = commands.add_parser("train", parents=[common], help="train a model")
    p.add_argument("--strategy", choices=STRATEGIES, help="override edges.strategy")
    p.add_argument("--lr", type=float, help="override optim.lr")
    p.add_argument("--epochs", type=int, help="override train.epochs")
    p.add_argument("--data", help="feature file (default data.path)")
    p.add_argument("--checkpoint", help="resume from this checkpoint")

    p = commands.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="feature file (default: data.path of the checkpoint)")

    p = commands.add_parser("sweep", parents=[common],
                            help="train one model per bank size or class-token variant")
    p.add_argument("--data", help="feature file (default data.path)")
    p.add_argument("--epochs", type=int, help="override train.epochs")
    values = p.add_mutually_exclusive_group()
    values.add_argument("--bank-sizes", type=_int_list, default=list(BANK_SIZES),
                        help="template bank sizes (default: %(default)s)")
    values.add_argument("--variants", type=_variant_list,
                        help="class-token variants, comma separated")

    p = commands.add_parser("gradcheck", parents=[common],
                            help="finite-difference gradient check at toy dimensions")
    p.add_argument("--strategy", choices=STRATEGIES + (STRATEGY_ALL,), help="strategy to check")

    p = commands.add_parser("inspect", parents=[common], help="dump per-step adjacencies as CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="feature file (default: data.path of the checkpoint)")
    p.add_argument("--segment", help="segment id (default: first segment)")
    return parser


class CommandManager:
    """Parses arguments, runs one command and maps failures to exit codes"""

    def __init__(self, stdout: Optional[TextIO] = None):
        self.stdout = stdout or sys.stdout
        self.reports = ReportManager()
        self._commands: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
            "gen-data": self.cmd_gen_data,
            "train": self.cmd_train,
            "eval": self.cmd_eval,
            "gradcheck": self.cmd_gradcheck,
            "inspect": self.cmd_inspect,
            "sweep": self.cmd_sweep,
        }

    def emit(self, text: str) -> None:
        print(text, file=self.stdout)

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """
        Execute one command

        Args:
            argv: Arguments without the program name; defaults to sys.argv[1:]

        Returns:
            int: Process exit code
        """
        try:
            args = build_parser().parse_args(argv)
        except SystemExit as e:
            return EXIT_OK if e.code in (0, None) else EXIT_USAGE

        try:
            config = self.resolve_config(args)
            get_logger_manager().initialize(log_level=config.run.log_level)
            logger.info(f"{args.command}: {config_summary(config)}")
            return self._commands[args.command](args, config)
        except ConfigError as e:
            logger.error(f"Configuration error: {e}")
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE
        except (URMError, OSError) as e:
            logger.critical(f"{args.command} failed: {e}")
            print(f"error: {e}", file=sys.stderr)
            return EXIT_RUNTIME

    def resolve_config(self, args: argparse.Namespace) -> RunConfig:
        """File values, then command-line overrides, then validation"""
        config = RunConfig.load(args.config) if args.config else RunConfig()
        overrides = {
            "run.seed": args.seed,
            "run.deterministic": args.deterministic,
            "run.log_level": args.log_level,
            "edges.strategy": getattr(args, "strategy", None),
            "optim.lr": getattr(args, "lr", None),
            "train.epochs": getattr(args, "epochs", None),
        }
        if overrides["edges.strategy"] == STRATEGY_ALL:
            overrides["edges.strategy"] = None
        for key, value in overrides.items():
            if value is not None:
                config.set(key, value)
        return config.validate()

    # ------------------------------------------------------------------
    # Helpers

    def _load_segments(self, path: str, config: RunConfig) -> List[Segment]:
        segments = load_features(path, fps=config.data.fps)
        check_dims(segments, config.data.num_vertices, config.data.feature_dim)
        return segments

    def _split_segments(self, config: RunConfig) -> Tuple[List[Segment], List[Segment]]:
        segments = self._load_segments(config.data.path, config)
        fractions = (1.0 - config.data.val_fraction, config.data.val_fraction)
        return split(segments, fractions, config.run.seed)

    def _restore(self, checkpoint_path: str) -> Tuple[AnticipationModel, RunConfig]:
        checkpoint = load_checkpoint(checkpoint_path)
        config = checkpoint.config.validate()
        model = build_model(config)
        apply_parameters(model, checkpoint.parameters)
        logger.info(f"Restored {config.edges.strategy} model from {checkpoint_path} "
                    f"(step {checkpoint.step})")
        return model, config

    # ------------------------------------------------------------------
    # Commands

    def cmd_gen_data(self, args: argparse.Namespace, config: RunConfig) -> int:
        synthetic = SyntheticConfig.from_run_config(config)
        workers = 1 if config.run.deterministic else config.train.eval_workers
        segments = gen_dataset(synthetic, config.data.count, workers)
        path = write_features(args.out or config.data.path, segments)
        self.emit(f"wrote {len(segments)} segments to {path}")
        return EXIT_OK

    def cmd_train(self, args: argparse.Namespace, config: RunConfig) -> int:
        out_dir = Path(args.out or config.run.out)
        if args.out:
            config.set("run.out", str(out_dir))
        if args.data:
            config.set("data.path", args.data)
        train_set, val_set = self._split_segments(config)

        model = build_model(config)
        for name, count in parameter_report(model, config).items():
            logger.info(f"parameters {name}: {count}")
        optimizer = build_optimizer(config.optim, model.named_parameters())
        start_step = 0
        if args.checkpoint:
            checkpoint = load_checkpoint(args.checkpoint)
            apply_parameters(model, checkpoint.parameters)
            if checkpoint.optimizer:
                optimizer.load_state_dict(checkpoint.optimizer)
            start_step = checkpoint.step

        events = EventHandler()
        log_path = out_dir / "train.log"
        if log_path.exists():
            log_path.unlink()
        TrainingLog(log_path).subscribe(events)
        self._subscribe_checkpoints(events, out_dir, config)

        with get_logger_manager().run_log(out_dir / "run.log", config.run.log_level):
            result = train(model, train_set, config, events, val_set or None, optimizer, start_step)
        final = save_checkpoint(out_dir / "checkpoint.urm", model, config, optimizer, result.steps)
        events.trigger(TrainingEvent.CHECKPOINT_SAVED, path=final, step=result.steps)
        self.emit(f"trained {result.steps} steps, final loss {result.final_loss:.6f}")
        if result.reports:
            self.emit(self.reports.render_table(result.reports[-1]))
            self.reports.write_csv(result.reports[-1], out_dir / "report.csv")
        self.emit(f"checkpoint: {final}")
        return EXIT_OK

    def _subscribe_checkpoints(self, events: EventHandler, out_dir: Path, config: RunConfig) -> None:
        every = config.train.checkpoint_every
        if every <= 0:
            return

        def on_epoch_end(epoch: int, step: int, model, optimizer, **_) -> None:
            if (epoch + 1) % every == 0:
                path = save_checkpoint(out_dir / f"checkpoint_epoch{epoch + 1:03d}.urm",
                                       model, config, optimizer, step)
                events.trigger(TrainingEvent.CHECKPOINT_SAVED, path=path, step=step)

        events.add_handler(TrainingEvent.EPOCH_END, on_epoch_end)

    def cmd_sweep(self, args: argparse.Namespace, config: RunConfig) -> int:
        out_dir = Path(args.out or Path(config.run.out) / "sweep")
        if args.data:
            config.set("data.path", args.data)
        if args.variants:
            config.set("edges.strategy", STRATEGY_CLASS_TOKEN)
            key, values = "edges.ctp_variant", args.variants
        else:
            config.set("edges.strategy", STRATEGY_TEMPLATE_BANK)
            key, values = "edges.bank_size", args.bank_sizes
        train_set, val_set = self._split_segments(config)
        if not val_set:
            raise ConfigError("sweeps need validation segments", "data.val_fraction")

        def save(point_config: RunConfig, model: AnticipationModel, point: SweepPoint) -> None:
            name = f"{key.split('.')[1]}_{point.value}.urm"
            save_checkpoint(out_dir / name, model, point_config, step=point.steps)

        workers = 1 if config.run.deterministic else config.train.eval_workers
        with get_logger_manager().run_log(out_dir / "run.log", config.run.log_level):
            points = sweep(train_set, val_set, config, key, values, on_model=save, workers=workers)
        self.emit(self.reports.render_sweep(points))
        self.reports.write_sweep_csv(points, out_dir / "sweep.csv")
        return EXIT_OK

    def cmd_eval(self, args: argparse.Namespace, config: RunConfig) -> int:
        model, saved = self._restore(args.checkpoint)
        segments = self._load_segments(args.data or saved.data.path, saved)
        workers = 1 if config.run.deterministic else saved.train.eval_workers
        report = evaluate(model, segments, saved.anticipation, workers=workers)
        self.emit(self.reports.render_table(report))
        for line in self.reports.csv_lines(report):
            self.emit(line)
        if args.out:
            self.reports.write_csv(report, args.out)
        return EXIT_OK

    def gradcheck_errors(self, config: RunConfig, strategy: str) -> Dict[str, float]:
        """Max relative gradient error per parameter group for one strategy"""
        toy = config.copy()
        for key, value in GRADCHECK_OVERRIDES.items():
            toy.set(key, value)
        toy.set("edges.strategy", strategy)
        toy.validate()
        model = build_model(toy)
        rng = np.random.default_rng(toy.run.seed)
        dims = model.dims
        frames = rng.standard_normal(
            (GRADCHECK_BATCH, toy.anticipation.num_frames, dims.num_vertices, dims.input_dim))
        verbs = rng.integers(toy.data.num_verbs, size=GRADCHECK_BATCH)
        nouns = rng.integers(toy.data.num_nouns, size=GRADCHECK_BATCH)
        labels = BatchLabels(verbs, nouns, verbs * toy.data.num_nouns + nouns)

        def loss() -> Tensor:
            return anticipation_loss(forward_frames(model, frames, toy.anticipation), labels)

        errors = grad_check_leaves(loss, model.named_parameters())
        groups: Dict[str, float] = {}
        for name, error in errors.items():
            group = ".".join(name.split(".")[:2])
            groups[group] = max(groups.get(group, 0.0), error)
        return groups

    def cmd_gradcheck(self, args: argparse.Namespace, config: RunConfig) -> int:
        chosen = args.strategy or config.edges.strategy
        strategies = STRATEGIES if chosen == STRATEGY_ALL else (chosen,)
        worst = 0.0
        self.emit("strategy,group,max_rel_error")
        for strategy in strategies:
            for group, error in self.gradcheck_errors(config, strategy).items():
                self.emit(f"{strategy},{group},{error:.3e}")
                worst = max(worst, error)
        passed = worst < GRADCHECK_TOLERANCE
        self.emit(f"{'PASS' if passed else 'FAIL'}: max relative error {worst:.3e} "
                  f"(tolerance {GRADCHECK_TOLERANCE:g})")
        return EXIT_OK if passed else EXIT_RUNTIME

    def cmd_inspect(self, args: argparse.Namespace, config: RunConfig) -> int:
        model, saved = self._restore(args.checkpoint)
        if model.edges.kind is EdgeKind.IMPLICIT:
            raise ContractError("no explicit edges: checkpoint uses implicit edge learning")
        segments = self._load_segments(args.data or saved.data.path, saved)
        if args.segment:
            matches = [s for s in segments if s.segment_id == args.segment]
            if not matches:
                raise ContractError(f"segment '{args.segment}' not found")
            segment = matches[0]
        else:
            segment = segments[0]

        frames = sample_frames(segment, saved.anticipation)
        dtype = dtype_for(model.precision)
        trace: List[StepTrace] = []
        run_sequence(model.cell, [Tensor(f.astype(dtype)) for f in frames], model.edges, [], trace)

        out_dir = Path(args.out or Path(saved.run.out) / "inspect")
        out_dir.mkdir(parents=True, exist_ok=True)
        written = write_inspection(out_dir, trace)
        self.emit(f"wrote {written} files for segment {segment.segment_id} to {out_dir}")
        return EXIT_OK


def _softmax_rows(matrix: np.ndarray) -> np.ndarray:
    shifted = np.exp(matrix - matrix.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def write_inspection(out_dir: Path, trace: Sequence[StepTrace]) -> int:
    """
    One set of CSV matrices per step

    step<t>_adjacency.csv, step<t>_adjacency_softmax.csv, then either
    step<t>_selector.csv (one row of template weights) or
    step<t>_token_<name>.csv (one projected token per file).
    """
    written = 0

    def save(name: str, values: np.ndarray) -> None:
        nonlocal written
        np.savetxt(out_dir / name, np.atleast_2d(values), delimiter=",", fmt="%.9g")
        written += 1

    for entry in trace:
        if entry.edges is None:
            continue
        prefix = f"step{entry.step:02d}"
        adjacency = entry.edges.adjacency.numpy()
        save(f"{prefix}_adjacency.csv", adjacency)
        save(f"{prefix}_adjacency_softmax.csv", _softmax_rows(adjacency))
        if entry.edges.selector is not None:
            save(f"{prefix}_selector.csv", entry.edges.selector.numpy())
        for name, vector in entry.edges.projected.items():
            save(f"{prefix}_token_{name}.csv", vector.numpy())
    return written


def main(argv: Optional[Sequence[str]] = None) -> int:
    return CommandManager().run(argv)
