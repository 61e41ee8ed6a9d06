"""
Command-line interface of the behavior-planning toolkit.

Subcommands:
- synthesize: write seeded synthetic scenarios from a template
- split: cut raw recordings into scenario windows
- train-cmp: train the learned conditional predictor
- train-irl: learn cost weights with maximum-entropy IRL
- evaluate: score a planner on a dataset and write a per-scenario CSV
- plot: render one scene with its ranked proposals as SVG

Example:
    predictive-planner synthesize --template cut_in --count 200 --seed 1 --out cut_in.jsonl
    predictive-planner train-irl --data cut_in.jsonl --predictor idm --out weights.txt
    predictive-planner evaluate --data cut_in.jsonl --predictor idm --weights weights.txt --out eval.csv

Exit codes: 0 on success, 1 on usage errors, 2 on data and file errors, 3 on numeric failures.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from predictive_planner.config import PlannerConfig, setup_logging
from predictive_planner.data import filter_for_irl, load_scenarios, load_track_sets, save_scenarios, split_windows
from predictive_planner.errors import DataError, NoValidProposal, NonFiniteLoss, SingularSystem
from predictive_planner.evaluation import evaluate_planner
from predictive_planner.irl import demo_accuracy, load_weights, save_weights, train_irl, write_loss_history
from predictive_planner.planner import BehaviorPlanner, build_irl_samples
from predictive_planner.plotting import render_scene_svg
from predictive_planner.prediction.learned import load_params, save_params
from predictive_planner.prediction.training import cmp_train
from predictive_planner.synthesis import TEMPLATES, synthesize_scenarios
from predictive_planner.utils.checkpointer import Checkpointer, cache_key
from predictive_planner.utils.reports import write_evaluation_csv


logger = logging.getLogger(__name__)

PACKAGE_ROOT = Path(__file__).parent
DEFAULT_CONFIG_PATH = os.path.join(PACKAGE_ROOT, 'config', 'config.yaml')

PREDICTOR_CHOICES = {
    'ctrv': 'ctrv',
    'idm': 'idm_reactive',
    'idm_reactive': 'idm_reactive',
    'learned': 'learned',
    'oracle': 'oracle'
}

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    """Raised for inconsistent or missing command-line arguments."""


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f'{self.prog}: {message}')


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f'must be at least 1, got {number}')
    return number


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=str, default=DEFAULT_CONFIG_PATH, help='Path to YAML config file')
    parser.add_argument('--seed', type=int, default=None, help='Random seed (overrides the config)')
    parser.add_argument('--debug', action='store_true', help='Enable debug logging')
    parser.add_argument('--log-file', type=str, default=None, help='Write logs to this file instead of stdout')


def _add_planner_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--predictor', choices=sorted(PREDICTOR_CHOICES), default=None,
                        help='Prediction backend (idm is the plan-reactive IDM)')
    parser.add_argument('--fusion', choices=['early', 'late', 'none'], default=None,
                        help='Plan fusion point of the learned predictor')
    parser.add_argument('--params', type=str, default=None, help='Learned predictor parameter file')
    parser.add_argument('--batch', dest='inference', action='store_const', const='batch', default='batch',
                        help='Predict all proposals of a scene in one call (default)')
    parser.add_argument('--single', dest='inference', action='store_const', const='single',
                        help='Predict proposals one at a time')


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = _ArgumentParser(prog='predictive-planner', description='Prediction-driven behavior planning')
    subparsers = parser.add_subparsers(dest='command', required=True)

    sub = subparsers.add_parser('synthesize', help='Write synthetic scenarios')
    sub.add_argument('--template', choices=list(TEMPLATES), required=True, help='Scenario template')
    sub.add_argument('--count', type=_positive_int, required=True, help='Number of scenarios')
    sub.add_argument('--out', type=str, required=True, help='Output scenario file (JSON Lines)')
    _add_common(sub)

    sub = subparsers.add_parser('split', help='Cut raw recordings into scenario windows')
    sub.add_argument('--data', type=str, required=True, help='Raw track sets (JSON Lines)')
    sub.add_argument('--out', type=str, required=True, help='Output scenario file')
    sub.add_argument('--stride', type=_positive_int, default=None, help='Window stride in steps')
    _add_common(sub)

    sub = subparsers.add_parser('train-cmp', help='Train the learned conditional predictor')
    sub.add_argument('--data', type=str, required=True, help='Training scenarios')
    sub.add_argument('--out', type=str, required=True, help='Output parameter file')
    sub.add_argument('--fusion', choices=['early', 'late', 'none'], default=None, help='Plan fusion point')
    sub.add_argument('--steps', type=_positive_int, default=None, help='Number of optimisation steps')
    _add_common(sub)

    sub = subparsers.add_parser('train-irl', help='Learn cost weights with maximum-entropy IRL')
    sub.add_argument('--data', type=str, required=True, help='Training scenarios')
    sub.add_argument('--out', type=str, required=True, help='Output weights file')
    sub.add_argument('--steps', type=_positive_int, default=None, help='Number of optimisation steps')
    sub.add_argument('--checkpoint', dest='checkpoint', action='store_true', default=True,
                     help='Cache feature matrices (default: True)')
    sub.add_argument('--no-checkpoint', dest='checkpoint', action='store_false', help='Disable feature caching')
    _add_planner_flags(sub)
    _add_common(sub)

    sub = subparsers.add_parser('evaluate', help='Evaluate a planner on a dataset')
    sub.add_argument('--data', type=str, required=True, help='Evaluation scenarios')
    sub.add_argument('--out', type=str, required=True, help='Output CSV')
    sub.add_argument('--weights', type=str, default=None, help='Cost weights (default: hand-tuned)')
    _add_planner_flags(sub)
    _add_common(sub)

    sub = subparsers.add_parser('plot', help='Render a scene as SVG')
    sub.add_argument('--data', type=str, required=True, help='Scenario file')
    sub.add_argument('--out', type=str, required=True, help='Output SVG')
    sub.add_argument('--index', type=int, default=0, help='Scenario index within the file')
    sub.add_argument('--weights', type=str, default=None, help='Cost weights used to rank proposals')
    sub.add_argument('--no-proposals', dest='proposals', action='store_false', default=True,
                     help='Draw only the map, agents and recorded future')
    _add_planner_flags(sub)
    _add_common(sub)

    return parser.parse_args(argv)


def _loss_csv_path(out: str) -> str:
    return str(Path(out).with_suffix('')) + '_loss.csv'


def _build_planner(args: argparse.Namespace, config: PlannerConfig, weights=None) -> BehaviorPlanner:
    backend = PREDICTOR_CHOICES[args.predictor] if args.predictor else config.predictor.backend
    config = config.with_overrides('predictor', backend=backend, fusion=args.fusion)
    params = None
    if backend == 'learned':
        if not args.params:
            raise UsageError('--params is required with --predictor learned')
        params = load_params(args.params)
        config = config.with_overrides(
            'predictor', fusion=params.fusion, num_modes=params.num_modes, embed_dim=params.embed_dim
        )
    return BehaviorPlanner(
        config.predictor,
        params=params,
        weights=weights,
        feature_cfg=config.features,
        generation_cfg=config.generation,
        idm_params=config.idm,
        inference=args.inference
    )


def cmd_synthesize(args: argparse.Namespace, config: PlannerConfig) -> None:
    seed = args.seed if args.seed is not None else 0
    scenarios = synthesize_scenarios(args.template, args.count, seed, config.idm, config.features.lane_half_width)
    save_scenarios(scenarios, args.out)
    print(len(scenarios))


def cmd_split(args: argparse.Namespace, config: PlannerConfig) -> None:
    stride = args.stride or config.data.stride
    scenarios = []
    for raw in load_track_sets(args.data):
        scenarios.extend(split_windows(
            raw, config.data.history_steps, config.data.future_steps, stride, config.data.max_agents
        ))
    save_scenarios(scenarios, args.out)
    print(len(scenarios))


def cmd_train_cmp(args: argparse.Namespace, config: PlannerConfig) -> None:
    config = config.with_overrides('predictor', backend='learned', fusion=args.fusion)
    config = config.with_overrides('cmp', rng_seed=args.seed, steps=args.steps)
    scenarios = load_scenarios(args.data)
    if not scenarios:
        raise DataError(f'{args.data} holds no scenarios')
    params, history = cmp_train(scenarios, config.predictor, config.cmp)
    save_params(params, args.out)
    write_loss_history(history, _loss_csv_path(args.out))


def cmd_train_irl(args: argparse.Namespace, config: PlannerConfig) -> None:
    config = config.with_overrides('irl', rng_seed=args.seed, steps=args.steps)
    scenarios = filter_for_irl(load_scenarios(args.data), config.data.min_av_speed)
    if not scenarios:
        raise DataError(f'{args.data} holds no scenarios usable for IRL')
    planner = _build_planner(args, config)

    checkpointer = Checkpointer(
        cache_key(args.data, planner.predictor_cfg, config.features, config.generation, config.idm, args.params or ''),
        config.checkpoint_dir,
        enabled=args.checkpoint
    )
    samples = build_irl_samples(scenarios, planner, checkpointer)
    if not samples:
        raise DataError(f'no scenario of {args.data} produced at least two proposals')
    weights, history = train_irl(samples, config.irl)
    logger.info(f'Demonstration accuracy on the training set: {demo_accuracy(weights, samples):.3f}')
    save_weights(weights, args.out)
    write_loss_history(history, _loss_csv_path(args.out))


def cmd_evaluate(args: argparse.Namespace, config: PlannerConfig) -> None:
    weights = load_weights(args.weights) if args.weights else None
    planner = _build_planner(args, config, weights)
    scenarios = load_scenarios(args.data)
    report, rows = evaluate_planner(scenarios, planner, config.evaluation)
    write_evaluation_csv(rows, report, config.evaluation, args.out)


def cmd_plot(args: argparse.Namespace, config: PlannerConfig) -> None:
    scenarios = load_scenarios(args.data)
    if not 0 <= args.index < len(scenarios):
        raise UsageError(f'--index {args.index} out of range for {len(scenarios)} scenarios')
    scenario = scenarios[args.index]
    ranked, futures, agent_indices = [], None, None
    if args.proposals:
        weights = load_weights(args.weights) if args.weights else None
        result = _build_planner(args, config, weights).plan(scenario)
        ranked = result.ranked
        best = result.proposals.index(result.best)
        futures, agent_indices = result.futures[best], result.history.agent_indices
    svg = render_scene_svg(scenario, ranked, futures, agent_indices)
    Path(args.out).write_text(svg, encoding='utf-8')
    logger.info(f'Wrote {args.out}')


COMMANDS = {
    'synthesize': cmd_synthesize,
    'split': cmd_split,
    'train-cmp': cmd_train_cmp,
    'train-irl': cmd_train_irl,
    'evaluate': cmd_evaluate,
    'plot': cmd_plot
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the CLI."""
    try:
        args = parse_arguments(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE

    try:
        config = PlannerConfig.load(args.config)
    except (OSError, ValueError) as e:
        print(f'predictive-planner: cannot load config: {e}', file=sys.stderr)
        return EXIT_DATA

    setup_logging(logging.DEBUG if args.debug else config.log_level, args.log_file)
    logger.debug(f'Effective configuration:\n{config.describe()}')

    try:
        COMMANDS[args.command](args, config)
    except UsageError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except (NonFiniteLoss, SingularSystem, NoValidProposal) as e:
        logger.error(f'Numeric failure: {e}')
        return EXIT_NUMERIC
    except (DataError, OSError, ValueError) as e:
        logger.error(f'{type(e).__name__}: {e}')
        return EXIT_DATA
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
