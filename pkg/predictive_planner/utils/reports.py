"""
CSV writers for evaluation reports.

The evaluation CSV starts with comment lines recording the metric thresholds, followed by a
header, one row per scenario and a final ``summary`` row holding the dataset means.

Example:
    >>> report, rows = evaluate_planner(scenarios, planner, thresholds)
    >>> write_evaluation_csv(rows, report, thresholds, 'eval.csv')
"""

import csv
import logging
from typing import Sequence

from predictive_planner.models import EvalReport, EvalThresholds


logger = logging.getLogger(__name__)

EVALUATION_COLUMNS = ['scenario_id', 'plan_min_fde', 'top3_hit', 'speed_hit', 'lane_hit', 'min_ade', 'min_fde']


def _number(value: float) -> str:
    return f'{float(value):.6f}'


def write_evaluation_csv(rows: Sequence, report: EvalReport, thresholds: EvalThresholds, path: str) -> None:
    """
    Write per-scenario metrics and the summary row.

    Args:
        rows: ScenarioMetrics in dataset order
        report: Aggregate of ``rows``
        thresholds: Thresholds the metrics were computed with
        path: Output CSV path
    """
    with open(path, 'w', newline='') as f:
        f.write(
            f'# match_radius={thresholds.match_radius} speed_deadband={thresholds.speed_deadband} '
            f'lane_threshold={thresholds.lane_threshold} top_k={thresholds.top_k}\n'
        )
        writer = csv.writer(f)
        writer.writerow(EVALUATION_COLUMNS)
        for row in rows:
            writer.writerow([
                row.scenario_id,
                _number(row.plan_min_fde),
                row.top3_hit,
                row.speed_hit,
                row.lane_hit,
                _number(row.min_ade),
                _number(row.min_fde)
            ])
        writer.writerow([
            'summary',
            _number(report.plan_min_fde),
            _number(report.top3_accuracy),
            _number(report.speed_intent_accuracy),
            _number(report.lane_intent_accuracy),
            _number(report.min_ade),
            _number(report.min_fde)
        ])
    logger.info(f'Wrote evaluation of {report.scenario_count} scenarios to {path}')


def read_evaluation_csv(path: str) -> list:
    """Rows of an evaluation CSV as dicts keyed by column, comment lines skipped."""
    with open(path, newline='') as f:
        return list(csv.DictReader(line for line in f if not line.startswith('#')))
