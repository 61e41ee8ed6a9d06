import pytest

from predictive_planner.evaluation import ScenarioMetrics, summarize
from predictive_planner.models import EvalThresholds
from predictive_planner.utils.reports import EVALUATION_COLUMNS, read_evaluation_csv, write_evaluation_csv


def test_evaluation_csv_layout(tmp_path):
    rows = [ScenarioMetrics('a', 1.0, 1, 0, 1, 0.5, 0.75), ScenarioMetrics('b', 2.0, 0, 1, 1, 1.5, 2.25)]
    path = tmp_path / 'eval.csv'
    write_evaluation_csv(rows, summarize(rows), EvalThresholds(), str(path))

    lines = path.read_text().splitlines()
    assert lines[0] == '# match_radius=3.0 speed_deadband=0.5 lane_threshold=1.75 top_k=3'
    assert lines[1] == ','.join(EVALUATION_COLUMNS)
    assert lines[2] == 'a,1.000000,1,0,1,0.500000,0.750000'
    assert lines[-1] == 'summary,1.500000,0.500000,0.500000,1.000000,1.000000,1.500000'

    parsed = read_evaluation_csv(str(path))
    assert [row['scenario_id'] for row in parsed] == ['a', 'b', 'summary']
    assert float(parsed[-1]['plan_min_fde']) == pytest.approx(1.5)
