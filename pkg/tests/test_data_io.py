import json

import pytest
import numpy as np

from predictive_planner.data import filter_for_irl, load_scenarios, load_track_sets, save_scenarios, split_windows
from predictive_planner.errors import ParseError, ScenarioValidationError, TooShort
from predictive_planner.models import RawTrack, RawTrackSet
from tests.conftest import straight_map


def raw_track(track_id: str, steps: int, x0: float, speed: float, y: float = 0.0, valid=None) -> RawTrack:
    t = 0.1 * np.arange(steps)
    return RawTrack(
        id=track_id, length=4.5, width=1.8,
        x=(x0 + speed * t).tolist(), y=[y] * steps, heading=[0.0] * steps, speed=[speed] * steps,
        valid=[True] * steps if valid is None else list(valid)
    )


def raw_set(steps: int, others=(), scene_id: str = 'scene') -> RawTrackSet:
    tracks = [raw_track('av', steps, 0.0, 5.0)] + [
        raw_track(f'car_{i}', steps, x0, 5.0, valid=valid) for i, (x0, valid) in enumerate(others)
    ]
    return RawTrackSet(scene_id=scene_id, map=straight_map(), tracks=tracks, av_index=0)


def test_load_empty_file(tmp_path):
    path = tmp_path / 'empty.jsonl'
    path.write_text('')
    assert load_scenarios(str(path)) == []


def test_load_sample_file(sample_scenarios_path):
    scenarios = load_scenarios(str(sample_scenarios_path))
    assert len(scenarios) == 5
    assert [s.scenario_id for s in scenarios][0] == 'sample_follow'
    assert all(len(s.av.x) == 71 for s in scenarios)


def test_sample_file_roundtrip(sample_scenarios_path, tmp_path):
    scenarios = load_scenarios(str(sample_scenarios_path))
    first = tmp_path / 'first.jsonl'
    second = tmp_path / 'second.jsonl'
    save_scenarios(scenarios, str(first))
    reloaded = load_scenarios(str(first))
    save_scenarios(reloaded, str(second))

    assert reloaded == scenarios
    assert first.read_bytes() == second.read_bytes()


def test_missing_av_index_names_the_record(sample_scenarios_path, tmp_path):
    lines = sample_scenarios_path.read_text().splitlines()
    record = json.loads(lines[1])
    del record['av_index']
    path = tmp_path / 'broken.jsonl'
    path.write_text('\n'.join([lines[0], json.dumps(record)]) + '\n')

    with pytest.raises(ScenarioValidationError) as excinfo:
        load_scenarios(str(path))
    assert excinfo.value.record_index == 1
    assert 'av_index' in str(excinfo.value)


def test_invalid_json_raises_parse_error(sample_scenarios_path, tmp_path):
    first = sample_scenarios_path.read_text().splitlines()[0]
    path = tmp_path / 'broken.jsonl'
    path.write_text(first + '\n{"scenario_id": \n')
    with pytest.raises(ParseError) as excinfo:
        load_scenarios(str(path))
    assert excinfo.value.record_index == 1


def test_unknown_fields_are_rejected(sample_scenarios_path, tmp_path):
    record = json.loads(sample_scenarios_path.read_text().splitlines()[0])
    record['weather'] = 'rain'
    path = tmp_path / 'extra.jsonl'
    path.write_text(json.dumps(record) + '\n')
    with pytest.raises(ScenarioValidationError):
        load_scenarios(str(path))


def test_split_windows_starts():
    scenarios = split_windows(raw_set(200), stride=50)
    assert [s.scenario_id for s in scenarios] == ['scene_0', 'scene_50', 'scene_100']
    assert all(len(a.x) == 71 for s in scenarios for a in s.agents)
    assert scenarios[1].av.x[0] == pytest.approx(5.0 * 5.0)


def test_split_windows_boundaries():
    assert len(split_windows(raw_set(71))) == 1
    with pytest.raises(TooShort):
        split_windows(raw_set(70))
    with pytest.raises(ValueError):
        split_windows(raw_set(71), stride=0)


def test_split_windows_holds_nearest_valid_sample():
    valid = [False] * 5 + [True] * 66
    scenarios = split_windows(raw_set(71, others=[(30.0, valid)]))
    car = scenarios[0].agents[1]
    assert car.x[:6] == pytest.approx([30.0 + 0.5 * 5.0] * 6)
    assert car.x[6] == pytest.approx(30.0 + 0.6 * 5.0)


def test_split_windows_drops_agents_absent_from_window():
    scenarios = split_windows(raw_set(71, others=[(30.0, [False] * 71), (40.0, None)]))
    assert [a.id for a in scenarios[0].agents] == ['av', 'car_1']


def test_split_windows_keeps_nearest_agents():
    others = [(x0, None) for x0 in (100.0, 10.0, 60.0, 20.0)]
    scenarios = split_windows(raw_set(71, others=others), max_agents=2)
    assert [a.id for a in scenarios[0].agents] == ['av', 'car_1', 'car_3']
    assert scenarios[0].av_index == 0


def test_load_track_sets(tmp_path):
    path = tmp_path / 'raw.jsonl'
    path.write_text(raw_set(120).model_dump_json() + '\n')
    track_sets = load_track_sets(str(path))
    assert len(track_sets) == 1
    assert track_sets[0].num_steps == 120


@pytest.mark.parametrize('speed, kept', [(0.0, False), (10.0, True), (2.9, False), (3.0, True)])
def test_filter_for_irl(make_scenario, speed, kept):
    scenario = make_scenario(av_speed=speed)
    assert (filter_for_irl([scenario]) == [scenario]) is kept


def test_filter_sample_file(sample_scenarios_path):
    kept = filter_for_irl(load_scenarios(str(sample_scenarios_path)))
    assert 'sample_slow_pedestrian' not in [s.scenario_id for s in kept]
    assert len(kept) == 4
