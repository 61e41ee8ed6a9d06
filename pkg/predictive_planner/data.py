"""
Scenario file ingestion, window splitting and IRL filtering.

Scenarios are stored as JSON Lines: one scenario record per line, with the field names and
units of :class:`predictive_planner.models.Scenario`. Unknown fields are rejected. Long raw
recordings (:class:`RawTrackSet`, e.g. 20 s with per-step validity flags) are cut into
7-second scenario windows with a sliding window.

Example:
    >>> scenarios = load_scenarios('scenarios.jsonl')
    >>> scenarios = filter_for_irl(scenarios)
    >>> save_scenarios(scenarios, 'filtered.jsonl')
"""

import json
import logging
from typing import List, Sequence, Type, TypeVar

import numpy as np
from pydantic import BaseModel, ValidationError

from predictive_planner.errors import ParseError, ScenarioValidationError, TooShort
from predictive_planner.models import (
    FUTURE_STEPS,
    HISTORY_STEPS,
    AgentTrack,
    DataConfig,
    RawTrack,
    RawTrackSet,
    Scenario
)


logger = logging.getLogger(__name__)

RecordT = TypeVar('RecordT', bound=BaseModel)


def _read_records(path: str, model: Type[RecordT]) -> List[RecordT]:
    records = []
    with open(path, encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            index = len(records)
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f'{path}:{line_number}: record {index} is not valid JSON ({e.msg})', index) from e
            try:
                records.append(model.model_validate(payload))
            except ValidationError as e:
                problems = '; '.join(
                    f"{'.'.join(str(p) for p in err['loc']) or '<record>'}: {err['msg']}" for err in e.errors()
                )
                raise ScenarioValidationError(
                    f'{path}:{line_number}: record {index} is invalid: {problems}', index
                ) from e
    return records


def load_scenarios(path: str) -> List[Scenario]:
    """
    Load and validate every scenario of a JSON Lines file.

    Args:
        path: Scenario file; blank lines are skipped

    Returns:
        List[Scenario]: Validated scenarios in file order (empty for an empty file)

    Raises:
        ParseError: If a line is not valid JSON
        ScenarioValidationError: If a record violates the scenario schema; both errors carry
            the zero-based ``record_index``
    """
    scenarios = _read_records(path, Scenario)
    logger.info(f'Loaded {len(scenarios)} scenarios from {path}')
    return scenarios


def save_scenarios(scenarios: Sequence[Scenario], path: str) -> None:
    """Write scenarios as JSON Lines, the inverse of :func:`load_scenarios`."""
    with open(path, 'w', encoding='utf-8') as f:
        for scenario in scenarios:
            f.write(scenario.model_dump_json())
            f.write('\n')
    logger.info(f'Saved {len(scenarios)} scenarios to {path}')


def load_track_sets(path: str) -> List[RawTrackSet]:
    """Load raw recordings (one :class:`RawTrackSet` per line) for window splitting."""
    track_sets = _read_records(path, RawTrackSet)
    logger.info(f'Loaded {len(track_sets)} raw track sets from {path}')
    return track_sets


def _hold_nearest_valid(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Replace invalid samples with the nearest valid one (earlier sample on ties)."""
    valid_idx = np.flatnonzero(valid)
    steps = np.arange(len(values))
    nearest = valid_idx[np.argmin(np.abs(steps[:, None] - valid_idx[None, :]), axis=1)]
    return values[nearest]


def _window_track(track: RawTrack, start: int, length: int) -> AgentTrack:
    window = slice(start, start + length)
    valid = np.asarray(track.valid[window], dtype=bool)
    arrays = {
        key: _hold_nearest_valid(np.asarray(getattr(track, key)[window], dtype=float), valid).tolist()
        for key in ('x', 'y', 'heading', 'speed')
    }
    return AgentTrack(id=track.id, kind=track.kind, length=track.length, width=track.width, **arrays)


def split_windows(
    raw: RawTrackSet,
    history_steps: int = HISTORY_STEPS,
    future_steps: int = FUTURE_STEPS,
    stride: int = 50,
    max_agents: int = DataConfig().max_agents
) -> List[Scenario]:
    """
    Cut a long recording into fixed-length scenario windows.

    Windows hold ``history_steps + future_steps + 1`` steps and start at 0, stride, 2 * stride,
    ... as long as they fit. Inside a window, agents never valid are dropped and gaps of the
    remaining agents hold the nearest valid sample. Windows in which the AV is never valid are
    skipped. At most ``max_agents`` agents besides the AV are kept, nearest to the AV at the
    current step first.

    Args:
        raw: Raw track set sharing one clock
        history_steps: T_h
        future_steps: T_f
        stride: Window stride in steps
        max_agents: N

    Returns:
        List[Scenario]: Scenario ids are ``<scene_id>_<start step>``

    Raises:
        TooShort: If the recording is shorter than one window
        ValueError: If ``stride`` is not positive
    """
    if stride < 1:
        raise ValueError(f'stride must be positive, got {stride}')
    length = history_steps + future_steps + 1
    if raw.num_steps < length:
        raise TooShort(f'track set {raw.scene_id!r} has {raw.num_steps} steps, a window needs {length}')

    scenarios = []
    for start in range(0, raw.num_steps - length + 1, stride):
        window = slice(start, start + length)
        present = [i for i, t in enumerate(raw.tracks) if any(t.valid[window])]
        if raw.av_index not in present:
            logger.warning(f'Skipping window at step {start} of {raw.scene_id!r}: AV is never valid')
            continue

        tracks = {i: _window_track(raw.tracks[i], start, length) for i in present}
        av = tracks[raw.av_index]
        others = [i for i in present if i != raw.av_index]
        distances = [
            np.hypot(tracks[i].x[history_steps] - av.x[history_steps], tracks[i].y[history_steps] - av.y[history_steps])
            for i in others
        ]
        kept = sorted(others[j] for j in np.argsort(distances, kind='stable')[:max_agents])
        dropped = len(raw.tracks) - len(kept) - 1
        if dropped:
            logger.debug(f'Window at step {start} of {raw.scene_id!r}: dropped {dropped} agents')

        order = sorted(kept + [raw.av_index])
        scenarios.append(Scenario(
            scenario_id=f'{raw.scene_id}_{start}',
            map=raw.map,
            agents=[tracks[i] for i in order],
            av_index=order.index(raw.av_index),
            timestep_s=raw.timestep_s
        ))

    logger.info(f'Split {raw.scene_id!r} ({raw.num_steps} steps) into {len(scenarios)} windows')
    return scenarios


def filter_for_irl(scenarios: Sequence[Scenario], min_av_speed: float = DataConfig().min_av_speed) -> List[Scenario]:
    """
    Drop scenes in which the AV barely moves.

    A scenario is removed when the mean AV speed over its whole track (history, current step
    and future) is strictly below ``min_av_speed``.
    """
    kept = [s for s in scenarios if float(np.mean(s.av.speed)) >= min_av_speed]
    if len(kept) < len(scenarios):
        logger.info(f'Filtered out {len(scenarios) - len(kept)} of {len(scenarios)} slow-AV scenarios')
    return kept
