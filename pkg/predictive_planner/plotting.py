"""
SVG rendering of planning scenes.

Drawing conventions:
- lanes: gray centerlines; crosswalks: light gray polygons
- AV: red box at the current step, with its past as a thin red line
- other agents: colored boxes with their past as thin lines
- proposals: colored by rank from green (most probable) to red
- recorded AV future: dashed black line
- predicted futures: thin lines per mode and agent, opacity scaled by mode probability

The world y axis points up; the drawing is flipped inside one group so coordinates stay in
meters.

Example:
    >>> svg = render_scene_svg(scenario, ranked=result.ranked, futures=result.futures[0])
    >>> Path('scene.svg').write_text(svg)
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
from lxml import etree

from predictive_planner.features import box_polygon
from predictive_planner.models import Scenario
from predictive_planner.prediction.base import PredictedFutures


logger = logging.getLogger(__name__)

SVG_NS = 'http://www.w3.org/2000/svg'
MARGIN = 15.0
AGENT_COLORS = ['#1f77b4', '#ff7f0e', '#9467bd', '#8c564b', '#e377c2', '#17becf', '#bcbd22']


def proposal_colors(count: int) -> List[str]:
    """
    Hex colors for ``count`` ranked proposals, green for rank 0 through red for the last rank.
    """
    if count <= 0:
        return []
    colors = []
    for rank in range(count):
        u = rank / (count - 1) if count > 1 else 0.0
        red = int(round(0x20 + u * (0xd0 - 0x20)))
        green = int(round(0xa0 - u * (0xa0 - 0x20)))
        colors.append(f'#{red:02x}{green:02x}20')
    return colors


def _points(xy: np.ndarray) -> str:
    return ' '.join(f'{x:.3f},{y:.3f}' for x, y in xy)


def _polyline(parent, xy: np.ndarray, color: str, width: float, **attrs) -> None:
    etree.SubElement(parent, 'polyline', points=_points(xy), fill='none', stroke=color,
                     **{'stroke-width': f'{width:g}', **attrs})


def _view_box(scenario: Scenario, ranked: Sequence) -> tuple:
    xy = [np.stack([a.x, a.y], axis=-1) for a in scenario.agents]
    xy += [np.asarray(getattr(p[0] if isinstance(p, tuple) else p, 'states'))[:, :2] for p in ranked]
    xy = np.concatenate(xy)
    lo = xy.min(axis=0) - MARGIN
    hi = xy.max(axis=0) + MARGIN
    return lo, hi


def render_scene_svg(
    scenario: Scenario,
    ranked: Optional[Sequence] = None,
    futures: Optional[PredictedFutures] = None,
    agent_indices: Optional[Sequence[int]] = None,
    width_px: int = 900
) -> str:
    """
    Render a scene as a standalone SVG document.

    Args:
        scenario: Scene to draw
        ranked: Proposals best first, or (proposal, probability) pairs; may be empty
        futures: Predicted futures of the agents in ``agent_indices`` order
        agent_indices: Track indices the rows of ``futures`` belong to
        width_px: Rendered width in pixels

    Returns:
        str: SVG document
    """
    ranked = list(ranked or [])
    lo, hi = _view_box(scenario, ranked)
    size = hi - lo
    root = etree.Element('svg', nsmap={None: SVG_NS})
    root.set('width', str(width_px))
    root.set('height', str(int(round(width_px * size[1] / size[0]))))
    root.set('viewBox', f'{lo[0]:.3f} {-hi[1]:.3f} {size[0]:.3f} {size[1]:.3f}')
    etree.SubElement(root, 'title').text = scenario.scenario_id or 'scenario'
    world = etree.SubElement(root, 'g', transform='scale(1,-1)')

    layer = etree.SubElement(world, 'g', id='map')
    for crosswalk in scenario.map.crosswalks:
        etree.SubElement(layer, 'polygon', points=_points(crosswalk.polygon), fill='#e6e6e6', stroke='none')
    for lane in scenario.map.lanes:
        _polyline(layer, lane.points, '#9a9a9a', 0.3)

    now = scenario.current_index
    layer = etree.SubElement(world, 'g', id='proposals')
    for color, item in zip(proposal_colors(len(ranked)), ranked):
        proposal = item[0] if isinstance(item, tuple) else item
        _polyline(layer, proposal.states[:, :2], color, 0.25, opacity='0.9')

    if futures is not None and futures.num_agents:
        layer = etree.SubElement(world, 'g', id='predictions')
        indices = list(agent_indices) if agent_indices is not None else scenario.other_indices()[:futures.num_agents]
        for k, prob in enumerate(futures.mode_probs):
            for n, track_index in enumerate(indices):
                color = AGENT_COLORS[track_index % len(AGENT_COLORS)]
                _polyline(layer, futures.mu[k, n], color, 0.2, opacity=f'{0.2 + 0.8 * float(prob):.3f}')

    layer = etree.SubElement(world, 'g', id='ground_truth')
    _polyline(layer, scenario.av_future()[:, :2], '#000000', 0.25, **{'stroke-dasharray': '1,0.7'})

    layer = etree.SubElement(world, 'g', id='agents')
    for i, agent in enumerate(scenario.agents):
        color = '#d62728' if i == scenario.av_index else AGENT_COLORS[i % len(AGENT_COLORS)]
        track = agent.as_array()
        _polyline(layer, track[:now + 1, :2], color, 0.15)
        box = box_polygon(track[now, :3], (agent.length, agent.width))
        etree.SubElement(layer, 'polygon', points=_points(np.asarray(box.exterior.coords)[:-1]),
                         fill=color, stroke='#000000', **{'stroke-width': '0.1', 'fill-opacity': '0.8'})

    logger.debug(f'Rendered {scenario.scenario_id} with {len(ranked)} proposals')
    return etree.tostring(root, pretty_print=True, xml_declaration=True, encoding='UTF-8').decode('utf-8')
