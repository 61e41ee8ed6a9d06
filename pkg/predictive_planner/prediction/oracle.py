"""
Ground-truth prediction backend.

Returns the recorded futures of the surrounding agents, which bounds from above what any
predictor can contribute to planning quality.
"""

import numpy as np

from predictive_planner.errors import MissingParams
from predictive_planner.prediction.base import AgentHistory, BasePredictor, PredictedFutures


class OraclePredictor(BasePredictor):
    """Replays ``history.future`` as K identical modes."""

    name = 'oracle'

    def _predict(self, history: AgentHistory, plan: np.ndarray) -> PredictedFutures:
        if history.future is None:
            raise MissingParams('the oracle backend needs a history with ground-truth futures')
        return self.replicate_single_mode(history.future[:, :plan.shape[0]])
