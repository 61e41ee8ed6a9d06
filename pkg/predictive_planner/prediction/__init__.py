from .base import AgentHistory, BasePredictor, PredictedFutures
from .ctrv import CtrvPredictor, ctrv_rollout
from .idm import IdmReactivePredictor, idm_acceleration, idm_reactive_rollout
from .learned import CmpModelParams, LearnedPredictor, cmp_forward, init_params, load_params, save_params
from .oracle import OraclePredictor
from .training import build_cmp_samples, cmp_loss, cmp_train
from .utils import build_predictor, predict, predict_batch
