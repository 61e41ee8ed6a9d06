"""
Learned conditional prediction model with plan fusion.

A compact encoder / interaction / decoder network over numpy arrays with hand-written
backpropagation. Each surrounding agent is encoded from its flattened recent history and
ten points along its lane; the AV plan is encoded by a separate stack. The plan embedding
enters either before agent interaction (early fusion, added to every agent embedding) or
at the decoder input (late fusion, concatenated), or not at all (``fusion='none'``).
Interaction is a single-head scaled dot-product self-attention with a residual connection.
A Gaussian-mixture head emits, per mode, agent and step, a displacement from the agent's
current position and a log standard deviation; a max-pooled head gives mode logits.

Inputs are expressed in a scene frame translated to the AV's current position.

Parameters live in one flat float64 vector whose partition order is fixed by
:func:`param_layout`:

    agent_w1, agent_b1, agent_w2, agent_b2,
    plan_w1, plan_b1, plan_w2, plan_b2          (absent when fusion is 'none')
    attn_wq, attn_wk, attn_wv,
    gmm_w, gmm_b, mode_w, mode_b

and serialize to a binary file: an 8-byte magic, a fixed header (backend, fusion, K, N,
embed_dim, T_h, T_f, D_p, parameter count) and the little-endian float64 payload.

Example:
    >>> cfg = PredictorConfig(backend='learned', fusion='early', embed_dim=32)
    >>> params = init_params(cfg, seed=0)
    >>> futures = LearnedPredictor(cfg, params).predict(history, proposal)
    >>> save_params(params, 'cmp.params')
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import log_softmax

from predictive_planner.errors import MissingParams, ShapeMismatch
from predictive_planner.models import FUTURE_STEPS, HISTORY_STEPS, PLAN_STATE_DIM, PredictorConfig
from predictive_planner.prediction.base import (
    LANE_CONTEXT_POINTS,
    AgentHistory,
    BasePredictor,
    PredictedFutures
)


logger = logging.getLogger(__name__)

MAGIC = b'CMPPARAM'
_HEADER = struct.Struct('<16s8s6IQ')

POSITION_SCALE = 50.0
SPEED_SCALE = 20.0
OUTPUT_SCALE = 10.0
AGENT_INPUT_DIM = HISTORY_STEPS * PLAN_STATE_DIM + 2 * LANE_CONTEXT_POINTS
PLAN_INPUT_DIM = FUTURE_STEPS * PLAN_STATE_DIM


@dataclass(frozen=True, eq=False)
class CmpModelParams:
    """
    Flat parameter vector of the learned predictor together with the header it was built for.

    Attributes:
        fusion (str): 'early', 'late' or 'none'
        num_modes (int): K
        max_agents (int): N
        embed_dim (int): Embedding width E
        values (np.ndarray): Flat float64 parameters in :func:`param_layout` order
        history_steps (int): T_h
        future_steps (int): T_f
        plan_dim (int): D_p
    """
    fusion: str
    num_modes: int
    max_agents: int
    embed_dim: int
    values: np.ndarray
    history_steps: int = HISTORY_STEPS
    future_steps: int = FUTURE_STEPS
    plan_dim: int = PLAN_STATE_DIM

    @classmethod
    def from_config(cls, cfg: PredictorConfig, values: np.ndarray) -> 'CmpModelParams':
        values = np.asarray(values, dtype=np.float64)
        expected = param_count(cfg)
        if values.shape != (expected,):
            raise ShapeMismatch(f'expected {expected} parameters for {cfg.fusion} fusion, got {values.shape}')
        return cls(cfg.fusion, cfg.num_modes, cfg.max_agents, cfg.embed_dim, values)

    def with_values(self, values: np.ndarray) -> 'CmpModelParams':
        return CmpModelParams(
            self.fusion, self.num_modes, self.max_agents, self.embed_dim,
            np.asarray(values, dtype=np.float64), self.history_steps, self.future_steps, self.plan_dim
        )

    def check(self, cfg: PredictorConfig) -> None:
        """
        Raise ShapeMismatch unless these parameters fit ``cfg``.
        """
        mismatches = [
            name for name, mine, theirs in (
                ('fusion', self.fusion, cfg.fusion),
                ('num_modes', self.num_modes, cfg.num_modes),
                ('embed_dim', self.embed_dim, cfg.embed_dim),
                ('history_steps', self.history_steps, HISTORY_STEPS),
                ('future_steps', self.future_steps, FUTURE_STEPS),
                ('plan_dim', self.plan_dim, PLAN_STATE_DIM)
            ) if mine != theirs
        ]
        if mismatches:
            raise ShapeMismatch(f'parameters do not match the predictor config: {", ".join(mismatches)}')
        if self.values.shape != (param_count(cfg),):
            raise ShapeMismatch(f'expected {param_count(cfg)} parameters, got {self.values.size}')

    def tensors(self) -> Dict[str, np.ndarray]:
        """Named views into ``values``."""
        return unflatten(self.values, _layout(self.fusion, self.num_modes, self.embed_dim))


def _layout(fusion: str, num_modes: int, embed_dim: int) -> List[Tuple[str, Tuple[int, ...]]]:
    e = embed_dim
    decoder_dim = 2 * e if fusion == 'late' else e
    head = num_modes * FUTURE_STEPS * 4
    layout = [
        ('agent_w1', (AGENT_INPUT_DIM, e)), ('agent_b1', (e,)),
        ('agent_w2', (e, e)), ('agent_b2', (e,))
    ]
    if fusion != 'none':
        layout += [
            ('plan_w1', (PLAN_INPUT_DIM, e)), ('plan_b1', (e,)),
            ('plan_w2', (e, e)), ('plan_b2', (e,))
        ]
    layout += [
        ('attn_wq', (e, e)), ('attn_wk', (e, e)), ('attn_wv', (e, e)),
        ('gmm_w', (decoder_dim, head)), ('gmm_b', (head,)),
        ('mode_w', (decoder_dim, num_modes)), ('mode_b', (num_modes,))
    ]
    return layout


def param_layout(cfg: PredictorConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """Ordered (name, shape) partition of the flat parameter vector for ``cfg``."""
    return _layout(cfg.fusion, cfg.num_modes, cfg.embed_dim)


def param_count(cfg: PredictorConfig) -> int:
    return int(sum(np.prod(shape) for _, shape in param_layout(cfg)))


def unflatten(values: np.ndarray, layout) -> Dict[str, np.ndarray]:
    tensors = {}
    offset = 0
    for name, shape in layout:
        size = int(np.prod(shape))
        tensors[name] = values[offset:offset + size].reshape(shape)
        offset += size
    return tensors


def flatten(tensors: Dict[str, np.ndarray], layout) -> np.ndarray:
    return np.concatenate([tensors[name].ravel() for name, _ in layout])


def init_params(cfg: PredictorConfig, seed: Optional[int] = None) -> CmpModelParams:
    """
    Deterministic scaled-Gaussian initialisation.

    Weight matrices draw from N(0, 1 / fan_in); the decoder heads are scaled down by 10 so
    training starts near zero displacement, unit sigma and uniform modes. Biases start at 0.

    Args:
        cfg: Predictor configuration
        seed: Random seed; defaults to ``cfg.rng_seed``

    Returns:
        CmpModelParams
    """
    rng = np.random.default_rng(cfg.rng_seed if seed is None else seed)
    tensors = {}
    for name, shape in param_layout(cfg):
        if len(shape) == 1:
            tensors[name] = np.zeros(shape)
            continue
        scale = 1.0 / np.sqrt(shape[0])
        if name in ('gmm_w', 'mode_w'):
            scale *= 0.1
        tensors[name] = rng.normal(0.0, scale, size=shape)
    values = flatten(tensors, param_layout(cfg))
    logger.debug(f'Initialised {values.size} parameters ({cfg.fusion} fusion, E={cfg.embed_dim})')
    return CmpModelParams.from_config(cfg, values)


def save_params(params: CmpModelParams, path: str, backend: str = 'learned') -> None:
    """
    Write parameters to the binary parameter file format.

    Args:
        params: Parameters to write
        path: Output file path
        backend: Backend name recorded in the header
    """
    header = _HEADER.pack(
        backend.encode('ascii'), params.fusion.encode('ascii'),
        params.num_modes, params.max_agents, params.embed_dim,
        params.history_steps, params.future_steps, params.plan_dim,
        params.values.size
    )
    with open(path, 'wb') as f:
        f.write(MAGIC)
        f.write(header)
        f.write(params.values.astype('<f8').tobytes())
    logger.info(f'Saved {params.values.size} model parameters to {path}')


def load_params(path: str) -> CmpModelParams:
    """
    Read parameters written by :func:`save_params`.

    Raises:
        ShapeMismatch: On a bad magic string, unknown fusion, or a payload that does not
            match the header
    """
    data = Path(path).read_bytes()
    if data[:len(MAGIC)] != MAGIC:
        raise ShapeMismatch(f'{path} is not a parameter file')
    if len(data) < len(MAGIC) + _HEADER.size:
        raise ShapeMismatch(f'{path}: truncated header')
    backend, fusion, k, n, e, t_h, t_f, d_p, count = _HEADER.unpack_from(data, len(MAGIC))
    fusion = fusion.rstrip(b'\0').decode('ascii')
    if fusion not in ('early', 'late', 'none'):
        raise ShapeMismatch(f'{path}: unknown fusion {fusion!r}')

    payload = data[len(MAGIC) + _HEADER.size:]
    if len(payload) != 8 * count:
        raise ShapeMismatch(f'{path}: header announces {count} parameters, payload holds {len(payload) / 8:g}')
    expected = int(sum(np.prod(shape) for _, shape in _layout(fusion, k, e)))
    if count != expected:
        raise ShapeMismatch(f'{path}: {count} parameters, the header config needs {expected}')

    backend = backend.rstrip(b'\0').decode('ascii')
    values = np.frombuffer(payload, dtype='<f8').astype(np.float64)
    logger.debug(f'Loaded {count} parameters ({backend} backend) from {path}')
    return CmpModelParams(fusion, k, n, e, values, t_h, t_f, d_p)


def _scene_frame(x: np.ndarray, origin: np.ndarray) -> np.ndarray:
    """Normalise (..., 4) states into the AV-centred scene frame."""
    out = np.empty_like(x, dtype=float)
    out[..., :2] = (x[..., :2] - origin) / POSITION_SCALE
    out[..., 2] = np.angle(np.exp(1j * x[..., 2])) / np.pi
    out[..., 3] = x[..., 3] / SPEED_SCALE
    return out


def encode_history(history: AgentHistory) -> np.ndarray:
    """(N, AGENT_INPUT_DIM) agent inputs: last T_h states plus lane context points."""
    origin = history.av_state[:2]
    past = _scene_frame(history.states[:, -HISTORY_STEPS:, :], origin)
    lanes = (history.lane_context - origin) / POSITION_SCALE
    return np.concatenate([past.reshape(history.num_agents, -1), lanes.reshape(history.num_agents, -1)], axis=1)


def encode_plans(plans: np.ndarray, origin: np.ndarray) -> np.ndarray:
    """(B, PLAN_INPUT_DIM) plan inputs from (B, T_f, 4) plan states."""
    if plans.shape[1:] != (FUTURE_STEPS, PLAN_STATE_DIM):
        raise ShapeMismatch(f'plans must be (B, {FUTURE_STEPS}, {PLAN_STATE_DIM}), got {plans.shape}')
    return _scene_frame(plans, origin).reshape(len(plans), -1)


@dataclass(eq=False)
class ForwardResult:
    """
    Raw outputs of one batched forward pass.

    Attributes:
        mu (np.ndarray): (B, K, N, T_f, 2) absolute means
        log_sigma (np.ndarray): (B, K, N, T_f, 2) log of the clamped standard deviations
        sigma (np.ndarray): (B, K, N, T_f, 2) clamped standard deviations
        log_probs (np.ndarray): (B, K) mode log-probabilities
        cache (dict): Intermediate activations for :func:`backward`
    """
    mu: np.ndarray
    log_sigma: np.ndarray
    sigma: np.ndarray
    log_probs: np.ndarray
    cache: dict

    def futures(self, b: int = 0) -> PredictedFutures:
        return PredictedFutures(mu=self.mu[b], sigma=self.sigma[b], mode_probs=np.exp(self.log_probs[b]))


def forward(
    agent_inputs: np.ndarray,
    plan_inputs: np.ndarray,
    current_xy: np.ndarray,
    params: CmpModelParams,
    sigma_bounds: Tuple[float, float] = (1e-2, 1e2)
) -> ForwardResult:
    """
    Batched forward pass over B plans sharing one scene.

    The agent encoding is computed once and shared by every plan.

    Args:
        agent_inputs: (N, AGENT_INPUT_DIM) from :func:`encode_history`
        plan_inputs: (B, PLAN_INPUT_DIM) from :func:`encode_plans`
        current_xy: (N, 2) current agent positions, the origin of the predicted displacements
        params: Model parameters
        sigma_bounds: Clamp applied to exp(log sigma)

    Returns:
        ForwardResult
    """
    w = params.tensors()
    fusion = params.fusion
    k, e = params.num_modes, params.embed_dim
    batch = plan_inputs.shape[0]
    n = agent_inputs.shape[0]

    h1 = np.tanh(agent_inputs @ w['agent_w1'] + w['agent_b1'])
    enc = np.tanh(h1 @ w['agent_w2'] + w['agent_b2'])

    if fusion != 'none':
        p1 = np.tanh(plan_inputs @ w['plan_w1'] + w['plan_b1'])
        g = np.tanh(p1 @ w['plan_w2'] + w['plan_b2'])
    else:
        p1 = g = np.zeros((batch, e))

    if fusion == 'early':
        z = enc[None, :, :] + g[:, None, :]
    else:
        z = np.broadcast_to(enc, (batch, n, e)).copy()

    q = z @ w['attn_wq']
    key = z @ w['attn_wk']
    v = z @ w['attn_wv']
    scores = q @ np.swapaxes(key, -1, -2) / np.sqrt(e)
    scores -= scores.max(axis=-1, keepdims=True)
    attn = np.exp(scores)
    attn /= attn.sum(axis=-1, keepdims=True)
    r = z + attn @ v

    if fusion == 'late':
        u = np.concatenate([r, np.broadcast_to(g[:, None, :], (batch, n, e))], axis=-1)
    else:
        u = r

    out = u @ w['gmm_w'] + w['gmm_b']
    out = out.reshape(batch, n, k, FUTURE_STEPS, 4).transpose(0, 2, 1, 3, 4)
    mu = current_xy[None, None, :, None, :] + OUTPUT_SCALE * out[..., :2]

    raw_log_sigma = out[..., 2:]
    log_lo, log_hi = np.log(sigma_bounds[0]), np.log(sigma_bounds[1])
    log_sigma = np.clip(raw_log_sigma, log_lo, log_hi)
    sigma = np.exp(log_sigma)
    sigma_active = (raw_log_sigma > log_lo) & (raw_log_sigma < log_hi)

    pool_idx = np.argmax(u, axis=1)
    pooled = np.take_along_axis(u, pool_idx[:, None, :], axis=1)[:, 0, :]
    logits = pooled @ w['mode_w'] + w['mode_b']
    log_probs = log_softmax(logits, axis=-1)

    cache = {
        'x': agent_inputs, 'p': plan_inputs, 'h1': h1, 'enc': enc, 'p1': p1, 'g': g,
        'z': z, 'q': q, 'k': key, 'v': v, 'attn': attn, 'u': u,
        'pool_idx': pool_idx, 'pooled': pooled, 'sigma_active': sigma_active, 'n': n
    }
    return ForwardResult(mu=mu, log_sigma=log_sigma, sigma=sigma, log_probs=log_probs, cache=cache)


def backward(
    result: ForwardResult,
    d_mu: np.ndarray,
    d_log_sigma: np.ndarray,
    d_logits: np.ndarray,
    params: CmpModelParams
) -> np.ndarray:
    """
    Gradient of a scalar loss with respect to the flat parameter vector.

    Args:
        result: Forward result of the pass being differentiated
        d_mu: (B, K, N, T_f, 2) dL/dmu
        d_log_sigma: (B, K, N, T_f, 2) dL/dlog(sigma), taken after the clamp
        d_logits: (B, K) dL/dlogits of the mode head
        params: Parameters used by the forward pass

    Returns:
        np.ndarray: Flat gradient in :func:`param_layout` order
    """
    w = params.tensors()
    c = result.cache
    fusion = params.fusion
    k, e, n = params.num_modes, params.embed_dim, c['n']
    batch = d_logits.shape[0]
    grads = {name: np.zeros_like(value) for name, value in w.items()}

    # Decoder heads
    d_out = np.empty(d_mu.shape[:-1] + (4,))
    d_out[..., :2] = OUTPUT_SCALE * d_mu
    d_out[..., 2:] = np.where(c['sigma_active'], d_log_sigma, 0.0)
    d_out = d_out.transpose(0, 2, 1, 3, 4).reshape(batch, n, -1)

    u = c['u']
    grads['gmm_w'] = np.einsum('bnd,bnh->dh', u, d_out)
    grads['gmm_b'] = d_out.sum(axis=(0, 1))
    d_u = d_out @ w['gmm_w'].T

    grads['mode_w'] = c['pooled'].T @ d_logits
    grads['mode_b'] = d_logits.sum(axis=0)
    d_pooled = d_logits @ w['mode_w'].T
    np.put_along_axis(
        d_u, c['pool_idx'][:, None, :],
        np.take_along_axis(d_u, c['pool_idx'][:, None, :], axis=1) + d_pooled[:, None, :],
        axis=1
    )

    if fusion == 'late':
        d_r = d_u[..., :e]
        d_g = d_u[..., e:].sum(axis=1)
    else:
        d_r = d_u
        d_g = None

    # Attention with residual: r = z + softmax(q k^T / sqrt(e)) v
    z, q, key, v, attn = c['z'], c['q'], c['k'], c['v'], c['attn']
    d_z = d_r.copy()
    d_attn = d_r @ np.swapaxes(v, -1, -2)
    d_v = np.swapaxes(attn, -1, -2) @ d_r
    d_scores = attn * (d_attn - np.sum(d_attn * attn, axis=-1, keepdims=True)) / np.sqrt(e)
    d_q = d_scores @ key
    d_k = np.swapaxes(d_scores, -1, -2) @ q

    grads['attn_wq'] = np.einsum('bne,bnf->ef', z, d_q)
    grads['attn_wk'] = np.einsum('bne,bnf->ef', z, d_k)
    grads['attn_wv'] = np.einsum('bne,bnf->ef', z, d_v)
    d_z += d_q @ w['attn_wq'].T + d_k @ w['attn_wk'].T + d_v @ w['attn_wv'].T

    d_enc = d_z.sum(axis=0)
    if fusion == 'early':
        d_g = d_z.sum(axis=1)

    # Agent encoder
    d_a2 = d_enc * (1.0 - c['enc'] ** 2)
    grads['agent_w2'] = c['h1'].T @ d_a2
    grads['agent_b2'] = d_a2.sum(axis=0)
    d_a1 = (d_a2 @ w['agent_w2'].T) * (1.0 - c['h1'] ** 2)
    grads['agent_w1'] = c['x'].T @ d_a1
    grads['agent_b1'] = d_a1.sum(axis=0)

    # Plan encoder
    if d_g is not None:
        d_p2 = d_g * (1.0 - c['g'] ** 2)
        grads['plan_w2'] = c['p1'].T @ d_p2
        grads['plan_b2'] = d_p2.sum(axis=0)
        d_p1 = (d_p2 @ w['plan_w2'].T) * (1.0 - c['p1'] ** 2)
        grads['plan_w1'] = c['p'].T @ d_p1
        grads['plan_b1'] = d_p1.sum(axis=0)

    return flatten(grads, _layout(fusion, k, e))


class LearnedPredictor(BasePredictor):
    """
    Prediction backend running the learned model.

    Batch prediction encodes the scene once and runs the plan-specific part of the network
    for every plan in a single pass.

    Attributes:
        cfg (PredictorConfig): Predictor configuration
        params (CmpModelParams): Model parameters matching ``cfg``
    """

    name = 'learned'

    def __init__(self, cfg: Optional[PredictorConfig] = None, params: Optional[CmpModelParams] = None):
        super().__init__(cfg)
        if params is None:
            raise MissingParams('the learned backend needs model parameters')
        params.check(self.cfg)
        self.params = params

    def _run(self, history: AgentHistory, plans: np.ndarray) -> ForwardResult:
        if history.num_agents > self.params.max_agents:
            raise ShapeMismatch(
                f'history holds {history.num_agents} agents, the model was built for {self.params.max_agents}'
            )
        return forward(
            encode_history(history),
            encode_plans(plans, history.av_state[:2]),
            history.current[:, :2],
            self.params,
            (self.cfg.sigma_floor, self.cfg.sigma_ceiling)
        )

    def _predict(self, history: AgentHistory, plan: np.ndarray) -> PredictedFutures:
        return self._run(history, plan[None]).futures(0)

    def _predict_batch(self, history: AgentHistory, plans: List[np.ndarray]) -> List[PredictedFutures]:
        result = self._run(history, np.stack(plans))
        return [result.futures(b) for b in range(len(plans))]


def cmp_forward(
    history: AgentHistory,
    plan,
    params: CmpModelParams,
    cfg: Optional[PredictorConfig] = None
) -> PredictedFutures:
    """
    Run the learned model for one plan.

    Args:
        history: Joint agent history
        plan: TrajectoryProposal or (T_f, 4) plan states
        params: Model parameters
        cfg: Predictor configuration; derived from ``params`` when omitted

    Returns:
        PredictedFutures
    """
    cfg = cfg or PredictorConfig(
        backend='learned', fusion=params.fusion, num_modes=params.num_modes,
        max_agents=params.max_agents, embed_dim=params.embed_dim
    )
    return LearnedPredictor(cfg, params).predict(history, plan)
