"""
Hierarchical sequence model for cut selection.

The higher-level policy reads the candidate pool with an LSTM and emits a
tanh-squashed Gaussian ratio ``k``. The lower-level policy is a pointer
network that decodes ``floor(N * k)`` distinct cuts, one attention step at a
time, and the decode order is the order the cuts are added.

Variants:
    hem             ratio from the higher level, pointer decoding
    hem_no_h        no ratio; decoding stops when an all-ones end token is picked
    hem_ratio       fixed ratio, pointer decoding
    hem_ratio_order hem_ratio with the picks re-sorted by cut id
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from HierarchicalCutSelector.exceptions import DegenerateState
from HierarchicalCutSelector.features import NUM_FEATURES, CutSelState
from HierarchicalCutSelector.models.dtos import DecodeMode, PolicyVariant
from HierarchicalCutSelector.neural.autograd import (
    Params,
    Tensor,
    check_finite,
    clip,
    leaves,
    masked_log_softmax,
)
from HierarchicalCutSelector.neural.checkpoint import load_checkpoint, save_checkpoint
from HierarchicalCutSelector.neural.layers import AdditiveAttention, Lstm, Mlp, constant_params

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = 'hem'
LOG_SIGMA_MIN = math.log(1e-3)
LOG_SIGMA_MAX = 0.0
LOG_SIGMA_INIT = math.log(0.5)
K_EPS = 1e-12
COUNT_EPS = 1e-9
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def floor_count(ratio: float, n: int) -> int:
    """``floor(ratio * n)`` robust to float noise, capped at *n*."""
    return max(0, min(n, math.floor(ratio * n + COUNT_EPS)))


def log_sech2(x: float) -> float:
    """Stable ``log(1 - tanh(x)^2)``."""
    a = abs(x)
    return 2.0 * (math.log(2.0) - a - math.log1p(math.exp(-2.0 * a)))


def squash(raw: float) -> float:
    """Map a Gaussian draw into the open interval (0, 1)."""
    return min(max(0.5 * math.tanh(raw) + 0.5, K_EPS), 1.0 - K_EPS)


class HemNetwork:
    """Layer layout of both policy levels for a given hidden size."""

    def __init__(self, hidden_size: int) -> None:
        H = hidden_size
        self.hidden_size = H
        self.ratio_encoder = Lstm('ratio_encoder', NUM_FEATURES, H)
        self.ratio_head = Mlp('ratio_head', [H, H, 2])
        self.encoder = Lstm('encoder', NUM_FEATURES, H)
        self.decoder = Lstm('decoder', H, H)
        self.attention = AdditiveAttention('attention', H)

    def init_theta1(self, rng: np.random.Generator) -> Params:
        params = {**self.ratio_encoder.init(rng), **self.ratio_head.init(rng)}
        last = self.ratio_head.layers[-1].name
        params[f'{last}.b'][1] = LOG_SIGMA_INIT
        return params

    def init_theta2(self, rng: np.random.Generator) -> Params:
        params = {**self.encoder.init(rng), **self.decoder.init(rng), **self.attention.init(rng)}
        params['decoder.start'] = rng.uniform(-1.0, 1.0, size=self.hidden_size) / math.sqrt(self.hidden_size)
        return params

    # -- higher level -----------------------------------------------------

    def ratio_distribution(self, P1: Mapping[str, Tensor], X: np.ndarray) -> Tuple[Tensor, Tensor]:
        """Return ``(mu, log_sigma)`` read from the last encoder state."""
        _, (h, _) = self.ratio_encoder(P1, X)
        out = self.ratio_head(P1, h)
        return out[0], clip(out[1], LOG_SIGMA_MIN, LOG_SIGMA_MAX)

    @staticmethod
    def ratio_log_density(mu: Tensor, log_sigma: Tensor, raw: float) -> Tensor:
        """Log-density of ``k = 0.5 tanh(raw) + 0.5`` under the squashed Gaussian."""
        z = (mu - raw) * (-log_sigma).exp()
        log_normal = z * z * (-0.5) - log_sigma - HALF_LOG_2PI
        return log_normal - (math.log(0.5) + log_sech2(raw))

    # -- lower level ------------------------------------------------------

    def pointer(
        self,
        P2: Mapping[str, Tensor],
        X: np.ndarray,
        max_steps: int,
        pick: Callable[[int, np.ndarray, np.ndarray], int],
        end_index: Optional[int] = None,
    ) -> Tuple[List[int], Tensor, bool]:
        """
        Decode up to *max_steps* distinct rows of *X*.

        *pick(step, probabilities, allowed)* chooses each index. Decoding stops
        early when *end_index* is picked; that pick counts in the log-probability
        but not in the returned indices.

        Returns:
            ``(indices, log_probability, ended)``.
        """
        logp = Tensor(0.0)
        if max_steps == 0:
            return [], logp, False
        encoded, state = self.encoder(P2, X)
        keys = self.attention.keys(P2, encoded)
        allowed = np.ones(len(encoded), dtype=bool)
        query = P2['decoder.start']
        picked: List[int] = []
        for step in range(max_steps):
            state = self.decoder.step(P2, query, state)
            log_probs = masked_log_softmax(self.attention(P2, keys, state[0]), allowed)
            probs = np.where(allowed, np.exp(log_probs.value), 0.0)
            j = int(pick(step, probs, allowed))
            logp = logp + log_probs[j]
            if end_index is not None and j == end_index:
                return picked, logp, True
            picked.append(j)
            allowed[j] = False
            query = encoded[j]
        return picked, logp, False


@dataclass
class HemParams:
    """Both parameter groups plus the settings needed to rebuild the network."""
    theta1: Params
    theta2: Params
    hidden_size: int = 128
    variant: PolicyVariant = PolicyVariant.HEM
    fixed_ratio: float = 0.2
    network: HemNetwork = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.network = HemNetwork(self.hidden_size)

    @classmethod
    def initialize(
        cls,
        rng: np.random.Generator,
        hidden_size: int = 128,
        variant: PolicyVariant = PolicyVariant.HEM,
        fixed_ratio: float = 0.2,
    ) -> 'HemParams':
        net = HemNetwork(hidden_size)
        return cls(net.init_theta1(rng), net.init_theta2(rng), hidden_size, variant, fixed_ratio)

    def replace(self, theta1: Optional[Params] = None, theta2: Optional[Params] = None) -> 'HemParams':
        return HemParams(
            theta1 if theta1 is not None else self.theta1,
            theta2 if theta2 is not None else self.theta2,
            self.hidden_size,
            self.variant,
            self.fixed_ratio,
        )

    def save(self, path: Path, metadata: Optional[Dict] = None) -> None:
        meta = {
            'hidden_size': self.hidden_size,
            'variant': self.variant.value,
            'fixed_ratio': self.fixed_ratio,
            **(metadata or {}),
        }
        save_checkpoint(path, CHECKPOINT_KIND, {'theta1': self.theta1, 'theta2': self.theta2}, meta)

    @classmethod
    def load(cls, path: Path) -> 'HemParams':
        _, groups, meta = load_checkpoint(path, CHECKPOINT_KIND)
        return cls(
            groups['theta1'],
            groups['theta2'],
            int(meta.get('hidden_size', 128)),
            PolicyVariant(meta.get('variant', PolicyVariant.HEM.value)),
            float(meta.get('fixed_ratio', 0.2)),
        )


@dataclass(frozen=True)
class HemAction:
    """
    A sampled or greedy selection.

    ``raw`` is the pre-squash Gaussian value behind ``k`` (NaN when the ratio
    does not come from the higher level) and ``ended`` marks an end-token stop.
    """
    k: float
    indices: Tuple[int, ...]
    logp_h: float = 0.0
    logp_l: float = 0.0
    raw: float = math.nan
    ended: bool = False

    @property
    def m(self) -> int:
        return len(self.indices)

    @property
    def log_prob(self) -> float:
        return self.logp_h + self.logp_l


def _picker(mode: DecodeMode, rng: Optional[np.random.Generator]):
    if mode == DecodeMode.GREEDY:
        return lambda step, probs, allowed: int(np.argmax(np.where(allowed, probs, -1.0)))
    if rng is None:
        raise ValueError("Sampling needs a random generator")
    return lambda step, probs, allowed: int(rng.choice(len(probs), p=probs / probs.sum()))


def _features(state: CutSelState) -> np.ndarray:
    return state.matrix.reshape(state.N, NUM_FEATURES)


def sample_ratio(
    params: HemParams,
    state: CutSelState,
    rng: Optional[np.random.Generator] = None,
    mode: DecodeMode = DecodeMode.SAMPLE,
) -> Tuple[float, float, float]:
    """
    Draw the selection ratio from the higher-level policy.

    Returns:
        ``(k, logp_h, raw)``; greedy mode uses ``raw = mu``.

    Raises:
        DegenerateState: for an empty pool.
    """
    if state.N == 0:
        raise DegenerateState("Cannot choose a ratio for an empty candidate pool")
    net = params.network
    P1 = constant_params(params.theta1)
    mu, log_sigma = net.ratio_distribution(P1, _features(state))
    if mode == DecodeMode.GREEDY:
        raw = float(mu.value)
    else:
        if rng is None:
            raise ValueError("Sampling needs a random generator")
        raw = float(mu.value + math.exp(float(log_sigma.value)) * rng.standard_normal())
    logp_h = net.ratio_log_density(mu, log_sigma, raw)
    check_finite(logp_h, 'higher-level log-density')
    return squash(raw), float(logp_h.value), raw


def pointer_decode(
    params: HemParams,
    state: CutSelState,
    m: int,
    mode: DecodeMode = DecodeMode.GREEDY,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[List[int], float]:
    """Decode *m* distinct cut positions; returns ``(indices, logp_l)``."""
    if not 0 <= m <= state.N:
        raise ValueError(f"m={m} outside 0..{state.N}")
    indices, logp, _ = params.network.pointer(
        constant_params(params.theta2), _features(state), m, _picker(mode, rng)
    )
    check_finite(logp, 'lower-level log-probability')
    return indices, float(logp.value)


def _with_end_token(state: CutSelState) -> np.ndarray:
    return np.vstack([_features(state), np.ones((1, NUM_FEATURES))])


def hem_select(
    params: HemParams,
    state: CutSelState,
    rng: Optional[np.random.Generator] = None,
    mode: DecodeMode = DecodeMode.SAMPLE,
    order_by_id: bool = False,
) -> HemAction:
    """
    Select an ordered subset of the pool according to ``params.variant``.

    Greedy mode uses ``k = 0.5 tanh(mu) + 0.5`` and argmax decoding.
    """
    N = state.N
    if N == 0:
        return HemAction(k=0.0, indices=())

    pick = _picker(mode, rng)
    P2 = constant_params(params.theta2)
    net = params.network

    if params.variant == PolicyVariant.HEM_NO_H:
        indices, logp, ended = net.pointer(P2, _with_end_token(state), N + 1, pick, end_index=N)
        check_finite(logp, 'lower-level log-probability')
        action = HemAction(k=len(indices) / N, indices=tuple(indices), logp_l=float(logp.value), ended=ended)
    elif params.variant == PolicyVariant.HEM_RATIO:
        k = params.fixed_ratio
        indices, logp_l = pointer_decode(params, state, floor_count(k, N), mode, rng)
        action = HemAction(k=k, indices=tuple(indices), logp_l=logp_l)
    else:
        k, logp_h, raw = sample_ratio(params, state, rng, mode)
        indices, logp_l = pointer_decode(params, state, floor_count(k, N), mode, rng)
        action = HemAction(k=k, indices=tuple(indices), logp_h=logp_h, logp_l=logp_l, raw=raw)

    if order_by_id:
        ids = state.cut_ids if len(state.cut_ids) == N else range(N)
        action = HemAction(
            action.k, tuple(sorted(action.indices, key=lambda i: ids[i])),
            action.logp_h, action.logp_l, action.raw, action.ended,
        )
    return action


def action_log_prob(
    params: HemParams,
    state: CutSelState,
    action: HemAction,
    P1: Optional[Mapping[str, Tensor]] = None,
    P2: Optional[Mapping[str, Tensor]] = None,
) -> Tuple[Tensor, Tensor]:
    """
    Rebuild ``(log pi_h, log pi_l)`` of a recorded action on a fresh tape.

    Pass leaf tensors as *P1*/*P2* to differentiate; the decode is forced
    to replay ``action.indices`` (and the end token when ``action.ended``).
    """
    net = params.network
    P1 = P1 if P1 is not None else constant_params(params.theta1)
    P2 = P2 if P2 is not None else constant_params(params.theta2)
    N = state.N
    script = list(action.indices)

    if params.variant == PolicyVariant.HEM_NO_H:
        if action.ended:
            script.append(N)
        X = _with_end_token(state)
        _, logp_l, _ = net.pointer(P2, X, len(script), lambda step, p, a: script[step], end_index=N)
    else:
        _, logp_l, _ = net.pointer(P2, _features(state), len(script), lambda step, p, a: script[step])

    if params.variant == PolicyVariant.HEM and N > 0:
        mu, log_sigma = net.ratio_distribution(P1, _features(state))
        logp_h = net.ratio_log_density(mu, log_sigma, action.raw)
    else:
        logp_h = Tensor(0.0)
    return logp_h, logp_l


def log_prob_gradients(
    params: HemParams, state: CutSelState, action: HemAction
) -> Tuple[Params, Params, float, float]:
    """Gradients of ``log pi_h`` w.r.t. theta1 and ``log pi_l`` w.r.t. theta2."""
    P1, P2 = leaves(params.theta1), leaves(params.theta2)
    logp_h, logp_l = action_log_prob(params, state, action, P1, P2)
    check_finite(logp_h, 'higher-level log-density')
    check_finite(logp_l, 'lower-level log-probability')
    if logp_h.requires_grad:
        logp_h.backward()
    if logp_l.requires_grad:
        logp_l.backward()
    grads1 = {n: t.grad if t.grad is not None else np.zeros_like(t.value) for n, t in P1.items()}
    grads2 = {n: t.grad if t.grad is not None else np.zeros_like(t.value) for n, t in P2.items()}
    return grads1, grads2, float(logp_h.value), float(logp_l.value)


class HemSelector:
    """
    Cut selector backed by a hierarchical policy snapshot.

    With ``record=True`` every non-empty decision is kept in ``history`` as
    ``(state, action)`` so a trainer can rebuild its log-probability.
    """

    def __init__(
        self,
        params: HemParams,
        mode: DecodeMode = DecodeMode.GREEDY,
        order_by_id: bool = False,
        record: bool = False,
        name: Optional[str] = None,
    ) -> None:
        self.params = params
        self.mode = mode
        self.order_by_id = order_by_id
        self.record = record
        self.history: List[Tuple[CutSelState, HemAction]] = []
        self.name = name or (params.variant.value + ('_order' if order_by_id else ''))

    def select(self, state, cuts, rng) -> List[int]:
        action = hem_select(self.params, state, rng, self.mode, self.order_by_id)
        if self.record and state.N > 0:
            self.history.append((state, action))
        return list(action.indices)
