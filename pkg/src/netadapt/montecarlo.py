"""Repeated streaming-data trials, averaged learning curves and steady-state estimates.

Trial ``j`` of a run with master seed ``s`` draws all its data from its own
generator keyed on ``(s, j)``, in fixed blocks of :data:`CHUNK` iterations, so
a trial's data never depends on which other trials, algorithms or batch
sizes are run alongside it. Trials are advanced together along a leading
batch axis.

Primal iterates start at zero by default. With ``init="random"`` every agent
starts from an independent standard normal vector drawn from a second
generator keyed on ``(s, j, 1)``, so the data stream is unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data_model import AgentEnsemble, SampleBatch, draw_block, init_rng, trial_rng
from .graph import NetworkTopology
from .strategies import AlgorithmConfig, AlgState, init_state, step

CHUNK = 256
DIVERGENCE_FACTOR = 1e6
# upper bound on trials * CHUNK * N * M held in memory at once
_MAX_BLOCK_ELEMS = 2**22
INITS = ("zero", "random")


@dataclass(frozen=True)
class RunSpec:
    topology: NetworkTopology
    ensemble: AgentEnsemble
    configs: tuple[AlgorithmConfig, ...]
    horizon: int
    trials: int = 100
    seed: int = 0
    tail_window: int | None = None
    scenario_name: str = "custom"
    init: str = "zero"

    def __post_init__(self):
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if not self.configs:
            raise ValueError("need at least one algorithm config")
        if self.tail_window is None:
            object.__setattr__(self, "tail_window", max(1, self.horizon // 10))
        if not 1 <= self.tail_window <= self.horizon:
            raise ValueError("tail_window must lie in [1, horizon]")
        labels = [c.label for c in self.configs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"algorithm labels must be unique, got {labels}")


@dataclass
class TrialTrace:
    msd: np.ndarray
    diverged: bool
    diverged_at: int | None
    final_state: AlgState


@dataclass
class LearningCurve:
    """Trial-averaged network MSD, one value per iteration 1..T.

    Once any trial diverges the curve is +inf from that iteration on, and
    ``steady_state_msd`` is +inf.
    """

    label: str
    msd: np.ndarray
    per_agent_msd: np.ndarray
    diverged: bool
    steady_state_msd: float
    initial_msd: float
    tail_window: int
    diverged_trials: int = 0
    theory_msd: float | None = None
    extras: dict = field(default_factory=dict)

    @property
    def msd_db(self) -> np.ndarray:
        return to_db(self.msd)

    @property
    def steady_state_msd_db(self) -> float:
        return float(to_db(self.steady_state_msd))

    @property
    def per_agent_msd_db(self) -> np.ndarray:
        return to_db(self.per_agent_msd)


def to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def steady_state(curve, window: int) -> float:
    """Mean of the last ``window`` entries."""
    curve = np.asarray(curve, dtype=float)
    if window < 1:
        raise ValueError("window must be positive")
    if window > curve.size:
        raise ValueError("window longer than the curve")
    return float(np.mean(curve[-window:]))


def _simulate(
    config: AlgorithmConfig,
    topology: NetworkTopology,
    ensemble: AgentEnsemble,
    seed: int,
    trial_indices,
    horizon: int,
    tail_window: int,
    initial_primal: np.ndarray | None = None,
    init: str = "zero",
):
    """Run a group of trials side by side.

    Returns per-trial traces (n, T), tail sums of per-agent squared error
    (n, N), divergence iteration per trial (-1 if none), the final state and
    the initial network squared error of each trial (n,).
    """
    n = len(trial_indices)
    N, M = ensemble.num_agents, ensemble.dim
    rngs = [trial_rng(seed, j) for j in trial_indices]
    state = init_state(config, topology, M, (n,))
    if initial_primal is not None:
        state = AlgState(primal=np.broadcast_to(initial_primal, state.primal.shape).copy(), dual=state.dual)
    elif init == "random":
        w0 = np.stack([init_rng(seed, j).standard_normal((N, M)) for j in trial_indices])
        state = AlgState(primal=w0, dual=state.dual)
    w_true = ensemble.truth

    err0 = ((w_true - state.primal) ** 2).sum(-1).mean(-1)
    ref = np.where(err0 > 0, err0, 1.0) * DIVERGENCE_FACTOR
    traces = np.empty((n, horizon))
    tail = np.zeros((n, N))
    diverged_at = np.full(n, -1)
    alive = np.ones(n, dtype=bool)
    tail_start = horizon - tail_window

    i = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while i < horizon:
            blocks = [draw_block(ensemble, rng, CHUNK) for rng in rngs]
            U = np.stack([b.regressors for b in blocks])
            D = np.stack([b.observations for b in blocks])
            for t in range(min(CHUNK, horizon - i)):
                state = step(config, state, SampleBatch(U[:, t], D[:, t]), topology)
                sq = ((w_true - state.primal) ** 2).sum(-1)
                msd = sq.mean(-1)
                bad = alive & ~(np.isfinite(msd) & (msd <= ref))
                if bad.any():
                    diverged_at[bad] = i
                    alive &= ~bad
                    state = AlgState(
                        primal=np.where(alive[:, None, None], state.primal, 0.0),
                        dual=None if state.dual is None else np.where(alive[:, None, None], state.dual, 0.0),
                    )
                traces[:, i] = np.where(alive, msd, np.inf)
                if i >= tail_start:
                    tail += sq
                i += 1
            if not alive.any():
                traces[:, i:] = np.inf
                break
    tail[~alive] = np.inf
    return traces, tail, diverged_at, state, err0


def run_trial(
    spec: RunSpec, config: AlgorithmConfig, trial_index: int, initial_primal: np.ndarray | None = None
) -> TrialTrace:
    """Network squared-error trace of a single trial (deterministic in seed and index)."""
    traces, _, div, state, _ = _simulate(
        config, spec.topology, spec.ensemble, spec.seed, [trial_index], spec.horizon,
        spec.tail_window, initial_primal, spec.init,
    )
    d = int(div[0])
    return TrialTrace(
        msd=traces[0],
        diverged=d >= 0,
        diverged_at=d if d >= 0 else None,
        final_state=AlgState(primal=state.primal[0], dual=None if state.dual is None else state.dual[0]),
    )


def _group_size(spec: RunSpec) -> int:
    per_trial = CHUNK * spec.ensemble.num_agents * spec.ensemble.dim
    return max(1, min(spec.trials, _MAX_BLOCK_ELEMS // per_trial))


def monte_carlo_one(spec: RunSpec, config: AlgorithmConfig) -> LearningCurve:
    T, W = spec.horizon, spec.tail_window
    N = spec.ensemble.num_agents
    acc = np.zeros(T)
    tail = np.zeros(N)
    n_div = 0
    err0_sum = 0.0
    g = _group_size(spec)
    for start in range(0, spec.trials, g):
        idx = list(range(start, min(start + g, spec.trials)))
        traces, tail_sq, div, _, err0 = _simulate(
            config, spec.topology, spec.ensemble, spec.seed, idx, T, W, init=spec.init
        )
        # fixed-order reduction over trial indices
        for row, trow in zip(traces, tail_sq):
            acc += row
            tail += trow
        n_div += int((div >= 0).sum())
        for e in err0:
            err0_sum += float(e)
    curve = acc / spec.trials
    diverged = n_div > 0
    return LearningCurve(
        label=config.label,
        msd=curve,
        per_agent_msd=tail / (spec.trials * W),
        diverged=diverged,
        steady_state_msd=np.inf if diverged else steady_state(curve, W),
        initial_msd=err0_sum / spec.trials,
        tail_window=W,
        diverged_trials=n_div,
    )


def monte_carlo(spec: RunSpec) -> dict[str, LearningCurve]:
    """Averaged learning curve for every config in ``spec``, keyed by label."""
    return {c.label: monte_carlo_one(spec, c) for c in spec.configs}
