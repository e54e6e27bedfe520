"""Batch episode runner: acceptance statistics, success proxy, and speedup.

Episodes are seeded and independent, so a batch is reproducible from the
master seed alone.  Statistics mirror the usual speculative-decoding
accounting: a histogram of draft-acceptance lengths per verification step
(minimum 0, the verifier token is counted separately), per-start-position
averages over the 7-token action frame, and tokens-per-pass (histogram mean
plus the one verifier token).

Task success needs a robot simulator, which is out of scope here.  As a
surrogate, an episode "succeeds" when every emitted token stays within a
tolerance of the verifier argmax for its own position (the reference trace
recorded during decoding).  This is a token-space drift bound, not a claim
about downstream task performance.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .action_space import CHUNK_SIZE, bin_distance
from .config import RunConfig
from .draft_tree import TreeParams
from .models import HashVerifier, PrefixState, TimedDraft, TimedVerifier, make_noisy_draft
from .verify import AcceptancePolicy, VerifyOutcome, ar_decode, decode_episode


@dataclass(frozen=True)
class CostModel:
    """Latency model for one decoding round: seconds per model call.

    ``verify_latency`` is the cost of one verifier round (an AR step or a
    batched tree verification); ``draft_latency`` the cost of one draft
    proposal round (one tree level).  Free drafts are allowed.
    """

    verify_latency: float
    draft_latency: float

    def __post_init__(self) -> None:
        if self.verify_latency <= 0.0:
            raise ValueError("verify_latency must be positive")
        if self.draft_latency < 0.0:
            raise ValueError("draft_latency must be >= 0")


@dataclass(frozen=True)
class EpisodeStats:
    """Per-episode acceptance statistics for one policy."""

    mode: str
    r: int
    episode: int
    outcomes: tuple[VerifyOutcome, ...]
    histogram: tuple[int, ...]  # index = draft tokens accepted in a step
    position_sums: tuple[int, ...]  # accepted totals keyed by start position mod 7
    position_counts: tuple[int, ...]
    tokens_per_pass: float  # 1 + histogram mean, exact
    wall_clock_per_token: float
    success: bool

    @property
    def steps(self) -> int:
        return len(self.outcomes)


def policy_for_r(r: int, per_dimension_r: Sequence[int] | None = None) -> AcceptancePolicy:
    """Strict matching for r=0, distance relaxation otherwise."""
    if r == 0:
        return AcceptancePolicy.strict()
    return AcceptancePolicy.relaxed(r, per_dimension_r)


def success_proxy(tokens: Sequence[int], reference: Sequence[int], tolerance_bins: int) -> bool:
    """True iff every aligned token pair stays within ``tolerance_bins``.

    Both sequences must have the same length and consist of whole 7-token
    action frames.
    """
    if len(tokens) != len(reference):
        raise ValueError(f"sequence lengths differ: {len(tokens)} vs {len(reference)}")
    if len(tokens) % CHUNK_SIZE != 0:
        raise ValueError(f"sequences must be whole {CHUNK_SIZE}-token frames")
    return all(bin_distance(a, b) <= tolerance_bins for a, b in zip(tokens, reference))


def run_episode(
    verifier,
    draft,
    params: TreeParams,
    policy: AcceptancePolicy,
    state: PrefixState,
    length: int,
    success_tolerance: int,
    episode: int = 0,
) -> EpisodeStats:
    """Decode one episode and fold its outcomes into summary statistics."""
    start = time.perf_counter()
    tokens, outcomes = decode_episode(state, verifier, draft, params, policy, length)
    elapsed = time.perf_counter() - start

    histogram = [0] * (params.max_depth + 1)
    position_sums = [0] * CHUNK_SIZE
    position_counts = [0] * CHUNK_SIZE
    position = state.position
    reference: list[int] = []
    for outcome in outcomes:
        if outcome.accepted > params.max_depth:
            raise RuntimeError(
                f"accepted length {outcome.accepted} exceeds tree depth {params.max_depth}"
            )
        histogram[outcome.accepted] += 1
        position_sums[position % CHUNK_SIZE] += outcome.accepted
        position_counts[position % CHUNK_SIZE] += 1
        position += len(outcome.emitted)
        reference.extend(outcome.reference)

    steps = len(outcomes)
    mean_accepted = sum(i * c for i, c in enumerate(histogram)) / steps
    return EpisodeStats(
        mode=policy.mode,
        r=policy.r,
        episode=episode,
        outcomes=tuple(outcomes),
        histogram=tuple(histogram),
        position_sums=tuple(position_sums),
        position_counts=tuple(position_counts),
        tokens_per_pass=1.0 + mean_accepted,
        wall_clock_per_token=elapsed / length,
        success=success_proxy(tokens, tuple(reference[: len(tokens)]), success_tolerance),
    )


def _episode_state(index: int) -> PrefixState:
    return PrefixState(prompt_id=f"ep{index:06d}", observation_id=f"obs{index:06d}")


def build_models(config: RunConfig):
    """Construct the seeded synthetic verifier/draft pair for a config."""
    verifier = HashVerifier(vocab_size=config.vocab_size, seed=config.seed)
    draft = make_noisy_draft(
        verifier,
        agreement_p=config.agreement_p,
        noise_sigma=config.noise_sigma,
        seed=config.seed + 1,
    )
    return verifier, draft


def run_batch(config: RunConfig) -> list[EpisodeStats]:
    """Run ``episodes`` seeded episodes for every policy in the config."""
    config.validate()
    verifier, draft = build_models(config)
    params = config.tree_params()

    jobs = []
    for r in config.r_values:
        policy = policy_for_r(r, config.per_dimension_r)
        for episode in range(config.episodes):
            jobs.append((policy, episode))

    def run_one(job) -> EpisodeStats:
        policy, episode = job
        return run_episode(
            verifier,
            draft,
            params,
            policy,
            _episode_state(episode),
            config.target_length,
            config.success_tolerance,
            episode=episode,
        )

    if config.workers > 1:
        # Models are immutable and queries are pure, so episodes can run on
        # any number of threads; results keep job order.
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(run_one, jobs))
    return [run_one(job) for job in jobs]


def analytic_speedup(cost: CostModel, depth: int, tokens_per_pass: float) -> float:
    """Expected wall-clock ratio vs AR decoding under the latency model.

    AR spends one verifier round per token; a speculative pass spends one
    verifier round plus ``depth`` draft rounds for ``tokens_per_pass``
    tokens.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if tokens_per_pass <= 0.0:
        raise ValueError("tokens_per_pass must be positive")
    return tokens_per_pass * cost.verify_latency / (
        cost.verify_latency + depth * cost.draft_latency
    )


@dataclass(frozen=True)
class SpeedupMeasurement:
    """Measured AR-vs-speculative wall-clock comparison on a fixed workload."""

    measured: float
    analytic: float | None
    ar_seconds: float
    sd_seconds: float
    tokens_per_pass: float
    tokens: int
    reliable: bool
    note: str


def measure_speedup(config: RunConfig, r: int | None = None) -> SpeedupMeasurement:
    """Time AR and speculative decoding on identical seeded workloads.

    Latencies from the config's cost model are injected as sleeps around
    every model round.  Without a cost model the ratio is dominated by
    bookkeeping overhead rather than model cost, so the measurement is
    flagged as unreliable.
    """
    config.validate()
    cost = config.cost_model()
    r = config.r_values[0] if r is None else r
    policy = policy_for_r(r, config.per_dimension_r)
    params = config.tree_params()
    verifier, draft = build_models(config)

    if cost is not None:
        timed_verifier = TimedVerifier(verifier, cost.verify_latency)
        timed_draft = TimedDraft(draft, cost.draft_latency)
        reliable = True
        note = "latencies injected from cost model"
    else:
        timed_verifier, timed_draft = verifier, draft
        reliable = False
        note = "unreliable: no injected latency, ratio reflects bookkeeping only"

    states = [_episode_state(i) for i in range(config.episodes)]

    start = time.perf_counter()
    for state in states:
        ar_decode(state, timed_verifier, config.target_length)
    ar_seconds = time.perf_counter() - start

    steps = 0
    start = time.perf_counter()
    for state in states:
        _, outcomes = decode_episode(
            state, timed_verifier, timed_draft, params, policy, config.target_length
        )
        steps += len(outcomes)
    sd_seconds = time.perf_counter() - start

    # Committed tokens per verifier round; both runs commit exactly
    # episodes * target_length tokens, so the ratio is apples to apples.
    tokens = config.episodes * config.target_length
    tpp = tokens / steps if steps else 1.0
    est = analytic_speedup(cost, params.max_depth, tpp) if cost is not None else None
    return SpeedupMeasurement(
        measured=ar_seconds / sd_seconds if sd_seconds > 0 else float("inf"),
        analytic=est,
        ar_seconds=ar_seconds,
        sd_seconds=sd_seconds,
        tokens_per_pass=tpp,
        tokens=tokens,
        reliable=reliable,
        note=note,
    )
