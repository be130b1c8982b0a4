"""End-to-end streaming run: ingest chunks once, update the SVD, fit, evaluate.

The SVD is updated chunk by chunk; by default the quadratic manifold is built
only once after the last chunk. Validation and test trajectories are held in
memory and only used for the gamma sweep and the reported errors.
"""
import json
import logging
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import datagen, isvd, qmf
from .errors import ArgumentError, ConfigurationError, StreamError
from .manifold import reconstruct, relative_error
from .qm import GreedyCache, GreedyConfig, build_manifold, linear_manifold

log = logging.getLogger(__name__)

DEFAULT_SWEEP = (1e-8, 1e-6, 1e-4, 1e-2, 1e0)
WAVE_SOURCE = "gen:wave"


@dataclass
class StreamConfig:
    chunk_width: int = 100
    q: int = 150
    n: int = 15
    gammas: tuple = DEFAULT_SWEEP
    source: str = WAVE_SOURCE
    checkpoint_path: str | None = None
    checkpoint_every: int = 0
    rebuild_every: int = 0
    linear: bool = False
    keep_v: bool = True
    reuse_selection: bool = False
    max_chunks: int | None = None
    reproducible: bool = False
    wave: datagen.WaveConfig = field(default_factory=datagen.WaveConfig)
    train_mus: tuple = datagen.TRAIN_MUS
    validation_mu: float = datagen.VALIDATION_MU
    test_mu: float = datagen.TEST_MU

    def __post_init__(self):
        self.gammas = tuple(float(g) for g in self.gammas)
        if self.chunk_width < 1:
            raise ArgumentError(f"chunk width must be >= 1, got {self.chunk_width}")
        if not 1 <= self.n <= self.q:
            raise ArgumentError(f"need 1 <= n <= q, got n={self.n}, q={self.q}")
        if not self.gammas:
            raise ArgumentError("gamma sweep is empty")
        if any(not g > 0.0 for g in self.gammas):
            raise ArgumentError(f"gamma values must be > 0, got {self.gammas}")
        if self.checkpoint_every < 0 or self.rebuild_every < 0:
            raise ArgumentError("checkpoint/rebuild intervals must be >= 0")

    @property
    def rebuild_policy(self):
        return f"every-{self.rebuild_every}" if self.rebuild_every else "final-only"


@dataclass
class RunReport:
    singular_values: list = field(default_factory=list)
    selected_indices: list = field(default_factory=list)
    gamma: float | None = None
    validation_error: float | None = None
    test_error: float | None = None
    wall_seconds: float = 0.0
    chunks_processed: int = 0
    n: int = 0
    q: int = 0
    chunk_width: int = 0
    columns_seen: int = 0
    linear: bool = False
    sweep: list = field(default_factory=list)
    linear_baseline: dict = field(default_factory=dict)
    rebuilds: list = field(default_factory=list)
    peak_resident_estimate_bytes: int = 0
    complete: bool = True

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())


def rechunk_blocks(blocks, width):
    """Re-slice a stream of N x p_i blocks into N x ``width`` chunks."""
    pending = []
    have = 0
    for block in blocks:
        start = 0
        cols = block.shape[1]
        while start < cols:
            take = min(width - have, cols - start)
            pending.append(block[:, start:start + take])
            have += take
            start += take
            if have == width:
                yield pending[0] if len(pending) == 1 else np.hstack(pending)
                pending, have = [], 0
    if pending:
        yield np.hstack(pending)


def open_source(cfg):
    """Chunk iterator for the configured source, plus in-memory validation/test data.

    For file sources the validation and test matrices are ``None`` unless
    supplied separately by the caller.
    """
    if cfg.source == WAVE_SOURCE:
        chunks = datagen.wave_stream(cfg.wave, cfg.train_mus, cfg.chunk_width)
        validation = datagen.trajectory_matrix(replace(cfg.wave, mu=cfg.validation_mu))
        test = datagen.trajectory_matrix(replace(cfg.wave, mu=cfg.test_mu))
        return chunks, validation, test
    if cfg.source.startswith("gen:"):
        raise ArgumentError(f"unknown generator {cfg.source!r}; only {WAVE_SOURCE!r} exists")
    return rechunk_blocks(qmf.iter_source(cfg.source), cfg.chunk_width), None, None


def checkpoint(state, path, chunks_processed=0, chunk_width=0):
    qmf.save_checkpoint(state, path, chunks_processed, chunk_width)


def resume(path, q=None, chunk_width=None, keep_v=None):
    """Load a checkpoint, checking it against the run that wants to continue it."""
    state, meta = qmf.load_checkpoint(path)
    if q is not None and state.q_max != q:
        raise ConfigurationError(f"checkpoint {path} was written with q={state.q_max}, run uses q={q}")
    if chunk_width is not None and meta["chunk_width"] not in (0, chunk_width):
        raise ConfigurationError(
            f"checkpoint {path} was written with chunk width {meta['chunk_width']}, run uses {chunk_width}"
        )
    if keep_v is not None and state.keeps_v != keep_v:
        raise ConfigurationError(f"checkpoint {path} disagrees on keeping right singular vectors")
    return state, meta["chunks_processed"]


def peak_resident_estimate(n_rows, n_cols, q, p):
    """Bytes held by the factors plus one update's working set."""
    return 8 * ((n_rows + n_cols) * q + n_rows * (q + p) * 2)


def ingest(chunks, cfg, state=None, skip=0, on_rebuild=None):
    """Drive the SVD over ``chunks`` (each read once). Returns ``(state, n_chunks, complete)``."""
    processed = skip
    seen = 0
    complete = True
    for index, C in enumerate(chunks):
        seen = index + 1
        if index < skip:
            continue
        if cfg.max_chunks is not None and processed >= cfg.max_chunks:
            complete = False
            break
        C = np.asarray(C, dtype=np.float64)
        if state is None:
            state = isvd.init_from_chunk(C, cfg.q, keep_v=cfg.keep_v)
        else:
            if C.ndim != 2 or C.shape[0] != state.n_rows:
                raise StreamError(
                    f"expected {state.n_rows} rows, got shape {C.shape}", chunk_index=index
                )
            state = isvd.update(state, C)
        processed += 1
        if cfg.checkpoint_path and cfg.checkpoint_every and processed % cfg.checkpoint_every == 0:
            checkpoint(state, cfg.checkpoint_path, processed, cfg.chunk_width)
        if on_rebuild is not None and cfg.rebuild_every and processed % cfg.rebuild_every == 0:
            on_rebuild(state, processed)
    if state is None:
        raise StreamError("input source yielded no chunks")
    if seen < skip:
        raise StreamError(f"source ended after {seen} chunks, checkpoint expects at least {skip}")
    if cfg.checkpoint_path:
        checkpoint(state, cfg.checkpoint_path, processed, cfg.chunk_width)
    return state, processed, complete


def evaluate(man, test):
    """Squared relative reconstruction error of ``test`` through the manifold."""
    return relative_error(reconstruct(man, test), test)


def sweep_gamma(state, cfg, validation, gammas=None, cache=None):
    """Fit one manifold per gamma and keep the one with the lowest validation error.

    Exact ties go to the smaller gamma. Returns ``(best_gamma, manifold, sweep)``
    where ``sweep`` lists ``{"gamma", "validation_error", "selected"}`` per value.
    """
    gammas = cfg.gammas if gammas is None else tuple(gammas)
    if not gammas:
        raise ArgumentError("gamma sweep is empty")
    if validation is None or np.asarray(validation).size == 0:
        raise ArgumentError("gamma sweep needs validation data")
    U, sigma, V = state.factors()
    if sigma.shape[0] < cfg.n:
        raise ArgumentError(f"SVD rank {sigma.shape[0]} is smaller than n={cfg.n}")
    cache = GreedyCache() if cache is None else cache
    selected = None
    best = None
    sweep = []
    for gamma in sorted(gammas):
        man = build_manifold(U, sigma, V, GreedyConfig(cfg.n, cfg.q, gamma), cache, selected)
        if cfg.reuse_selection:
            selected = man.selected
        err = evaluate(man, validation)
        sweep.append({"gamma": gamma, "validation_error": err, "selected": list(man.selected)})
        if best is None or err < best[0]:
            best = (err, gamma, man)
    return best[1], best[2], sweep


def run_stream(cfg, chunks=None, validation=None, test=None):
    """Run the streaming pipeline; returns ``(state, report, manifold)``.

    ``chunks`` overrides the configured source (any iterable of N x p arrays;
    it is iterated exactly once). The manifold is ``None`` when the run was
    stopped early by ``max_chunks`` or when right singular vectors are discarded.
    """
    t0 = time.perf_counter()
    if chunks is None:
        chunks, gen_val, gen_test = open_source(cfg)
        validation = gen_val if validation is None else validation
        test = gen_test if test is None else test

    state, skip = None, 0
    if cfg.checkpoint_path and os.path.exists(cfg.checkpoint_path):
        state, skip = resume(cfg.checkpoint_path, cfg.q, cfg.chunk_width, cfg.keep_v)
        log.info("resuming from %s after %d chunks", cfg.checkpoint_path, skip)

    report = RunReport(n=cfg.n, q=cfg.q, chunk_width=cfg.chunk_width, linear=cfg.linear)

    def on_rebuild(st, processed):
        if st.keeps_v and st.rank >= cfg.n:
            U, sigma, V = st.factors()
            man = build_manifold(U, sigma, V, GreedyConfig(cfg.n, cfg.q, cfg.gammas[0]))
            report.rebuilds.append({"chunk": processed, "selected": list(man.selected)})

    state, processed, complete = ingest(chunks, cfg, state, skip, on_rebuild)
    report.chunks_processed = processed
    report.columns_seen = state.n_cols_seen
    report.singular_values = state.sigma.tolist()
    report.complete = complete
    report.peak_resident_estimate_bytes = peak_resident_estimate(
        state.n_rows, state.n_cols_seen, cfg.q, cfg.chunk_width
    )

    man = None
    if complete and state.rank >= cfg.n:
        lin = linear_manifold(state.U, cfg.n)
        if validation is not None:
            report.linear_baseline["validation_error"] = evaluate(lin, validation)
        if test is not None:
            report.linear_baseline["test_error"] = evaluate(lin, test)
        if cfg.linear:
            man = lin
            report.gamma = 0.0
        elif state.keeps_v:
            if len(cfg.gammas) == 1 and validation is None:
                U, sigma, V = state.factors()
                report.gamma = cfg.gammas[0]
                man = build_manifold(U, sigma, V, GreedyConfig(cfg.n, cfg.q, report.gamma))
            else:
                report.gamma, man, report.sweep = sweep_gamma(state, cfg, validation)
                log.info("gamma sweep selected %g", report.gamma)
        if man is not None:
            report.selected_indices = list(man.selected)
            if validation is not None:
                report.validation_error = evaluate(man, validation)
            if test is not None:
                report.test_error = evaluate(man, test)
    elif complete:
        log.warning("SVD rank %d is below n=%d; no manifold built", state.rank, cfg.n)

    report.wall_seconds = 0.0 if cfg.reproducible else time.perf_counter() - t0
    return state, report, man
