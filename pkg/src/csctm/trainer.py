"""Training orchestration: sequential loop and decentralized parallel scheme.

Sequential mode processes one sample at a time in a seeded shuffle order and
is bitwise reproducible.  Decentralized mode gives every clause its own
random stream and lets worker threads train disjoint clause subsets against
a shared voting tally of cached per-example vote sums; the only cross-thread
synchronization is the tally's fetch-add.  Workers deliberately act on stale
tallies - if the clauses stop changing, the cached sums converge to the true
vote sums (eventual consistency).
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass

import numpy as np

from .core import INFERENCE, literal_matrix
from .feedback import (
    FeedbackParams,
    _refresh_row,
    _type_i_row,
    _type_ii_row,
    _visit_py,
    type_i_feedback_bank,
    type_ii_feedback_bank,
    update_probability,
)

logger = logging.getLogger("csctm")

SEQUENTIAL = "seq"
DECENTRALIZED = "par"

METRICS_FIELDS = (
    "epoch",
    "split",
    "accuracy",
    "avg_literals_per_clause",
    "over_budget_fraction",
    "elapsed_ms",
)


@dataclass
class TrainConfig:
    epochs: int = 10
    seed: int = 0
    workers: int = 1
    mode: str = SEQUENTIAL
    b_batch: int = 1  # examples per clause visit in decentralized mode

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.b_batch < 1:
            raise ValueError("b_batch must be >= 1")
        if self.mode not in (SEQUENTIAL, DECENTRALIZED):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class EpochMetrics:
    epoch: int
    split: str
    accuracy: float
    avg_literals_per_clause: float
    over_budget_fraction: float
    elapsed_ms: float

    def line(self, with_elapsed=True):
        parts = [
            str(self.epoch),
            self.split,
            f"{self.accuracy:.6f}",
            f"{self.avg_literals_per_clause:.6f}",
            f"{self.over_budget_fraction:.6f}",
        ]
        if with_elapsed:
            parts.append(f"{self.elapsed_ms:.1f}")
        return ",".join(parts)


class ExamplePool:
    """Immutable training examples with precomputed literal matrices."""

    # Below this many literals the decentralized loop runs its plain-Python
    # kernels, which need row tuples instead of array views.
    NARROW_LITERALS = 128

    def __init__(self, X, y):
        self.X = np.asarray(X, dtype=np.uint8)
        self.y = np.asarray(y, dtype=np.int64)
        self.literals_u8 = literal_matrix(self.X)
        self.literals_f32 = self.literals_u8.astype(np.float32)
        self.literals_bool = self.literals_u8.astype(bool)
        self.literals_nbool = ~self.literals_bool
        self.labels_list = self.y.tolist()
        if self.literals_u8.shape[1] <= self.NARROW_LITERALS:
            self.literal_rows = [tuple(r) for r in self.literals_u8.tolist()]
        else:
            self.literal_rows = None

    @classmethod
    def from_dataset(cls, dataset):
        return cls(dataset.X, dataset.y)

    def __len__(self):
        return self.X.shape[0]


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray  # confusion[true, predicted]
    n_examples: int


def evaluate(model, dataset):
    """Inference-mode accuracy and per-class confusion counts."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    literals = literal_matrix(dataset.X).astype(np.float32)
    predicted = model.classify_batch(literals)
    truth = np.asarray(dataset.y, dtype=np.int64)
    confusion = np.zeros((model.n_classes, model.n_classes), dtype=np.int64)
    np.add.at(confusion, (truth, predicted), 1)
    return EvalResult(
        accuracy=float((predicted == truth).mean()),
        confusion=confusion,
        n_examples=len(dataset),
    )


def split_dataset(dataset, test_fraction=0.2, seed=0):
    """Seeded 80/20-style split used when no designated test set exists."""
    n = len(dataset)
    order = np.random.default_rng(seed).permutation(n)
    n_test = int(round(n * test_fraction))
    test_idx, train_idx = order[:n_test], order[n_test:]
    return dataset.subset(train_idx), dataset.subset(test_idx)


def _update_bank(bank, lit_u8, lit_f32, y, T, params, rng):
    """One resource-allocated update of a whole bank for one sample.

    The vote sum driving the update probability uses inference-mode outputs
    (empty clauses do not vote), the same quantity the decentralized tally
    caches; feedback-table column selection inside the Type I/II rules still
    follows the training-mode convention for empty clauses.
    """
    v = int(bank.clause_outputs(lit_f32, INFERENCE) @ bank.weights)
    p = update_probability(v, y, T)
    if p <= 0.0:
        return
    fired = rng.random(bank.n_clauses) < p
    positive = bank.weights > 0
    if y == 1:
        rows_i = np.flatnonzero(fired & positive)
        rows_ii = np.flatnonzero(fired & ~positive)
    else:
        rows_i = np.flatnonzero(fired & ~positive)
        rows_ii = np.flatnonzero(fired & positive)
    type_i_feedback_bank(bank, rows_i, lit_u8, params)
    type_ii_feedback_bank(bank, rows_ii, lit_u8)


def train_epoch_sequential(model, pool, rng, params):
    """One pass over the pool in a freshly shuffled order, mutating the model."""
    if len(pool) == 0:
        raise ValueError("cannot train on an empty dataset")
    q = len(model.banks)
    order = rng.permutation(len(pool))
    for i in order:
        lit_u8 = pool.literals_u8[i]
        lit_f32 = pool.literals_f32[i]
        label = int(pool.y[i])
        if q == 1:
            _update_bank(model.banks[0], lit_u8, lit_f32, label, model.T, params, rng)
        else:
            _update_bank(model.banks[label], lit_u8, lit_f32, 1, model.T, params, rng)
            other = int(rng.integers(q - 1))
            if other >= label:
                other += 1
            _update_bank(model.banks[other], lit_u8, lit_f32, 0, model.T, params, rng)


def train_sequential(model, train_dataset, cfg, test_dataset=None, on_epoch=None):
    """Train for cfg.epochs and return one EpochMetrics per (epoch, split)."""
    pool = ExamplePool.from_dataset(train_dataset)
    rng = np.random.default_rng(cfg.seed)
    params = FeedbackParams(
        s=model.s,
        budget=model.budget,
        boost_true_positive=model.boost_true_positive,
        rng=rng,
    )
    records = []
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        train_epoch_sequential(model, pool, rng, params)
        elapsed_ms = (time.perf_counter() - t0) * 1000.0
        epoch_records = _epoch_metrics(
            model, epoch, elapsed_ms, train_dataset, test_dataset
        )
        records.extend(epoch_records)
        if on_epoch is not None:
            on_epoch(epoch_records)
    return records


def _epoch_metrics(model, epoch, elapsed_ms, train_dataset, test_dataset):
    l_ave = model.avg_literals()
    over = model.over_budget_fraction()
    out = [
        EpochMetrics(
            epoch=epoch,
            split="train",
            accuracy=evaluate(model, train_dataset).accuracy,
            avg_literals_per_clause=l_ave,
            over_budget_fraction=over,
            elapsed_ms=elapsed_ms,
        )
    ]
    if test_dataset is not None and len(test_dataset) > 0:
        out.append(
            EpochMetrics(
                epoch=epoch,
                split="test",
                accuracy=evaluate(model, test_dataset).accuracy,
                avg_literals_per_clause=l_ave,
                over_budget_fraction=over,
                elapsed_ms=elapsed_ms,
            )
        )
    return out


class _UniformSource:
    """Block-buffered uniform draws for the decentralized hot loop.

    Array fills from numpy generators release the interpreter lock; drawn
    per visit under many threads that turns into a lock handoff storm.
    Drawing in large blocks makes releases negligible while consuming the
    same deterministic stream.
    """

    __slots__ = ("rng", "_buf", "_pos")
    BLOCK = 4096

    def __init__(self, rng):
        self.rng = rng
        self._buf = []
        self._pos = 0

    def _refill(self, need):
        self._buf = self.rng.random(max(self.BLOCK, need)).tolist()
        self._pos = 0

    def one(self):
        if self._pos >= len(self._buf):
            self._refill(1)
        v = self._buf[self._pos]
        self._pos += 1
        return v

    def take(self, k):
        if self._pos + k > len(self._buf):
            self._refill(k)
        out = self._buf[self._pos : self._pos + k]
        self._pos += k
        return out

    def random(self, size):
        # Generator-compatible entry point for the array kernels.
        return np.asarray(self.take(size))


class VotingTally:
    """Cached per-example vote sums plus per-(clause, example) output bits.

    votes[b, i] caches the inference-mode vote sum of bank b on example i.
    prev_outputs[b, j, i] is the clause output recorded the last time clause
    j of bank b processed example i; rows are owned by the clause's worker,
    so only the vote counters need the fetch-add lock.
    """

    def __init__(self, n_banks, n_clauses, n_examples):
        self.votes = np.zeros((n_banks, n_examples), dtype=np.int64)
        self.prev_outputs = np.zeros((n_banks, n_clauses, n_examples), dtype=np.uint8)
        self._lock = threading.Lock()

    def read(self, bank_index, i):
        return int(self.votes[bank_index, i])

    def fetch_add(self, bank_index, i, delta):
        with self._lock:
            self.votes[bank_index, i] += delta


def refresh_tally(pool, model, tally):
    """Recompute every cached vote sum and output bit from scratch."""
    for b, bank in enumerate(model.banks):
        outputs = bank.clause_outputs_batch(pool.literals_f32, INFERENCE)
        tally.votes[b, :] = outputs @ bank.weights
        tally.prev_outputs[b, :, :] = outputs.T
    return tally


def settle_tally(pool, model, tally):
    """One full frozen sweep: apply the output-delta rule to every pair.

    With clauses frozen this visits each (clause, example) pair once,
    correcting any stale cached sums; afterwards every cached vote sum
    equals the freshly computed one.
    """
    for b, bank in enumerate(model.banks):
        outputs = bank.clause_outputs_batch(pool.literals_f32, INFERENCE)
        deltas = outputs.T.astype(np.int64) - tally.prev_outputs[b].astype(np.int64)
        tally.votes[b, :] += bank.weights @ deltas
        tally.prev_outputs[b, :, :] = outputs.T
    return tally


def update_clause_decentralized(
    clause, bank_index, pool, tally, example_indices, T, params
):
    """Feedback for one clause over a batch of examples, against cached sums.

    Tally corrections happen only inside the fired branch and only when the
    clause's output on the example actually changed; the delta is signed by
    the clause polarity so the cached sum tracks positive-minus-negative.
    """
    n_banks = tally.votes.shape[0]
    polarity = clause.polarity
    positive = polarity > 0
    bank = clause.bank
    N = bank.n_states
    j = clause.index
    votes = tally.votes[bank_index]
    prev_row = tally.prev_outputs[bank_index, j]
    labels = pool.labels_list
    s, budget, boost = params.s, params.budget, params.boost_true_positive
    inv_T2 = 1.0 / (2.0 * T)
    draws = getattr(params, "_uniform_source", None)
    if draws is None:
        draws = params._uniform_source = _UniformSource(params.rng)
    narrow = pool.literal_rows is not None
    if narrow:
        row_list = bank.states[j].tolist()
        lit_rows = pool.literal_rows
        n_literals = len(row_list)
    else:
        row = bank.states[j]
        lits, nlits = pool.literals_bool, pool.literals_nbool
    for i in example_indices:
        label = labels[i]
        if n_banks == 1:
            y = label
        elif label == bank_index:
            y = 1
        else:
            # Mirror the sequential rule: a non-target bank sees the example
            # as a negative with probability 1/(q-1).
            if draws.one() >= 1.0 / (n_banks - 1):
                continue
            y = 0
        v = votes[i]
        vc = -T if v < -T else (T if v > T else v)
        e = (T - vc) if y == 1 else (T + vc)
        if draws.one() < e * inv_T2:
            type_i = (y == 1) == positive
            if narrow:
                u = draws.take(n_literals) if type_i else None
                o = _visit_py(
                    row_list, lit_rows[i], u, type_i, s, budget, boost, N
                )
            else:
                lit, nlit = lits[i], nlits[i]
                if type_i:
                    _type_i_row(row, lit, nlit, s, budget, boost, draws, N)
                else:
                    _type_ii_row(row, lit, nlit, N)
                inc = row > N
                o = 1 if inc.any() and not (nlit & inc).any() else 0
            prev = int(prev_row[i])
            if o != prev:
                tally.fetch_add(bank_index, i, polarity * (o - prev))
                prev_row[i] = o
    if narrow:
        bank.states[j] = row_list
    # Cached include bitmap and size are restored once per batch; inside the
    # batch only the raw states are authoritative.
    _refresh_row(bank, j)


def train_parallel(model, train_dataset, cfg, test_dataset=None):
    """Decentralized training: workers own disjoint clause subsets.

    The tally is refreshed once up front; from then on clauses act on
    whatever (possibly stale) sums they observe.  Run-to-run results may
    differ for workers > 1; with one worker the per-clause streams make the
    outcome reproducible.
    """
    pool = ExamplePool.from_dataset(train_dataset)
    if len(pool) == 0:
        raise ValueError("cannot train on an empty dataset")
    tally = VotingTally(len(model.banks), model.n_clauses, len(pool))
    refresh_tally(pool, model, tally)

    assignments = [
        (b, j) for b in range(len(model.banks)) for j in range(model.n_clauses)
    ]
    clause_params = {
        (b, j): FeedbackParams(
            s=model.s,
            budget=model.budget,
            boost_true_positive=model.boost_true_positive,
            rng=np.random.default_rng([cfg.seed, b, j]),
        )
        for (b, j) in assignments
    }
    partitions = [
        [(int(b), int(j)) for b, j in part]
        for part in np.array_split(assignments, cfg.workers)
    ]
    n = len(pool)

    def run_worker(worker_id, owned):
        offset = (worker_id * n) // cfg.workers
        for _ in range(cfg.epochs):
            for start in range(0, n, cfg.b_batch):
                stop = min(start + cfg.b_batch, n)
                indices = [(offset + t) % n for t in range(start, stop)]
                for b, j in owned:
                    update_clause_decentralized(
                        model.banks[b].clause(j),
                        b,
                        pool,
                        tally,
                        indices,
                        model.T,
                        clause_params[(b, j)],
                    )

    t0 = time.perf_counter()
    threads = [
        threading.Thread(target=run_worker, args=(w, part), daemon=True)
        for w, part in enumerate(partitions)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    elapsed_ms = (time.perf_counter() - t0) * 1000.0
    logger.info("decentralized training finished in %.1f ms", elapsed_ms)

    records = _epoch_metrics(model, cfg.epochs, elapsed_ms, train_dataset, test_dataset)
    return records, tally, pool


def format_metrics(records, with_elapsed=True):
    """Line-delimited metrics records with a stable field order."""
    fields = METRICS_FIELDS if with_elapsed else METRICS_FIELDS[:-1]
    lines = [",".join(fields)]
    lines.extend(r.line(with_elapsed) for r in records)
    return "\n".join(lines) + "\n"
