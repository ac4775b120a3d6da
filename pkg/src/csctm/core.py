"""Core domain types: literals, Tsetlin automata, clauses, clause banks, models.

A clause is a conjunction over a subset of the 2*o literals (the o input bits
plus their negations).  Membership of each literal is controlled by a
two-action automaton whose integer state lives in [1, 2N]: states <= N mean
Exclude, states > N mean Include.  Rewards push the state deeper into the
current action's half, penalties push it toward (and across) the boundary.

Empty clauses output 1 in training mode and 0 in inference mode: an
all-exclude clause must not vote at prediction time, but during training it
is treated as matching everything so that feedback can grow it.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

TRAINING = "training"
INFERENCE = "inference"

DEFAULT_N_STATES = 128

#: One booleanized example: `features` is a uint8 vector, `label` a class index.
BooleanSample = namedtuple("BooleanSample", ["features", "label"])


def literals_from_features(features):
    """Expand an o-bit feature vector into the 2o literal values.

    Literal k < o is feature bit k; literal k >= o is the negation of bit k-o.
    """
    f = np.asarray(features, dtype=np.uint8)
    return np.concatenate([f, 1 - f])


def literal_matrix(X):
    """Row-wise literal expansion of a (num_samples, o) feature matrix."""
    X = np.asarray(X, dtype=np.uint8)
    return np.hstack([X, 1 - X])


def literal_value(features, k):
    """Value of literal k for a single sample."""
    f = np.asarray(features)
    o = f.shape[-1]
    if not 0 <= k < 2 * o:
        raise IndexError(f"literal index {k} out of range for {o} features")
    return int(f[k]) if k < o else 1 - int(f[k - o])


def literal_name(k, n_features, feature_names=None):
    """Human-readable name of literal k (e.g. "x2" or "¬x2")."""
    base = (
        feature_names[k % n_features]
        if feature_names is not None
        else f"x{(k % n_features) + 1}"
    )
    return base if k < n_features else f"¬{base}"


INCLUDE = "include"
EXCLUDE = "exclude"


@dataclass(frozen=True)
class TAState:
    """Scalar Tsetlin automaton: state in [1, 2N], Include iff state > N."""

    state: int
    n_states: int = DEFAULT_N_STATES

    def __post_init__(self):
        if not 1 <= self.state <= 2 * self.n_states:
            raise ValueError(f"state {self.state} outside [1, {2 * self.n_states}]")

    @property
    def action(self):
        return INCLUDE if self.state > self.n_states else EXCLUDE


def ta_reward(t: TAState) -> TAState:
    """Deepen the current action: Exclude moves toward 1, Include toward 2N."""
    if t.state > t.n_states:
        return TAState(min(t.state + 1, 2 * t.n_states), t.n_states)
    return TAState(max(t.state - 1, 1), t.n_states)


def ta_penalty(t: TAState) -> TAState:
    """Move toward (and across) the action boundary."""
    if t.state > t.n_states:
        return TAState(t.state - 1, t.n_states)
    return TAState(t.state + 1, t.n_states)


class Clause:
    """View of one clause inside a ClauseBank (shares the bank's storage)."""

    __slots__ = ("bank", "index")

    def __init__(self, bank, index):
        self.bank = bank
        self.index = index

    @property
    def polarity(self):
        return int(self.bank.weights[self.index])

    @property
    def states(self):
        return self.bank.states[self.index]

    @property
    def size(self):
        return int(self.bank.sizes[self.index])

    def include_indices(self):
        return np.flatnonzero(self.bank.states[self.index] > self.bank.n_states)

    def output(self, literals, mode=INFERENCE):
        """Conjunction over included literals; empty-clause convention by mode."""
        lit = np.asarray(literals).astype(bool)
        inc = self.bank.states[self.index] > self.bank.n_states
        if not inc.any():
            return 1 if mode == TRAINING else 0
        return int(bool(lit[inc].all()))


class ClauseBank:
    """n clauses over 2o literals; first n/2 clauses vote +, the rest vote -.

    TA states are a (n, 2o) int16 array.  A float32 copy of the include
    bitmap and the per-clause include counts are cached so that clause
    evaluation reduces to a matrix product: a clause outputs 1 exactly when
    the number of its included literals that are satisfied equals its size.
    """

    def __init__(self, n_clauses, n_features, n_states=DEFAULT_N_STATES, init_depth=0):
        if n_clauses < 2 or n_clauses % 2 != 0:
            raise ValueError("clause count must be even and >= 2")
        if n_features < 1:
            raise ValueError("need at least one feature")
        if not 0 <= init_depth < n_states:
            raise ValueError("init_depth must be in [0, n_states)")
        self.n_clauses = n_clauses
        self.n_features = n_features
        self.n_states = n_states
        # All TAs start on the Exclude side, so clauses start empty.  At
        # init_depth 0 they sit at the boundary, where one penalty includes a
        # literal; positive depth makes early inclusion gradual.
        self.states = np.full(
            (n_clauses, 2 * n_features), n_states - init_depth, dtype=np.int16
        )
        half = n_clauses // 2
        self.weights = np.concatenate(
            [np.ones(half, dtype=np.int32), -np.ones(half, dtype=np.int32)]
        )
        self._include_f32 = np.zeros((n_clauses, 2 * n_features), dtype=np.float32)
        self.sizes = np.zeros(n_clauses, dtype=np.int64)

    @classmethod
    def from_include_lists(cls, n_features, positive, negative, n_states=DEFAULT_N_STATES):
        """Build a bank whose clauses include exactly the given literal indices."""
        if len(positive) != len(negative):
            raise ValueError("need equally many positive and negative clauses")
        bank = cls(2 * len(positive), n_features, n_states)
        for j, indices in enumerate(list(positive) + list(negative)):
            bank.states[j, list(indices)] = n_states + 1
        bank.refresh_cache()
        return bank

    def clause(self, j):
        return Clause(self, j)

    @property
    def include(self):
        return self.states > self.n_states

    def include_bitmaps(self):
        return (self.states > self.n_states).astype(np.uint8)

    def refresh_cache(self, rows=None):
        """Recompute cached include bitmap and sizes (for `rows` or all)."""
        if rows is None:
            inc = self.states > self.n_states
            self._include_f32 = inc.astype(np.float32)
            self.sizes = inc.sum(axis=1).astype(np.int64)
        else:
            inc = self.states[rows] > self.n_states
            self._include_f32[rows] = inc
            self.sizes[rows] = inc.sum(axis=1)

    def set_states(self, states):
        states = np.asarray(states, dtype=np.int16)
        if states.shape != self.states.shape:
            raise ValueError("state array shape mismatch")
        if states.min() < 1 or states.max() > 2 * self.n_states:
            raise ValueError("states outside [1, 2N]")
        self.states = states.copy()
        self.refresh_cache()

    def clause_outputs(self, literals, mode=INFERENCE):
        """Outputs of every clause on one sample's literal vector."""
        lit = np.asarray(literals, dtype=np.float32)
        counts = self._include_f32 @ lit
        out = counts == self.sizes
        if mode == INFERENCE:
            out &= self.sizes > 0
        return out

    def clause_outputs_batch(self, literals_f32, mode=INFERENCE):
        """Outputs of every clause on a (num_samples, 2o) literal matrix."""
        counts = np.asarray(literals_f32, dtype=np.float32) @ self._include_f32.T
        out = counts == self.sizes[None, :]
        if mode == INFERENCE:
            out &= self.sizes[None, :] > 0
        return out

    def vote_sum(self, literals, mode=INFERENCE):
        return int(self.clause_outputs(literals, mode) @ self.weights)

    def vote_sums_batch(self, literals_f32, mode=INFERENCE):
        return self.clause_outputs_batch(literals_f32, mode) @ self.weights


def evaluate_clause(clause, features, mode):
    return clause.output(literals_from_features(features), mode)


def clause_size(clause):
    return clause.size


def vote_sum(bank, features, mode=INFERENCE):
    """Positive-clause outputs minus negative-clause outputs on one sample."""
    return bank.vote_sum(literals_from_features(features), mode)


@dataclass
class TMModel:
    """Clause banks plus hyperparameters.

    The default layout is one bank of n clauses per class (argmax
    classification).  Two-class problems may instead use a single bank whose
    positive clauses vote for class 1 and whose vote sum is thresholded with
    the unit step (`single_bank=True`, see classify_binary).
    """

    banks: list
    n_features: int
    n_classes: int
    T: int
    s: float
    budget: int
    n_states: int = DEFAULT_N_STATES
    boost_true_positive: bool = False

    @classmethod
    def create(
        cls,
        n_features,
        n_classes,
        n_clauses,
        T,
        s,
        budget=None,
        n_states=DEFAULT_N_STATES,
        boost_true_positive=False,
        single_bank=False,
        init_depth=None,
    ):
        if n_classes < 2:
            raise ValueError("need at least two classes")
        if single_bank and n_classes != 2:
            raise ValueError("single-bank models are binary only")
        if T < 1:
            raise ValueError("voting margin T must be >= 1")
        if s <= 1.0:
            raise ValueError("specificity s must be > 1")
        if budget is None:
            budget = 2 * n_features
        if not 1 <= budget <= 2 * n_features:
            raise ValueError(f"budget must be in [1, {2 * n_features}]")
        # Vanilla automata start at the exclude boundary; constrained models
        # seed excludes deeper, otherwise a single sample can include a
        # literal pair in one step and lock in an oversized clause before the
        # budget's expulsion pressure ever acts (the "blocked system" case).
        if init_depth is None:
            init_depth = 0 if budget >= 2 * n_features else n_states // 8
        n_banks = 1 if single_bank else n_classes
        banks = [
            ClauseBank(n_clauses, n_features, n_states, init_depth)
            for _ in range(n_banks)
        ]
        return cls(
            banks=banks,
            n_features=n_features,
            n_classes=n_classes,
            T=int(T),
            s=float(s),
            budget=int(budget),
            n_states=n_states,
            boost_true_positive=boost_true_positive,
        )

    @property
    def n_clauses(self):
        return self.banks[0].n_clauses

    @property
    def is_vanilla(self):
        return self.budget >= 2 * self.n_features

    def clause_sizes(self):
        return np.concatenate([bank.sizes for bank in self.banks])

    def avg_literals(self):
        """l_ave: mean included-literal count over every clause in the model."""
        return float(self.clause_sizes().mean())

    def over_budget_fraction(self, budget=None):
        b = self.budget if budget is None else budget
        sizes = self.clause_sizes()
        return float((sizes > b).mean())

    def classify(self, features):
        lit = literals_from_features(features)
        if len(self.banks) == 1:
            return 1 if self.banks[0].vote_sum(lit) >= 0 else 0
        sums = np.array([bank.vote_sum(lit) for bank in self.banks])
        return int(np.argmax(sums))

    def classify_batch(self, literals_f32):
        """Predicted labels for a (num_samples, 2o) literal matrix."""
        if len(self.banks) == 1:
            return (self.banks[0].vote_sums_batch(literals_f32) >= 0).astype(np.int64)
        sums = np.stack(
            [bank.vote_sums_batch(literals_f32) for bank in self.banks], axis=1
        )
        return np.argmax(sums, axis=1)


def classify_binary(model, features):
    """Unit-step classification u(v) for a single-bank model; u(0) = 1."""
    if len(model.banks) != 1:
        raise ValueError("classify_binary requires a single-bank model")
    return model.classify(features)


def classify_multiclass(model, features):
    """Argmax of per-class vote sums; ties break toward the lowest class."""
    if len(model.banks) < 2:
        raise ValueError("classify_multiclass requires at least two banks")
    return model.classify(features)
