"""Stochastic feedback rules for clause automata.

Type I feedback makes clauses mimic frequent patterns.  Its strong columns
(reward Include / penalize Exclude on satisfied literals with probability
(s-1)/s, reward Exclude on unsatisfied literals with probability 1/s) are
reachable only while the clause both outputs 1 and has at most `budget`
included literals.  Once either condition fails, every automaton draws from
the weak columns instead, which reward Exclude and penalize Include with
probability 1/s each: an oversized clause immediately starts expelling
literals, so clauses exceed the budget only transiently.

Type II feedback is deterministic and never budget-gated: when the clause
outputs 1, every excluded literal whose value is 0 is penalized toward
inclusion, injecting discriminating literals.

Both rules snapshot clause output and size once, before any automaton moves,
so all literals of one call see a consistent clause evaluation.  Randomness
comes only from the caller-supplied generator, one uniform draw per automaton
per call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class FeedbackParams:
    """Knobs for Type I feedback plus the random stream that drives it."""

    s: float
    budget: int
    boost_true_positive: bool = False
    rng: np.random.Generator = None

    def __post_init__(self):
        if self.s <= 1.0:
            raise ValueError("specificity s must be > 1")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.rng is None:
            self.rng = np.random.default_rng()


def update_probability(v, y_target, T):
    """Clause-update probability e/(2T) from the clipped vote sum.

    e = T - v for a positive target and T + v for a negative one, after
    clipping v to [-T, T]; the result hits 0 exactly when the tally already
    meets the target, so fully recognized examples stop reinforcing clauses.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    vc = max(-T, min(T, int(v)))
    e = (T - vc) if y_target == 1 else (T + vc)
    return e / (2.0 * T)


def _type_i_rows(states, literals, s, budget, boost_true_positive, rng, n_states):
    """Vectorized Type I feedback applied to each state row in place.

    states: (k, 2o) int16 block, one row per clause receiving feedback.
    literals: (2o,) 0/1 values of the sample's literals.

    On a state axis where up means include, every table cell moves its
    automaton toward the satisfied literals when the gate is open (reward
    for includes, penalty for excludes, each at its own probability) and
    downward otherwise (the weak columns reward excludes and penalize
    includes at 1/s alike), so the update reduces to a signed step.
    """
    N = n_states
    inc = states > N
    lit = np.asarray(literals).astype(bool)
    L = lit[None, :]
    unsat = ~L & inc
    out = ~unsat.any(axis=1)
    gate = out & (inc.sum(axis=1) <= budget)

    u = rng.random(states.shape)
    p_weak = 1.0 / s
    p_strong = (s - 1.0) / s
    p_memorize = 1.0 if boost_true_positive else p_strong

    if __debug__:
        # Include with literal 0 cannot co-occur with clause output 1.
        assert not (gate[:, None] & unsat).any()

    g = gate[:, None]
    up = g & L & (u < np.where(inc, p_memorize, p_strong))
    down_open = g & ~L & ~inc & (u < p_weak)
    down_weak = ~g & (u < p_weak)
    states += up.astype(np.int16)
    states -= (down_open | down_weak).astype(np.int16)
    np.clip(states, 1, 2 * N, out=states)


def _type_ii_rows(states, literals, n_states):
    """Vectorized Type II feedback applied to each state row in place."""
    inc = states > n_states
    lit = np.asarray(literals).astype(bool)
    out = (lit[None, :] | ~inc).all(axis=1)
    mask = out[:, None] & ~lit[None, :] & ~inc
    # Penalty on an Exclude automaton moves it toward Include; the result
    # stays <= N+1, so no clamping is needed.
    states += mask.astype(np.int16)


def _refresh_row(bank, j):
    inc = bank.states[j] > bank.n_states
    bank._include_f32[j] = inc
    bank.sizes[j] = inc.sum()
    return inc


def _type_i_row(row, lit, nlit, s, budget, boost_true_positive, rng, n_states):
    """Single-row Type I feedback, mutating `row` in place (hot path).

    lit/nlit are the sample's literal values and their negation, as bool
    arrays, so callers can precompute them once per sample.
    """
    N = n_states
    inc = row > N
    u = rng.random(row.shape[0])
    p_weak = 1.0 / s
    if not (nlit & inc).any() and inc.sum() <= budget:
        p_strong = (s - 1.0) / s
        p_memorize = 1.0 if boost_true_positive else p_strong
        up = lit & (u < np.where(inc, p_memorize, p_strong))
        down = nlit & ~inc & (u < p_weak)
        row += up.astype(np.int16)
        row -= down.astype(np.int16)
        np.clip(row, 1, 2 * N, out=row)
    else:
        row -= (u < p_weak).astype(np.int16)
        np.maximum(row, 1, out=row)


def _type_ii_row(row, lit, nlit, n_states):
    """Single-row Type II feedback, mutating `row` in place (hot path)."""
    inc = row > n_states
    if not (nlit & inc).any():
        row += (nlit & ~inc).astype(np.int16)


def _visit_py(row, lit, u, type_i, s, budget, boost_true_positive, n_states):
    """One feedback visit on a plain-list state row; returns the new output.

    Same arithmetic and same uniform-draw layout as the array kernels, but
    written as Python loops: for narrow literal vectors this avoids the
    per-op lock churn that array kernels suffer under many threads.  `row`
    is a list mutated in place; `u` is the per-literal uniforms for Type I
    (unused for Type II); returns the clause's new inference-mode output.
    """
    N = n_states
    size = 0
    out = 1
    for k, st in enumerate(row):
        if st > N:
            size += 1
            if not lit[k]:
                out = 0
    if type_i:
        p_weak = 1.0 / s
        if out and size <= budget:
            p_strong = (s - 1.0) / s
            p_mem = 1.0 if boost_true_positive else p_strong
            two_n = 2 * N
            for k, st in enumerate(row):
                if lit[k]:
                    if st > N:
                        if st < two_n and u[k] < p_mem:
                            row[k] = st + 1
                    elif u[k] < p_strong:
                        row[k] = st + 1
                elif st <= N and st > 1 and u[k] < p_weak:
                    row[k] = st - 1
        else:
            for k, st in enumerate(row):
                if st > 1 and u[k] < p_weak:
                    row[k] = st - 1
    elif out:
        for k, st in enumerate(row):
            if st <= N and not lit[k]:
                row[k] = st + 1
    new_out = 0
    for k, st in enumerate(row):
        if st > N:
            if not lit[k]:
                return 0
            new_out = 1
    return new_out


def type_i_feedback(clause, literals, params: FeedbackParams):
    """Apply one round of Type I feedback to a single clause."""
    bank = clause.bank
    lit = np.asarray(literals).astype(bool)
    _type_i_row(
        bank.states[clause.index],
        lit,
        ~lit,
        params.s,
        params.budget,
        params.boost_true_positive,
        params.rng,
        bank.n_states,
    )
    _refresh_row(bank, clause.index)


def type_ii_feedback(clause, literals):
    """Apply one round of Type II feedback to a single clause."""
    bank = clause.bank
    lit = np.asarray(literals).astype(bool)
    _type_ii_row(bank.states[clause.index], lit, ~lit, bank.n_states)
    _refresh_row(bank, clause.index)


def type_i_feedback_bank(bank, rows, literals, params: FeedbackParams):
    """Type I feedback for several clauses of a bank on the same sample."""
    if len(rows) == 0:
        return
    block = bank.states[rows]
    _type_i_rows(
        block,
        literals,
        params.s,
        params.budget,
        params.boost_true_positive,
        params.rng,
        bank.n_states,
    )
    bank.states[rows] = block
    bank.refresh_cache(rows)


def type_ii_feedback_bank(bank, rows, literals):
    """Type II feedback for several clauses of a bank on the same sample."""
    if len(rows) == 0:
        return
    block = bank.states[rows]
    _type_ii_rows(block, literals, bank.n_states)
    bank.states[rows] = block
    bank.refresh_cache(rows)
