"""Monte-Carlo harness for feedback-table frequency checks (shared by tests)."""

import numpy as np

from csctm.core import ClauseBank, literals_from_features
from csctm.feedback import FeedbackParams, type_i_feedback


def measure_cell_frequencies(action, literal_on, gate_kind, s, budget, trials, seed):
    """Monte-Carlo one Type I table cell; returns (reward, inaction, penalty) rates.

    gate_kind: "open" (clause 1, within budget), "clause0", or "oversized"
    (clause 1, size over budget).  Hundreds of independent target TAs of the
    (action, literal-value) kind under test are packed into one clause per
    call, all starting from interior states so a single move is unambiguous:
    rewards deepen the current action, penalties move toward the boundary.
    """
    o = 500
    N = 128
    rng = np.random.default_rng(seed)
    counts = np.zeros(3, dtype=np.int64)  # reward, inaction, penalty
    x = np.zeros(o, dtype=np.uint8)
    x[: o // 2] = 1
    lits = literals_from_features(x)
    on_idx = np.flatnonzero(lits == 1)
    off_idx = np.flatnonzero(lits == 0)
    while counts.sum() < trials:
        states = np.full((2, 2 * o), N - 20, dtype=np.int16)
        if gate_kind == "open":
            anchor = on_idx[:1]
        elif gate_kind == "clause0":
            anchor = off_idx[:1]  # one unsatisfied include forces output 0
        else:  # oversized: output 1, includes exceed the budget
            anchor = on_idx[: budget + 1]
        states[0, anchor] = N + 20
        pool = on_idx if literal_on else off_idx
        targets = np.setdiff1d(pool, anchor)[:300]
        if action == "include":
            # Included value-0 targets force output 0, so that combination is
            # only constructible for the clause0 column (table: NA otherwise).
            states[0, targets] = N + 20
        bank = ClauseBank(2, o, N)
        bank.set_states(states)
        before = bank.states[0].copy()
        type_i_feedback(
            bank.clause(0), lits, FeedbackParams(s=s, budget=budget, rng=rng)
        )
        delta = bank.states[0].astype(int) - before.astype(int)
        inc = before > N
        d = delta[targets]
        inc_t = inc[targets]
        reward = ((d == 1) & inc_t) | ((d == -1) & ~inc_t)
        penalty = ((d == -1) & inc_t) | ((d == 1) & ~inc_t)
        counts[0] += int(reward.sum())
        counts[2] += int(penalty.sum())
        counts[1] += len(targets) - int(reward.sum()) - int(penalty.sum())
    return counts / counts.sum()


def check_cell(measured, expected, trials):
    """3-sigma binomial check per outcome; deterministic cells must be exact."""
    for got, want in zip(measured, expected):
        if want in (0.0, 1.0):
            if got != want:
                return False, f"deterministic cell: got {got}, want {want}"
        else:
            sigma = (want * (1 - want) / trials) ** 0.5
            if abs(got - want) > 3 * sigma:
                return False, f"got {got:.5f}, want {want:.5f} (3s={3*sigma:.5f})"
    return True, "ok"
