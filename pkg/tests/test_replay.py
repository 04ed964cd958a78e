import numpy as np
import pytest
from scipy import stats

from qosalloc.replay import PrioritizedReplay, Transition


def make_transition(tag):
    return Transition(
        state=np.array([float(tag)]),
        action=np.array([0]),
        reward=0.0,
        next_state=np.array([float(tag)]),
        done=False,
    )


def fill(buffer, priorities):
    for i, p in enumerate(priorities):
        buffer.push(make_transition(i))
    buffer.update(range(len(priorities)), np.asarray(priorities) - buffer.eps)


def test_equal_priorities_uniform_probabilities():
    buf = PrioritizedReplay(capacity=8, alpha=0.6)
    fill(buf, [2.0, 2.0])
    assert buf.probabilities() == pytest.approx([0.5, 0.5])


def test_alpha_one_proportional_probabilities_chi_square():
    buf = PrioritizedReplay(capacity=8, alpha=1.0)
    fill(buf, [1.0, 3.0])
    assert buf.probabilities() == pytest.approx([0.25, 0.75])
    rng = np.random.default_rng(0)
    _, _, idx = buf.sample(100000, rng)
    counts = np.bincount(idx, minlength=2)
    chi2 = ((counts - 100000 * buf.probabilities()) ** 2 / (100000 * buf.probabilities())).sum()
    assert chi2 < stats.chi2.ppf(0.99, df=1)


def test_power_law_sampling_chi_square():
    buf = PrioritizedReplay(capacity=8, alpha=0.6)
    fill(buf, [1.0, 2.0, 4.0, 8.0])
    expected = np.array([1.0, 2.0, 4.0, 8.0]) ** 0.6
    expected = expected / expected.sum()
    assert buf.probabilities() == pytest.approx(expected)
    rng = np.random.default_rng(1)
    _, _, idx = buf.sample(100000, rng)
    counts = np.bincount(idx, minlength=4)
    chi2 = ((counts - 100000 * expected) ** 2 / (100000 * expected)).sum()
    assert chi2 < stats.chi2.ppf(0.99, df=3)


def test_equal_priorities_unit_weights():
    buf = PrioritizedReplay(capacity=8, alpha=0.6, beta=0.4)
    fill(buf, [5.0, 5.0, 5.0])
    _, weights, _ = buf.sample(64, np.random.default_rng(2))
    assert weights == pytest.approx(np.ones(64))


def test_importance_weight_formula():
    buf = PrioritizedReplay(capacity=8, alpha=0.6, beta=0.4)
    priorities = np.array([1.0, 2.0, 4.0, 8.0])
    fill(buf, priorities)
    probs = priorities**0.6 / np.sum(priorities**0.6)
    w_all = (4 * probs) ** (-0.4)
    expected = w_all / w_all.max()
    _, weights, idx = buf.sample(1000, np.random.default_rng(3))
    assert weights == pytest.approx(expected[idx], abs=1e-12)


def test_new_transitions_enter_at_max_priority():
    buf = PrioritizedReplay(capacity=8)
    buf.push(make_transition(0))
    buf.update([0], [9.0])
    buf.push(make_transition(1))
    assert buf._priorities[1] == pytest.approx(buf._priorities[0])


def test_ring_overwrite():
    buf = PrioritizedReplay(capacity=3)
    for i in range(5):
        buf.push(make_transition(i))
    assert len(buf) == 3
    tags = sorted(t.state[0] for t in buf._items)
    assert tags == [2.0, 3.0, 4.0]


def test_empty_sample_rejected():
    buf = PrioritizedReplay(capacity=4)
    with pytest.raises(ValueError):
        buf.sample(1, np.random.default_rng(0))
