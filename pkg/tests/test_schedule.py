import pytest
from hypothesis import given, strategies as st

from monoses_kit.schedule import ScheduleMix, assemble_iteration_corpus, backtranslation_mix

N = 1_000_000


@pytest.mark.parametrize("t,expected", [
    (0, (N, 0, 0)),
    (15, (500_000, 250_000, 250_000)),
    (30, (0, 500_000, 500_000)),
    (45, (0, 500_000, 500_000)),
    (60, (0, 500_000, 500_000)),
])
def test_schedule_table(t, expected):
    mix = backtranslation_mix(t, N, 30)
    assert (mix.n_smt, mix.n_nmt_greedy, mix.n_nmt_sampled) == expected


def test_rounding_and_odd_split():
    # 7 * (1 - 1/2) = 3.5 rounds up to 4; remainder 3 gives greedy the extra pair
    assert backtranslation_mix(1, 7, 2) == ScheduleMix(4, 2, 1)
    assert backtranslation_mix(1, 5, 3) == ScheduleMix(3, 1, 1)
    with pytest.raises(ValueError):
        backtranslation_mix(0, 10, 0)


@given(st.integers(0, 200), st.integers(0, 10 ** 7), st.integers(1, 100))
def test_sum_and_balance(t, n, a):
    mix = backtranslation_mix(t, n, a)
    assert mix.total == n
    assert 0 <= mix.n_nmt_greedy - mix.n_nmt_sampled <= 1
    assert min(mix.n_smt, mix.n_nmt_greedy, mix.n_nmt_sampled) >= 0


@given(st.integers(0, 100), st.integers(0, 10 ** 6), st.integers(1, 50))
def test_smt_share_non_increasing(t, n, a):
    assert backtranslation_mix(t + 1, n, a).n_smt <= backtranslation_mix(t, n, a).n_smt


def _stream(tag):
    return [((f"{tag}{i}",), (f"o{i}",)) for i in range(4)]


def test_assemble_order_and_errors():
    corpus = assemble_iteration_corpus(ScheduleMix(2, 1, 1), _stream("s"), _stream("g"), _stream("m"))
    assert [p[0][0] for p in corpus.pairs] == ["s0", "s1", "g0", "m0"]
    assert len(assemble_iteration_corpus(ScheduleMix(0, 0, 0), [], [], [])) == 0
    with pytest.raises(ValueError, match="greedy"):
        assemble_iteration_corpus(ScheduleMix(1, 3, 0), _stream("s"), _stream("g")[:2], [])
    gen = assemble_iteration_corpus(ScheduleMix(1, 1, 1), iter(_stream("s")), iter(_stream("g")), iter(_stream("m")))
    assert len(gen) == 3
