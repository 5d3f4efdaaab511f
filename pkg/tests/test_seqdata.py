import numpy as np
import pytest

from clickmix.seqdata import (
    ClickSequence,
    DataFormatError,
    Dataset,
    SequenceFormat,
    collapse_dataset,
    collapse_repeats,
    dataset_stats,
    format_dataset,
    parse_dataset,
    parse_lines,
    summarize,
    write_dataset,
)

ONLY = SequenceFormat.SEQUENCES_ONLY
TIMED = SequenceFormat.WITH_TIMES


def test_parse_states_only():
    ds = parse_lines(["1,2,1,3"], ONLY)
    assert ds.sequences[0] == ClickSequence((1, 2, 1, 3))
    assert ds.sequences[0].times is None
    assert ds.num_states == 3


def test_parse_with_times():
    seq = parse_lines(["1,2,3;0.5,1.2,0.3"], TIMED).sequences[0]
    assert seq.states == (1, 2, 3)
    assert seq.times == (0.5, 1.2, 0.3)


def test_parse_length_mismatch_reports_line():
    with pytest.raises(DataFormatError) as err:
        parse_lines(["# header", "1,2;0.5"], TIMED)
    assert err.value.line == 2


@pytest.mark.parametrize(
    "line, fmt",
    [
        ("1,0,2", ONLY),
        ("1,x", ONLY),
        ("1,2;0.5,-1", TIMED),
        ("1,2;0.5,0", TIMED),
        ("1,2", TIMED),
        ("1,2|a", ONLY),
        (",", ONLY),
    ],
)
def test_parse_errors(line, fmt):
    with pytest.raises(DataFormatError):
        parse_lines([line], fmt)


def test_labels_and_comments():
    ds = parse_lines(["# c", "", "1,2|2", "2,1"], ONLY)
    assert ds.n_total == 2 and ds.n_labelled == 1 and ds.n_unlabelled == 1
    assert ds.sequences[0].label == 2
    with pytest.raises(DataFormatError):
        parse_lines(["1,2|2"], ONLY, labels=False)


def test_num_states_override():
    assert parse_lines(["1,2"], ONLY, num_states=17).num_states == 17
    with pytest.raises(DataFormatError):
        parse_lines(["1,5"], ONLY, num_states=3)


def test_label_range_check():
    ds = parse_lines(["1,2|3"], ONLY)
    ds.check_labels(3)
    with pytest.raises(DataFormatError):
        ds.check_labels(2)


def test_summarize_counts():
    tc = summarize(ClickSequence((1, 2, 1, 1, 3)), 3)
    expected = np.zeros((3, 3), int)
    expected[0, 1] = expected[1, 0] = expected[0, 0] = expected[0, 2] = 1
    np.testing.assert_array_equal(tc.counts, expected)
    assert (tc.first_state, tc.last_state) == (0, 2)


def test_summarize_single_state():
    tc = summarize(ClickSequence((2,)), 3)
    assert tc.counts.sum() == 0
    assert tc.first_state == tc.last_state == 1


def test_summarize_times_by_state():
    tc = summarize(ClickSequence((1, 2, 1), (2.0, 3.0, 1.0)), 2)
    np.testing.assert_array_equal(tc.time_in_state, [3.0, 3.0])
    assert tc.counts[0, 1] == 1 and tc.counts[1, 0] == 1


def test_collapse_examples():
    out = collapse_repeats(ClickSequence((1, 1, 2), (1.0, 2.0, 0.5)))
    assert out.states == (1, 2) and out.times == (3.0, 0.5)
    assert collapse_repeats(ClickSequence((1, 2, 3))).states == (1, 2, 3)
    assert collapse_repeats(ClickSequence((2, 2, 2))).states == (2,)


def test_collapse_keeps_label():
    assert collapse_repeats(ClickSequence((1, 1), None, 2)).label == 2


def test_dataset_flags():
    ds = Dataset((ClickSequence((1, 1, 2)),), 2)
    assert ds.has_repeats and not ds.has_times
    assert not collapse_dataset(ds).has_repeats


def test_stats_stack():
    ds = parse_lines(["1,2,1|1", "2,1"], ONLY)
    st = dataset_stats(ds)
    assert st.n == 2 and st.num_states == 2
    np.testing.assert_array_equal(st.labels, [0, -1])
    np.testing.assert_array_equal(st.lengths, [3, 2])


def test_file_round_trip(tmp_path):
    text = "1,2,3;0.5,1.2,0.30000000000000004|2\n3,1;1e-05,7.25\n"
    src = tmp_path / "a.txt"
    src.write_text(text)
    ds = parse_dataset(src, TIMED)
    dst = tmp_path / "b.txt"
    write_dataset(ds, dst)
    assert dst.read_text() == text
    assert format_dataset(ds) == text


def test_invalid_sequence_construction():
    with pytest.raises(DataFormatError):
        ClickSequence(())
    with pytest.raises(DataFormatError):
        ClickSequence((1, 2), (1.0,))
    with pytest.raises(DataFormatError):
        ClickSequence((1,), None, 0)
