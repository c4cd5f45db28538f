import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from depsem.deptree import (Sentence, distance_matrix, gaussian_pdf, is_projective, padded_distance_batch,
                            parse_conll, read_conll, serialize_conll, symmetrize, validate_heads, write_conll)
from depsem.errors import FormatError

PDF0, PDF1, PDF2 = 0.398942, 0.241971, 0.053991


@st.composite
def head_lists(draw, max_size=12):
    n = draw(st.integers(1, max_size))
    order = draw(st.permutations(range(n)))
    heads = [0] * n
    heads[order[0]] = order[0]
    for k in range(1, n):
        heads[order[k]] = order[draw(st.integers(0, k - 1))]
    return heads


def conll_line(i, form, head):
    return f"{i}\t{form}\t_\t_\t_\t_\t{head}\t_\t_\t_"


def test_parse_two_token_sentence():
    text = "\n".join([conll_line(1, "flights", 0), conll_line(2, "daily", 1)]) + "\n"
    (s,) = parse_conll(text)
    assert s.tokens == ("flights", "daily")
    assert s.heads == (0, 0)
    assert s.root == 0


def test_parse_single_token():
    (s,) = parse_conll(conll_line(1, "hello", 0) + "\n")
    assert s.heads == (0,)


def test_head_out_of_range_is_a_format_error_with_line():
    text = "\n".join([conll_line(1, "a", 0), conll_line(2, "b", 1), conll_line(3, "c", 5)])
    with pytest.raises(FormatError) as err:
        parse_conll(text)
    assert err.value.line == 1


def test_skips_comments_ranges_and_empty_nodes():
    text = "\n".join([
        "# sent_id = 1",
        "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_",
        conll_line(1, "do", 0),
        conll_line(2, "n't", 1),
        "2.1\tx\t_\t_\t_\t_\t_\t_\t_\t_",
        "",
        conll_line(1, "yes", 0),
    ])
    a, b = parse_conll(text)
    assert a.tokens == ("do", "n't") and b.tokens == ("yes",)


def test_rejects_cycles_and_multiple_roots():
    with pytest.raises(FormatError):
        validate_heads([1, 0])
    with pytest.raises(FormatError):
        validate_heads([0, 1])
    with pytest.raises(FormatError):
        Sentence(["a", "b"], [0])


def test_short_rows_name_the_line():
    with pytest.raises(FormatError) as err:
        parse_conll(conll_line(1, "a", 0) + "\n1\tb\t_\n")
    assert err.value.line == 2


@given(st.lists(head_lists(), min_size=1, max_size=4))
def test_serialize_round_trip(trees):
    sentences = [Sentence([f"w{i}" for i in range(len(h))], h) for h in trees]
    assert parse_conll(serialize_conll(sentences)) == sentences


def test_file_round_trip(tmp_path):
    sentences = [Sentence(["list", "flights"], [0, 0]), Sentence(["x"], [0])]
    write_conll(tmp_path / "t.conll", sentences)
    assert read_conll(tmp_path / "t.conll") == sentences


def test_is_projective():
    assert is_projective([0, 0, 1])
    assert not is_projective([1, 1, 0, 1])


def test_pdf_spot_values():
    assert abs(gaussian_pdf(0.0) - PDF0) < 1e-6
    assert abs(gaussian_pdf(1.0) - PDF1) < 1e-6
    assert abs(gaussian_pdf(2.0) - PDF2) < 1e-6


def test_distance_matrix_examples():
    assert np.allclose(distance_matrix([0]), [[PDF0]], atol=1e-6)
    d = distance_matrix([1, 1, 1])
    assert abs(d[0][0] - PDF1) < 1e-6 and abs(d[0][1] - PDF0) < 1e-6
    assert abs(d[0][2] - PDF1) < 1e-6
    with pytest.raises(ValueError):
        distance_matrix([0], sigma=0)


@given(head_lists(), st.floats(0.3, 3.0))
def test_rows_peak_at_parent_and_depend_only_on_offset(heads, sigma):
    d = distance_matrix(heads, sigma)
    n = len(heads)
    assert list(d.argmax(axis=1)) == list(heads)
    for t in range(n):
        for s in range(n):
            assert d[t][s] == pytest.approx(gaussian_pdf(s - heads[t], sigma), rel=1e-12)


def test_symmetrize_examples():
    m = np.array([[1.0, 2.0], [4.0, 5.0]])
    assert np.array_equal(symmetrize(m), [[1.0, 3.0], [3.0, 5.0]])
    s = symmetrize(np.random.default_rng(0).random((4, 4)))
    assert np.array_equal(symmetrize(s), s)


def test_padded_batch_fills_with_ones():
    out = padded_distance_batch([[0], [1, 1]], 3)
    assert out.shape == (2, 3, 3)
    assert np.allclose(out[0, 0, 0], PDF0, atol=1e-6)
    assert np.all(out[0, 1:, :] == 1) and np.all(out[0, :, 1:] == 1)
    assert np.array_equal(out[1, :2, :2], distance_matrix([1, 1]))
