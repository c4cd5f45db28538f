import numpy as np
import pytest
from sklearn.base import clone

from depsem.errors import DataError, InputError
from depsem.sawr import (FileSawrProvider, SyntaxAwareEncoder, load_sawr_file, save_sawr_file,
                         train_sawr_provider)


@pytest.fixture(scope="module")
def provider(corpus):
    return SyntaxAwareEncoder(dim=16, emb_dim=16, arc_dim=16, epochs=15, lr=5e-3, seed=0).fit(corpus[0])


def test_heldout_attachment_accuracy(provider, corpus):
    assert provider.heldout_uas_ >= 0.95
    assert provider.attachment_score(corpus[1]) >= 0.95


def test_output_shapes(provider, corpus):
    mats = provider.transform(corpus[2][:5])
    assert [m.shape for m in mats] == [(len(s), 16) for s in corpus[2][:5]]


def test_same_seed_same_outputs(provider, corpus):
    again = clone(provider).fit(corpus[0])
    for a, b in zip(provider.transform(corpus[1][:10]), again.transform(corpus[1][:10])):
        assert np.array_equal(a, b)


def test_state_round_trip(provider, corpus):
    restored = SyntaxAwareEncoder.from_state(provider.to_state())
    assert restored.get_params() == provider.get_params()
    for a, b in zip(provider.transform(corpus[1][:5]), restored.transform(corpus[1][:5])):
        assert np.array_equal(a, b)


def test_file_round_trip(provider, corpus, tmp_path):
    sentences = corpus[1][:4]
    mats = provider.transform(sentences)
    save_sawr_file(tmp_path / "s.json", mats)
    loaded = load_sawr_file(tmp_path / "s.json")
    assert loaded.dim == 16
    for a, b in zip(mats, loaded.transform(sentences)):
        assert np.array_equal(a, b)


def test_file_row_mismatch_and_missing(corpus, tmp_path):
    sentences = corpus[1][:2]
    bad = FileSawrProvider(3, [np.zeros((len(sentences[0]) + 1, 3)), np.zeros((len(sentences[1]), 3))])
    with pytest.raises(DataError):
        bad.transform(sentences)
    with pytest.raises(DataError):
        FileSawrProvider(3, [np.zeros((2, 3))]).vectors(5)
    with pytest.raises(FileNotFoundError):
        load_sawr_file(tmp_path / "absent.json")
    (tmp_path / "w.json").write_text('{"dim": 3, "sentences": [[[1, 2]]]}')
    with pytest.raises(DataError):
        load_sawr_file(tmp_path / "w.json")


def test_fit_validation(corpus):
    with pytest.raises(InputError):
        SyntaxAwareEncoder(dim=7).fit(corpus[0][:5])
    with pytest.raises(InputError):
        SyntaxAwareEncoder().fit([s.tokens for s in corpus[0][:5]])
    with pytest.raises(InputError):
        train_sawr_provider([])
