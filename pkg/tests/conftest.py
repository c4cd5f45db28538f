import time

import pytest
import torch
from hypothesis import HealthCheck, settings

from depsem.datagen import GrammarSpec, generate
from depsem.model import ModelConfig, Vocab, build_model
from depsem.training import TrainConfig, train

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")
torch.set_num_threads(1)

DESK = dict(d_model=64, n_heads=4, d_ff=256, n_enc_layers=2, n_dec_layers=3, dropout=0.1)

_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line, then assert on it."""

    def record(number: int, ok: bool, detail: str):
        _ACCEPTANCE.append((number, bool(ok), detail))
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}")


@pytest.fixture(scope="session")
def corpus():
    return generate(GrammarSpec(seed=0))


@pytest.fixture(scope="session")
def vocabs(corpus):
    train_set = corpus[0]
    return Vocab.build(s.tokens for s in train_set), Vocab.build(s.target for s in train_set)


@pytest.fixture(scope="session")
def trained(corpus, vocabs):
    """``trained(variant)`` trains a desk-size model once per session and caches it.

    The baseline runs up to 30 epochs and stops 3 evaluations after its best
    dev score; the other variants run a fixed 8 epochs.
    """
    cache = {}
    plans = {"baseline": (30, 3), "pascal": (8, None), "ca": (8, None)}

    def get(variant):
        if variant not in cache:
            epochs, patience = plans[variant]
            cfg = ModelConfig(**DESK, pascal=variant == "pascal", ca=variant == "ca")
            model = build_model(cfg, 0, *vocabs)
            tcfg = TrainConfig(epochs=epochs, lr=1e-3, batch_size=16, seed=0, patience=patience)
            started = time.perf_counter()
            result = train(model, corpus[0], corpus[1], tcfg)
            result.seconds = time.perf_counter() - started
            cache[variant] = result
        return cache[variant]

    return get


def tiny_model(pascal=False, sawrs=False, ca=False, precision="float64", seed=0, **kw):
    src = Vocab.build([["a", "b", "c", "d", "e"]])
    tgt = Vocab.build([["(", ")", "and", "x", "y"]])
    cfg = ModelConfig(d_model=kw.pop("d_model", 8), n_heads=kw.pop("n_heads", 2), d_ff=kw.pop("d_ff", 16),
                      n_enc_layers=kw.pop("n_enc_layers", 2), n_dec_layers=kw.pop("n_dec_layers", 2),
                      dropout=kw.pop("dropout", 0.0), pascal=pascal, sawrs=sawrs, ca=ca,
                      sawr_dim=4 if sawrs else 0, precision=precision, **kw)
    return build_model(cfg, seed, src, tgt)
