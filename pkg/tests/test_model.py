import math

import pytest
import torch
from torch.func import functional_call

from conftest import tiny_model
from depsem.deptree import Sentence
from depsem.errors import ConfigError, DataError, InputError
from depsem.model import (EOS, ModelConfig, Vocab, build_model, clone_model, greedy_decode, load_checkpoint,
                          make_batch, model_from_state, model_state, parameter_checksum, predict_batch,
                          save_checkpoint)
from depsem.tensor import grad_check

S1 = Sentence(["a", "b", "c"], [1, 1, 1], ["(", "and", "x", "y", ")"])
S2 = Sentence(["d", "e"], [0, 0], ["(", "x", ")"])


class HeadSpy:
    """Duck-typed sentence that records any read of ``heads``."""

    def __init__(self, sentence):
        self.tokens = sentence.tokens
        self.target = sentence.target
        self._heads = sentence.heads
        self.reads = 0

    @property
    def heads(self):
        self.reads += 1
        return self._heads


class SawrSpy(list):
    touched = False

    def __getitem__(self, i):
        SawrSpy.touched = True
        return super().__getitem__(i)

    def __len__(self):
        SawrSpy.touched = True
        return super().__len__()


def test_vocab_round_trip_and_unknowns():
    v = Vocab.build([["b", "a"], ["a"]])
    assert v.itos[:4] == ["<pad>", "<unk>", "<s>", "</s>"]
    assert v.tokens() == ["a", "b"]
    assert v.decode(v.encode(["a", "b"])) == ["a", "b"]
    assert v.encode(["zzz"], allow_unknown=True) == [1]


def test_config_validation():
    with pytest.raises(ConfigError) as err:
        ModelConfig(src_vocab_size=10, tgt_vocab_size=10, d_model=513, n_heads=8).validate()
    assert err.value.field == "d_model"
    with pytest.raises(ConfigError):
        ModelConfig(src_vocab_size=10, tgt_vocab_size=10, sawrs=True, sawr_dim=0).validate()
    with pytest.raises(ConfigError):
        ModelConfig(src_vocab_size=10, tgt_vocab_size=10, pascal=True, pascal_layers=(5,)).validate()


def test_same_config_and_seed_give_identical_parameters():
    assert parameter_checksum(tiny_model(ca=True)) == parameter_checksum(tiny_model(ca=True))
    assert parameter_checksum(tiny_model()) != parameter_checksum(tiny_model(seed=1))


def test_baseline_never_reads_trees_or_sawrs():
    model = tiny_model()
    spies = [HeadSpy(S1), HeadSpy(S2)]
    SawrSpy.touched = False
    batch = make_batch(model, spies, SawrSpy([torch.zeros(3, 4), torch.zeros(2, 4)]), with_targets=True)
    model.loss_batch(batch)
    assert all(s.reads == 0 for s in spies)
    assert not SawrSpy.touched

    pascal = tiny_model(pascal=True)
    make_batch(pascal, spies)
    assert all(s.reads > 0 for s in spies)


def test_baseline_output_ignores_supplied_trees_and_sawrs():
    model = tiny_model()
    model.eval()
    batch = make_batch(model, [S1, S2])
    plain = model.encode_batch(batch.src_ids, batch.key_mask)
    dist = torch.rand(2, 3, 3, dtype=torch.float64)
    sawr = torch.rand(2, 3, 4, dtype=torch.float64)
    assert torch.equal(plain, model.encode_batch(batch.src_ids, batch.key_mask, dist, sawr))


def test_encoder_output_shape():
    model = tiny_model(pascal=True, ca=True)
    for n in (1, 5, 64):
        s = Sentence(["a"] * n, [0] * n)
        batch = make_batch(model, [s])
        assert model.encode_batch(batch.src_ids, batch.key_mask, batch.dist).shape == (1, n, 8)
    batch = make_batch(model, [Sentence(["a"] * 65, [0] * 65)])
    with pytest.raises(InputError):
        model.encode_batch(batch.src_ids, batch.key_mask, batch.dist)


def test_pascal_root_choice_changes_first_layer_weights():
    model = tiny_model(pascal=True)
    model.eval()

    def first_layer(heads):
        batch = make_batch(model, [Sentence(["a", "a", "a"], heads)])
        record = []
        model.encode_batch(batch.src_ids, batch.key_mask, batch.dist, record=record)
        return record[0]["weights"]

    assert not torch.allclose(first_layer([0, 0, 0]), first_layer([1, 1, 1]))


def test_parameter_accounting():
    base = tiny_model().num_parameters()
    assert tiny_model(pascal=True).num_parameters() == base
    assert tiny_model(ca=True).num_parameters() > base
    assert tiny_model(sawrs=True).num_parameters() > base


def test_uniform_logits_give_log_vocab_loss():
    model = tiny_model()
    with torch.no_grad():
        model.out.weight.zero_()
        model.out.bias.zero_()
    loss = model.loss_batch(make_batch(model, [S1, S2], with_targets=True))
    assert abs(loss.item() - math.log(len(model.tgt_vocab))) < 1e-6


def test_decoder_is_causal():
    model = tiny_model()
    model.eval()
    batch = make_batch(model, [S1])
    memory = model.encode_batch(batch.src_ids, batch.key_mask)
    a = torch.tensor([[2, 5, 6, 7, 8]])
    b = a.clone()
    b[0, 3:] = torch.tensor([4, 4])
    la = model.decode_batch(memory, batch.key_mask, a)
    lb = model.decode_batch(memory, batch.key_mask, b)
    assert torch.equal(la[:, :3], lb[:, :3])
    assert not torch.equal(la[:, 3:], lb[:, 3:])


def test_incremental_decoding_matches_full_pass():
    model = tiny_model(ca=True)
    model.eval()
    batch = make_batch(model, [S1, S2])
    memory = model.encode_batch(batch.src_ids, batch.key_mask)
    ids = torch.tensor([[2, 5, 6, 7], [2, 8, 0, 0]])
    full = model.decode_batch(memory, batch.key_mask, ids)
    cache = model.new_cache(2)
    for t in range(ids.shape[1]):
        step = model.decode_step(memory, batch.key_mask, ids[:, t], cache)
        assert torch.allclose(step[0], full[0, t], atol=1e-12)


def overfit(model, sentence, steps=50):
    opt = torch.optim.Adam(model.parameters(), lr=1e-2)
    batch = make_batch(model, [sentence], with_targets=True)
    losses = []
    for _ in range(steps):
        loss = model.loss_batch(batch)
        opt.zero_grad()
        loss.backward()
        opt.step()
        losses.append(loss.item())
    return losses


def test_overfit_single_pair_then_decode_it():
    model = tiny_model(pascal=True, ca=True)
    losses = overfit(model, S1)
    assert losses[-1] < losses[0] * 0.1
    (pred,) = predict_batch(model, [S1])
    assert pred.tokens == list(S1.target)
    assert predict_batch(model, [S1])[0].output_tokens == pred.output_tokens


def test_greedy_output_never_exceeds_max_len():
    model = tiny_model(max_len=6)
    with torch.no_grad():
        model.out.bias[EOS] = -1e9
    ids, _ = greedy_decode(model, make_batch(model, [S1, S2]))
    assert all(len(seq) <= 6 for seq in ids)


class _Loss(torch.nn.Module):
    def __init__(self, model):
        super().__init__()
        self.model = model

    def forward(self, batch):
        return self.model.loss_batch(batch)


def test_loss_gradient_matches_finite_differences():
    model = tiny_model(pascal=True, ca=True)
    wrapper = _Loss(model)
    batch = make_batch(model, [S1, S2], with_targets=True)
    params = {k: v.detach() for k, v in wrapper.named_parameters()}
    for name in ("model.encoder.0.attn.wq.weight", "model.encoder.1.links.key.weight",
                 "model.decoder.0.cross_attn.wv.weight", "model.out.bias", "model.src_embed.weight"):
        def f(w, name=name):
            return functional_call(wrapper, {**params, name: w}, (batch,))

        # some link gradients are ~1e-8, where eps=1e-6 is dominated by rounding
        report = grad_check(f, params[name], eps=1e-4, op_name=name)
        assert report.max_rel_error < 1e-3, str(report)


def test_checkpoint_round_trip(tmp_path):
    model = tiny_model(pascal=True, ca=True)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path, epoch=3)
    loaded = load_checkpoint(path)
    assert parameter_checksum(loaded) == parameter_checksum(model)
    assert loaded.config == model.config
    assert predict_batch(loaded, [S1])[0].output_tokens == predict_batch(model, [S1])[0].output_tokens
    assert parameter_checksum(clone_model(model)) == parameter_checksum(model)


def test_corrupt_checkpoints_are_data_errors(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(DataError):
        load_checkpoint(bad)
    state = model_state(tiny_model())
    state["parameters"]["out.bias"] = torch.zeros(99)
    with pytest.raises(DataError):
        model_from_state(state)
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "missing.ckpt")


def test_build_model_fills_vocab_sizes():
    src = Vocab.build([["a"]])
    tgt = Vocab.build([["b", "c"]])
    model = build_model(ModelConfig(d_model=8, n_heads=2, d_ff=8), 0, src, tgt)
    assert model.config.src_vocab_size == 5 and model.config.tgt_vocab_size == 6
