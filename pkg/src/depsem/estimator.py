"""scikit-learn style front end for the tree-aware semantic parser."""

from typing import List

from sklearn.base import BaseEstimator, clone
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from .metrics import corpus_exact, corpus_tree
from .model import ModelConfig, Vocab, build_model, predict_batch
from .sawr import SyntaxAwareEncoder
from .training import TrainConfig, tel, train
from .validation import attach_targets, check_aligned, check_sentences


def _is_fitted(estimator) -> bool:
    try:
        check_is_fitted(estimator)
    except NotFittedError:
        return False
    return True


class DependencyAwareParser(BaseEstimator):
    """Sequence-to-sequence Transformer parser mapping utterances to logic forms.

    ``X`` is a sequence of :class:`~depsem.deptree.Sentence`; ``y`` holds
    target token lists and may be omitted when the sentences carry targets.
    ``pascal``, ``sawrs`` and ``ca`` switch the encoder variants. When
    ``sawrs`` is on and no ``sawr_provider`` is given, a
    :class:`~depsem.sawr.SyntaxAwareEncoder` is fitted on the training trees
    and kept frozen; an unfitted provider is cloned and fitted the same way.

    Fitted attributes: ``model_``, ``history_``, ``best_epoch_``,
    ``sawr_provider_``.
    """

    def __init__(
        self,
        pascal=False,
        sawrs=False,
        ca=False,
        d_model=512,
        n_heads=8,
        d_ff=2048,
        n_enc_layers=2,
        n_dec_layers=3,
        dropout=0.1,
        pascal_layers=(0,),
        pascal_heads=None,
        sigma=1.0,
        sawr_dim=64,
        link_dim=None,
        max_len=64,
        epochs=45,
        batch_size=16,
        lr=1e-4,
        weight_decay=0.01,
        eval_every=1,
        patience=None,
        holdout_fraction=0.0,
        precision="float32",
        seed=0,
        sawr_provider=None,
        run_dir=None,
    ):
        self.pascal = pascal
        self.sawrs = sawrs
        self.ca = ca
        self.d_model = d_model
        self.n_heads = n_heads
        self.d_ff = d_ff
        self.n_enc_layers = n_enc_layers
        self.n_dec_layers = n_dec_layers
        self.dropout = dropout
        self.pascal_layers = pascal_layers
        self.pascal_heads = pascal_heads
        self.sigma = sigma
        self.sawr_dim = sawr_dim
        self.link_dim = link_dim
        self.max_len = max_len
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.eval_every = eval_every
        self.patience = patience
        self.holdout_fraction = holdout_fraction
        self.precision = precision
        self.seed = seed
        self.sawr_provider = sawr_provider
        self.run_dir = run_dir

    def model_config(self, src_vocab_size=0, tgt_vocab_size=0) -> ModelConfig:
        return ModelConfig(
            src_vocab_size=src_vocab_size, tgt_vocab_size=tgt_vocab_size,
            d_model=self.d_model, n_heads=self.n_heads, d_ff=self.d_ff,
            n_enc_layers=self.n_enc_layers, n_dec_layers=self.n_dec_layers, dropout=self.dropout,
            pascal=self.pascal, sawrs=self.sawrs, ca=self.ca,
            pascal_layers=tuple(self.pascal_layers), pascal_heads=self.pascal_heads,
            sigma=self.sigma, sawr_dim=self.sawr_dim if self.sawrs else 0, link_dim=self.link_dim,
            max_len=self.max_len, precision=self.precision,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, lr=self.lr, weight_decay=self.weight_decay,
            seed=self.seed, eval_every=self.eval_every, precision=self.precision, patience=self.patience,
            holdout_fraction=self.holdout_fraction, checkpoint_dir=self.run_dir,
        )

    def _sawr_for(self, sentences, sawr=None):
        if not self.sawrs:
            return None
        if sawr is not None:
            check_aligned("sawr", sawr, sentences)
            return list(sawr)
        return self.sawr_provider_.transform(sentences)

    def fit(self, X, y=None, eval_set=None, sawr=None, eval_sawr=None):
        """Fit on ``(X, y)``; ``eval_set=(X_dev, y_dev)`` drives checkpoint selection.

        ``sawr`` / ``eval_sawr`` optionally supply precomputed per-sentence
        SAWR matrices instead of the provider.
        """
        train_set = attach_targets(X, y)
        dev_set = []
        if eval_set is not None:
            X_dev, y_dev = eval_set
            dev_set = attach_targets(X_dev, y_dev)

        self.sawr_provider_ = None
        if self.sawrs:
            provider = self.sawr_provider
            if provider is None and sawr is None:
                provider = SyntaxAwareEncoder(dim=self.sawr_dim, seed=self.seed)
            if isinstance(provider, BaseEstimator) and not _is_fitted(provider):
                provider = clone(provider).fit(train_set)
            self.sawr_provider_ = provider

        src_vocab = Vocab.build(s.tokens for s in train_set)
        tgt_vocab = Vocab.build(s.target for s in train_set)
        cfg = self.model_config(len(src_vocab), len(tgt_vocab))
        model = build_model(cfg, self.seed, src_vocab, tgt_vocab)
        model.sawr_provider = self.sawr_provider_
        result = train(model, train_set, dev_set, self.train_config(),
                       self._sawr_for(train_set, sawr),
                       self._sawr_for(dev_set, eval_sawr) if dev_set else None,
                       run_dir=self.run_dir)
        self.model_ = result.model
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.n_steps_ = result.steps
        return self

    def predict(self, X, sawr=None) -> List[List[str]]:
        check_is_fitted(self, "model_")
        sentences = check_sentences(X, require_heads=self.pascal)
        preds = predict_batch(self.model_, sentences, self._sawr_for(sentences, sawr))
        return [p.tokens for p in preds]

    def score(self, X, y=None, sawr=None) -> float:
        """Exact Match as a fraction in [0, 1]."""
        gold = attach_targets(X, y)
        return corpus_exact(self.predict(gold, sawr), [s.target for s in gold]) / 100.0

    def tree_score(self, X, y=None, sawr=None) -> float:
        gold = attach_targets(X, y)
        return corpus_tree(self.predict(gold, sawr), [s.target for s in gold]) / 100.0

    def transductive_finetune(self, others, X_dev, y_dev, X_test, epochs=5, labeling="union"):
        """Run transductive ensemble fine-tuning with this and ``others`` fitted parsers.

        Returns the audit dict; on return ``model_`` is the fine-tuned model.
        Models requiring SAWRs use their own provider.
        """
        check_is_fitted(self, "model_")
        dev = attach_targets(X_dev, y_dev)
        test = check_sentences(X_test)
        members = [self] + list(others)
        models = [m.model_ for m in members]
        if any(m.sawrs for m in members):
            providers = {m.sawr_provider_ for m in members if m.sawrs}
            if len(providers) > 1:
                raise ValueError("all SAWR members must share one provider")
            provider = providers.pop()
            dev_sawr, test_sawr = provider.transform(dev), provider.transform(test)
        else:
            dev_sawr = test_sawr = None
        cfg = TrainConfig(**{**self.train_config().to_dict(), "tel_epochs": epochs, "tel_labeling": labeling})
        tuned, audit = tel(models, dev, test, cfg, dev_sawr, test_sawr)
        selected = members[audit["selected_model"]]
        self.model_ = tuned
        self.set_params(**{k: getattr(selected, k) for k in ("pascal", "sawrs", "ca")})
        self.sawr_provider_ = selected.sawr_provider_
        return audit
