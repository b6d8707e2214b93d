"""Config parsing, splits, CSV loading, training loop, and artifacts."""

import math

import numpy as np
import pytest

from seqtext import engine, pipeline
from seqtext.engine import (
    Dataset,
    ExperimentConfig,
    build_model,
    corpus_stats,
    emit_learning_curve,
    evaluate,
    load_checkpoint,
    load_csv_dataset,
    load_dataset,
    make_synthetic_corpus,
    make_synthetic_csv,
    parse_config_text,
    read_container,
    save_checkpoint,
    save_dataset,
    split,
    train,
    write_container,
)
from seqtext.errors import (
    ConfigError,
    DataError,
    DivergenceError,
    IntegrityError,
    VocabularyMismatchError,
)


class TestConfigParsing:
    def test_typed_values_and_comments(self):
        text = """
        # an experiment
        task = multiclass
        epochs = 12

        learning_rate = 0.25
        peepholes = off
        embedding_dim = auto
        gradient_clip = none
        """
        got = parse_config_text(text)
        assert got == {
            "task": "multiclass",
            "epochs": 12,
            "learning_rate": 0.25,
            "peepholes": False,
            "embedding_dim": "auto",
            "gradient_clip": None,
        }

    def test_unknown_key_names_source_and_line(self):
        with pytest.raises(ConfigError, match=r"run\.cfg:2.*momentum"):
            parse_config_text("epochs = 3\nmomentum = 0.9\n", source="run.cfg")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match=r":3.*duplicate.*epochs"):
            parse_config_text("epochs = 3\nseed = 1\nepochs = 4\n")

    def test_line_without_equals_rejected(self):
        with pytest.raises(ConfigError, match=":1"):
            parse_config_text("epochs 3\n")

    def test_bad_number_rejected(self):
        with pytest.raises(ConfigError, match="epochs"):
            parse_config_text("epochs = many\n")

    def test_bad_boolean_rejected(self):
        with pytest.raises(ConfigError, match="peepholes"):
            parse_config_text("peepholes = maybe\n")


class TestExperimentConfig:
    def test_learning_rate_resolution_by_task(self):
        assert ExperimentConfig(task="binary").resolved_learning_rate() == 0.001
        assert ExperimentConfig(task="multiclass").resolved_learning_rate() == 0.005
        assert ExperimentConfig(learning_rate=0.2).resolved_learning_rate() == 0.2

    def test_loss_resolution_by_head(self):
        assert ExperimentConfig(task="binary").head == "sigmoid"
        assert ExperimentConfig(task="multiclass").head == "softmax"
        assert ExperimentConfig(task="binary").resolved_loss() == "bce"
        assert ExperimentConfig(task="multiclass").resolved_loss() == "sparse_cce"
        assert ExperimentConfig(task="multiclass", loss="cce").resolved_loss() == "cce"

    def test_embedding_dim_auto_uses_vocab_size(self):
        cfg = ExperimentConfig(embedding_dim="auto", vocab_size=65536)
        assert cfg.resolve_embedding_dim() == 16
        assert cfg.resolve_embedding_dim(actual_vocab_size=16) == 2
        assert ExperimentConfig(embedding_dim=24).resolve_embedding_dim(500) == 24

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"task": "regression"},
            {"cell": "transformer"},
            {"optimizer": "lbfgs"},
            {"loss": "hinge"},
            {"vocab_size": 2},
            {"max_len": 0},
            {"epochs": -1},
            {"batch_size": 0},
            {"embedding_dim": 0},
            {"embedding_dim": "wide"},
            {"learning_rate": 0.0},
            {"gradient_clip": -1.0},
            {"literal_recurrence": True, "cell": "lstm"},
        ],
    )
    def test_validate_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kwargs).validate()

    def test_describe_round_trips_as_config_text(self):
        cfg = ExperimentConfig(task="multiclass", cell="gru", embedding_dim="auto",
                               hidden_size=8, seed=5)
        text = cfg.describe(actual_vocab_size=500)
        back = ExperimentConfig.from_dict(parse_config_text(text))
        assert back.task == "multiclass"
        assert back.cell == "gru"
        assert back.hidden_size == 8
        assert back.seed == 5
        # resolution is baked into the described form
        assert back.learning_rate == 0.005
        assert back.loss == "sparse_cce"
        assert back.embedding_dim == engine.embedding_dim_heuristic(500)

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ConfigError, match="momentum"):
            ExperimentConfig.from_dict({"momentum": 0.9})

    def test_from_file(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("cell = rnn\nепochs = 3\n".replace("еп", "ep"), encoding="utf-8")
        cfg = ExperimentConfig.from_file(p)
        assert cfg.cell == "rnn"
        assert cfg.epochs == 3


class TestSplit:
    def test_fraction_is_stratified(self):
        ds, _, _ = make_synthetic_corpus(10, 2, seed=0)
        out = split(ds, train_fraction=0.8, seed=1)
        assert out.train_idx.size == 8
        assert out.test_idx.size == 2
        y = out.labels()
        assert np.bincount(y[out.train_idx]).tolist() == [4, 4]
        assert np.bincount(y[out.test_idx]).tolist() == [1, 1]

    def test_split_partitions_the_corpus(self):
        ds, _, _ = make_synthetic_corpus(21, 3, seed=2)
        out = split(ds, train_fraction=0.7, seed=0)
        both = np.concatenate([out.train_idx, out.test_idx])
        assert np.array_equal(np.sort(both), np.arange(21))

    def test_explicit_counts_largest_remainder(self):
        # 5 + 5 + 5 examples, 10 train slots: the first class wins the tie
        ds, _, _ = make_synthetic_corpus(15, 3, seed=0)
        out = split(ds, train_count=10, test_count=5, seed=0)
        y = out.labels()
        assert np.bincount(y[out.train_idx]).tolist() == [4, 3, 3]

    def test_seed_determinism(self):
        ds, _, _ = make_synthetic_corpus(20, 2, seed=3)
        a = split(ds, train_fraction=0.5, seed=9)
        b = split(ds, train_fraction=0.5, seed=9)
        c = split(ds, train_fraction=0.5, seed=10)
        assert np.array_equal(a.train_idx, b.train_idx)
        assert not np.array_equal(a.train_idx, c.train_idx)

    def test_source_dataset_is_untouched(self):
        ds, _, _ = make_synthetic_corpus(10, 2, seed=0)
        split(ds, train_fraction=0.5)
        assert ds.train_idx is None and ds.test_idx is None

    def test_argument_validation(self):
        ds, _, _ = make_synthetic_corpus(10, 2, seed=0)
        with pytest.raises(ConfigError, match="not both"):
            split(ds, train_fraction=0.5, train_count=5, test_count=5)
        with pytest.raises(ConfigError, match="not both"):
            split(ds)
        with pytest.raises(ConfigError, match="train_fraction"):
            split(ds, train_fraction=1.0)
        with pytest.raises(ConfigError, match="both train_count and test_count"):
            split(ds, train_count=5)
        with pytest.raises(ConfigError, match="corpus size"):
            split(ds, train_count=5, test_count=6)

    def test_fraction_leaving_empty_test_rejected(self):
        ds, _, _ = make_synthetic_corpus(4, 2, seed=0)
        with pytest.raises(ConfigError, match="empty test split"):
            split(ds, train_fraction=0.9)

    def test_tiny_class_rejected(self):
        ds, _, _ = make_synthetic_corpus(6, 2, seed=0)
        lonely = Dataset(documents=[d for d in ds.documents if d.label == 1][:1]
                         + [d for d in ds.documents if d.label == 0],
                         class_names=ds.class_names)
        with pytest.raises(DataError, match="at least 2 per class"):
            split(lonely, train_fraction=0.5)


def _write_csv(path, rows, header=("text", "label"), encoding="utf-8"):
    lines = [",".join(header)]
    lines += [",".join(r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding=encoding)


class TestLoadCsv:
    def test_basic_load(self, tmp_path):
        p = tmp_path / "toy.csv"
        _write_csv(p, [
            ("good fine good", "pos"),
            ("bad awful bad", "neg"),
            ("fine good", "pos"),
        ])
        cfg = pipeline.PipelineConfig(vocab_size=50, max_len=8)
        ds, vocab = load_csv_dataset(p, "text", "label", cfg)
        assert len(ds) == 3
        # class order follows first appearance in the file
        assert ds.class_names == ["pos", "neg"]
        assert ds.labels().tolist() == [0, 1, 0]
        assert vocab.index_of("good") >= 2
        assert ds.vocab_sha == vocab.sha256()

    def test_missing_column_rejected(self, tmp_path):
        p = tmp_path / "toy.csv"
        _write_csv(p, [("hi", "pos")])
        cfg = pipeline.PipelineConfig(vocab_size=10, max_len=4)
        with pytest.raises(ConfigError, match="review"):
            load_csv_dataset(p, "review", "label", cfg)

    def test_short_row_names_row_number(self, tmp_path):
        p = tmp_path / "toy.csv"
        p.write_text("text,label\nfine,pos\nonlyonefield\n", encoding="utf-8")
        cfg = pipeline.PipelineConfig(vocab_size=10, max_len=4)
        with pytest.raises(DataError, match="row 3"):
            load_csv_dataset(p, "text", "label", cfg)

    def test_empty_label_rejected(self, tmp_path):
        p = tmp_path / "toy.csv"
        p.write_text("text,label\nfine,pos\nbad,\n", encoding="utf-8")
        cfg = pipeline.PipelineConfig(vocab_size=10, max_len=4)
        with pytest.raises(DataError, match="row 3.*empty label"):
            load_csv_dataset(p, "text", "label", cfg)

    def test_empty_and_headerless_files(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("", encoding="utf-8")
        cfg = pipeline.PipelineConfig(vocab_size=10, max_len=4)
        with pytest.raises(DataError, match="empty file"):
            load_csv_dataset(empty, "text", "label", cfg)
        headonly = tmp_path / "head.csv"
        headonly.write_text("text,label\n", encoding="utf-8")
        with pytest.raises(DataError, match="no data rows"):
            load_csv_dataset(headonly, "text", "label", cfg)

    def test_pinned_class_names(self, tmp_path):
        p = tmp_path / "toy.csv"
        _write_csv(p, [("fine", "pos"), ("bad", "neg")])
        cfg = pipeline.PipelineConfig(vocab_size=10, max_len=4)
        ds, _ = load_csv_dataset(p, "text", "label", cfg, class_names=["neg", "pos"])
        assert ds.class_names == ["neg", "pos"]
        assert ds.labels().tolist() == [1, 0]
        with pytest.raises(DataError, match="row 2.*'pos'"):
            load_csv_dataset(p, "text", "label", cfg, class_names=["neg", "other"])

    def test_vocab_reuse_keeps_indices_comparable(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        _write_csv(a, [("alpha beta", "x"), ("beta gamma", "y")])
        _write_csv(b, [("gamma alpha", "y"), ("beta beta", "x")])
        cfg = pipeline.PipelineConfig(vocab_size=10, max_len=4)
        ds_a, vocab = load_csv_dataset(a, "text", "label", cfg)
        ds_b, vocab_b = load_csv_dataset(b, "text", "label", cfg, vocab=vocab,
                                         class_names=ds_a.class_names)
        assert vocab_b is vocab
        assert ds_b.vocab_sha == ds_a.vocab_sha

    def test_utf8_bom_is_transparent(self, tmp_path):
        p = tmp_path / "bom.csv"
        _write_csv(p, [("fine", "pos"), ("bad", "neg")], encoding="utf-8-sig")
        cfg = pipeline.PipelineConfig(vocab_size=10, max_len=4)
        ds, _ = load_csv_dataset(p, "text", "label", cfg)
        assert ds.class_names == ["pos", "neg"]


class TestSyntheticCorpus:
    def test_balanced_labels_and_names(self):
        ds, vocab, cfg = make_synthetic_corpus(30, 3, seed=1)
        assert np.bincount(ds.labels()).tolist() == [10, 10, 10]
        assert ds.class_names == ["class0", "class1", "class2"]
        binary, _, _ = make_synthetic_corpus(10, 2, seed=1)
        assert binary.class_names == ["neg", "pos"]

    def test_own_tokens_in_document_tail(self):
        # two class markers always land in the final five positions
        ds, vocab, _ = make_synthetic_corpus(60, 3, seed=4, pad_len=64)
        for doc in ds.documents:
            toks = pipeline.decode(doc.indices, vocab)
            tail = toks[-5:]
            own = sum(1 for t in tail if t.startswith(f"sig{doc.label}"))
            assert own >= 2

    def test_determinism(self):
        a, va, _ = make_synthetic_corpus(20, 2, seed=9)
        b, vb, _ = make_synthetic_corpus(20, 2, seed=9)
        assert va.sha256() == vb.sha256()
        for da, db in zip(a.documents, b.documents):
            assert np.array_equal(da.indices, db.indices)

    def test_csv_variant_loads_back(self, tmp_path):
        p = tmp_path / "syn.csv"
        make_synthetic_csv(p, 12, 2, seed=3, filler_tokens=30, min_len=10, max_len=20)
        cfg = pipeline.PipelineConfig(vocab_size=200, max_len=32)
        ds, vocab = load_csv_dataset(p, "text", "label", cfg)
        assert len(ds) == 12
        assert sorted(ds.class_names) == ["neg", "pos"]
        stats = corpus_stats(ds)
        assert stats["documents"] == 12
        assert stats["truncated"] == 0

    def test_corpus_stats_fields(self):
        ds, _, _ = make_synthetic_corpus(10, 2, seed=0, min_len=12, max_len=12, pad_len=6)
        stats = corpus_stats(ds)
        assert stats["documents"] == 10
        assert stats["classes"] == {"neg": 5, "pos": 5}
        assert stats["avg_length"] == 12.0
        assert stats["truncated"] == 10
        assert 0.0 <= stats["oov_rate"] <= 1.0


def _toy_setup(n_docs=16, n_classes=2, seed=0, **cfg_kwargs):
    ds, vocab, pcfg = make_synthetic_corpus(n_docs, n_classes, seed=seed,
                                            signal_rate=0.5, filler_tokens=20)
    base = dict(task="binary" if n_classes == 2 else "multiclass",
                cell="rnn", epochs=2, batch_size=8, hidden_size=6,
                dense_size=4, vocab_size=vocab.size, max_len=pcfg.max_len,
                embedding_dim=8, seed=1)
    base.update(cfg_kwargs)
    return ds, vocab, pcfg, ExperimentConfig(**base)


class TestTrain:
    def test_zero_epochs_returns_initialized_model(self):
        ds, vocab, _, cfg = _toy_setup(epochs=0)
        model, curve = train(cfg, ds, vocab)
        assert len(curve) == 0
        probs, _ = engine.forward(model, engine._stack_indices(ds.documents))
        assert probs.shape == (len(ds),)

    def test_curve_has_one_point_per_epoch(self):
        ds, vocab, _, cfg = _toy_setup(epochs=3)
        _, curve = train(cfg, split(ds, train_fraction=0.5, seed=0), vocab)
        assert [p.epoch for p in curve] == [1, 2, 3]
        for p in curve:
            assert math.isfinite(p.train_loss)
            assert 0.0 <= p.train_acc <= 100.0
            assert math.isfinite(p.test_loss)

    def test_no_split_gives_nan_test_columns(self):
        ds, vocab, _, cfg = _toy_setup(epochs=1)
        _, curve = train(cfg, ds, vocab)
        point = curve.records[0]
        assert math.isnan(point.test_loss)
        assert math.isnan(point.test_acc)

    def test_bitwise_determinism(self):
        ds, vocab, _, cfg = _toy_setup(epochs=2, cell="gru")
        m1, c1 = train(cfg, ds, vocab)
        m2, c2 = train(cfg, ds, vocab)
        for (n1, a1), (n2, a2) in zip(m1.state_blocks(), m2.state_blocks()):
            assert n1 == n2
            assert np.array_equal(a1, a2)
        # the test columns are NaN here (no split), so compare NaN-aware
        t1 = np.array([p.astuple() for p in c1])
        t2 = np.array([p.astuple() for p in c2])
        assert np.array_equal(t1, t2, equal_nan=True)

    def test_seed_changes_the_run(self):
        ds, vocab, _, cfg = _toy_setup(epochs=1)
        other = ExperimentConfig(**{**cfg.to_dict(), "seed": cfg.seed + 1})
        m1, _ = train(cfg, ds, vocab)
        m2, _ = train(other, ds, vocab)
        assert not np.array_equal(m1.head_W, m2.head_W)

    def test_log_callback_sees_every_epoch(self):
        ds, vocab, _, cfg = _toy_setup(epochs=2)
        lines = []
        train(cfg, ds, vocab, log=lines.append)
        epoch_lines = [l for l in lines if l.startswith("epoch ")]
        assert len(epoch_lines) == 2
        assert "train_loss" in epoch_lines[0]

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_names_epoch_and_batch(self):
        ds, vocab, _, cfg = _toy_setup(epochs=40, cell="rnn", optimizer="sgd",
                                       learning_rate=1e12)
        with pytest.raises(DivergenceError, match=r"diverged at epoch \d+, batch \d+"):
            train(cfg, ds, vocab)

    def test_gradient_clip_rescues_the_same_run(self):
        ds, vocab, _, cfg = _toy_setup(epochs=40, cell="rnn", optimizer="sgd",
                                       learning_rate=1e12, gradient_clip=1.0)
        _, curve = train(cfg, ds, vocab)
        assert len(curve) == 40

    def test_stop_when_train_acc(self):
        ds, vocab, _, cfg = _toy_setup(n_docs=32, epochs=200, cell="gru",
                                       hidden_size=8, seed=3)
        _, curve = train(cfg, ds, vocab, stop_when_train_acc=100.0)
        assert len(curve) < 200

    def test_stop_when_test_acc_stops_immediately_at_zero_bar(self):
        ds, vocab, _, cfg = _toy_setup(epochs=5)
        _, curve = train(cfg, split(ds, train_fraction=0.5, seed=0), vocab,
                         stop_when_test_acc=0.0)
        assert len(curve) == 1

    def test_empty_dataset_rejected(self):
        _, vocab, _, cfg = _toy_setup()
        empty = Dataset(documents=[], class_names=["neg", "pos"])
        with pytest.raises(ConfigError, match="empty"):
            train(cfg, empty, vocab)

    def test_empty_training_split_rejected(self):
        ds, vocab, _, cfg = _toy_setup()
        starved = Dataset(documents=ds.documents, class_names=ds.class_names,
                          train_idx=np.array([], dtype=np.int64),
                          test_idx=np.arange(len(ds.documents)))
        with pytest.raises(ConfigError, match="training split is empty"):
            train(cfg, starved, vocab)

    def test_binary_task_needs_two_classes(self):
        ds, vocab, _, cfg = _toy_setup(n_docs=15, n_classes=3, task="binary")
        with pytest.raises(ConfigError, match="exactly 2"):
            train(cfg, ds, vocab)


class TestTrainingLossDescends:
    def test_running_mean_loss_is_nearly_monotone(self):
        # smooth descent on the separable corpus; tiny rebounds between
        # consecutive epochs are tolerated, sustained rises are not
        ds, vocab, pcfg = make_synthetic_corpus(32, 2, seed=7,
                                                signal_rate=0.5, filler_tokens=20)
        cfg = ExperimentConfig(task="binary", cell="lstm", epochs=60,
                               batch_size=8, hidden_size=8,
                               vocab_size=vocab.size, max_len=pcfg.max_len, seed=3)
        _, curve = train(cfg, ds, vocab)
        losses = [p.train_loss for p in curve]
        violations = sum(1 for a, b in zip(losses[5:], losses[6:]) if b > a + 1e-9)
        assert violations <= 3
        assert losses[-1] < losses[5]


class TestLearningCurveFile:
    def _curve(self, n):
        curve = engine.LearningCurve()
        rng = np.random.default_rng(0)
        for ep in range(1, n + 1):
            curve.append(engine.CurvePoint(ep, rng.random(), rng.random() * 100,
                                           rng.random(), rng.random() * 100))
        return curve

    def test_thirty_epochs_give_thirty_one_lines(self, tmp_path):
        path = tmp_path / "curve.csv"
        emit_learning_curve(self._curve(30), path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 31
        assert lines[0] == "epoch,train_loss,train_acc,test_loss,test_acc"

    def test_empty_curve_is_header_only(self, tmp_path):
        path = tmp_path / "curve.csv"
        emit_learning_curve(engine.LearningCurve(), path)
        assert path.read_text(encoding="utf-8") == "epoch,train_loss,train_acc,test_loss,test_acc\n"

    def test_floats_round_trip_at_full_precision(self, tmp_path):
        curve = self._curve(5)
        path = tmp_path / "curve.csv"
        emit_learning_curve(curve, path)
        lines = path.read_text(encoding="utf-8").splitlines()[1:]
        for point, line in zip(curve, lines):
            ep, tl, ta, el, ea = line.split(",")
            assert int(ep) == point.epoch
            assert float(tl) == point.train_loss
            assert float(ta) == point.train_acc
            assert float(el) == point.test_loss
            assert float(ea) == point.test_acc

    def test_nan_columns_survive(self, tmp_path):
        curve = engine.LearningCurve()
        curve.append(engine.CurvePoint(1, 0.5, 50.0, float("nan"), float("nan")))
        path = tmp_path / "curve.csv"
        emit_learning_curve(curve, path)
        _, _, _, el, ea = path.read_text(encoding="utf-8").splitlines()[1].split(",")
        assert math.isnan(float(el))
        assert math.isnan(float(ea))


class TestContainer:
    def _sample(self, tmp_path, name="box.sqt"):
        path = tmp_path / name
        arrays = [
            ("weights", np.arange(6, dtype=np.float64).reshape(2, 3)),
            ("ids", np.array([3, 1, 4], dtype=np.int32)),
        ]
        write_container(path, {"kind": "demo", "note": "x"}, arrays)
        return path, arrays

    def test_round_trip(self, tmp_path):
        path, arrays = self._sample(tmp_path)
        header, got = read_container(path)
        assert header["kind"] == "demo"
        assert [b["name"] for b in header["blocks"]] == ["weights", "ids"]
        for name, arr in arrays:
            assert got[name].dtype == arr.dtype
            assert np.array_equal(got[name], arr)

    def test_identical_inputs_identical_bytes(self, tmp_path):
        p1, _ = self._sample(tmp_path, "a.sqt")
        p2, _ = self._sample(tmp_path, "b.sqt")
        assert p1.read_bytes() == p2.read_bytes()

    def test_unsupported_dtype_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="dtype"):
            write_container(tmp_path / "bad.sqt", {},
                            [("x", np.zeros(3, dtype=np.float32))])

    def test_truncation_detected(self, tmp_path):
        path, _ = self._sample(tmp_path)
        data = path.read_bytes()
        path.write_bytes(data[:-5])
        with pytest.raises(IntegrityError):
            read_container(path)

    def test_bad_magic_detected(self, tmp_path):
        path, _ = self._sample(tmp_path)
        data = path.read_bytes()
        path.write_bytes(b"NOTSQT" + data[6:])
        with pytest.raises(IntegrityError, match="magic"):
            read_container(path)

    def test_flipped_byte_detected(self, tmp_path):
        path, _ = self._sample(tmp_path)
        data = bytearray(path.read_bytes())
        data[len(data) // 2] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(IntegrityError, match="checksum|length"):
            read_container(path)

    def test_appended_garbage_detected(self, tmp_path):
        path, _ = self._sample(tmp_path)
        path.write_bytes(path.read_bytes() + b"extra")
        with pytest.raises(IntegrityError):
            read_container(path)


class TestCheckpoint:
    @pytest.mark.parametrize("kwargs", [
        {"cell": "rnn"},
        {"cell": "rnn", "literal_recurrence": True},
        {"cell": "lstm"},
        {"cell": "lstm", "peepholes": False},
        {"cell": "gru"},
    ])
    def test_round_trip_every_cell(self, tmp_path, kwargs):
        ds, vocab, pcfg, cfg = _toy_setup(epochs=1, **kwargs)
        model, _ = train(cfg, ds, vocab)
        path = tmp_path / "model.sqt"
        save_checkpoint(path, model, cfg, ds.class_names, vocab, pcfg)
        ck = load_checkpoint(path)
        for (n1, a1), (n2, a2) in zip(model.state_blocks(), ck.model.state_blocks()):
            assert n1 == n2
            assert np.array_equal(a1, a2)
        assert ck.config == cfg
        assert ck.class_names == ds.class_names
        assert ck.vocab.serialize() == vocab.serialize()
        assert ck.pipeline.to_dict() == pcfg.to_dict()
        assert type(ck.model.cell) is type(model.cell)

    def test_loaded_model_predicts_identically(self, tmp_path):
        ds, vocab, pcfg, cfg = _toy_setup(epochs=1, cell="gru")
        model, _ = train(cfg, ds, vocab)
        path = tmp_path / "model.sqt"
        save_checkpoint(path, model, cfg, ds.class_names, vocab, pcfg)
        ck = load_checkpoint(path)
        X = engine._stack_indices(ds.documents)
        p1, _ = engine.forward(model, X)
        p2, _ = engine.forward(ck.model, X)
        assert np.array_equal(p1, p2)

    def test_wrong_artifact_kind_rejected(self, tmp_path):
        ds, vocab, pcfg, cfg = _toy_setup(epochs=0)
        model, _ = train(cfg, ds, vocab)
        mpath, dpath = tmp_path / "model.sqt", tmp_path / "data.sqt"
        save_checkpoint(mpath, model, cfg, ds.class_names, vocab, pcfg)
        save_dataset(dpath, ds, vocab, pcfg)
        with pytest.raises(DataError, match="not a checkpoint"):
            load_checkpoint(dpath)
        with pytest.raises(DataError, match="not an encoded dataset"):
            load_dataset(mpath)

    def test_missing_parameter_block_detected(self, tmp_path):
        ds, vocab, pcfg, cfg = _toy_setup(epochs=0)
        model, _ = train(cfg, ds, vocab)
        path = tmp_path / "model.sqt"
        save_checkpoint(path, model, cfg, ds.class_names, vocab, pcfg)
        header, arrays = read_container(path)
        header["blocks"] = [b for b in header["blocks"] if b["name"] != "head.W"]
        del arrays["head.W"]
        write_container(path, {k: v for k, v in header.items() if k != "blocks"},
                        list(arrays.items()))
        with pytest.raises(IntegrityError, match="head.W"):
            load_checkpoint(path)


class TestDatasetArtifact:
    def test_round_trip_with_split(self, tmp_path):
        ds, vocab, pcfg = make_synthetic_corpus(12, 2, seed=5)
        ds = split(ds, train_fraction=0.5, seed=2)
        path = tmp_path / "data.sqt"
        save_dataset(path, ds, vocab, pcfg)
        back, vocab2, pcfg2 = load_dataset(path)
        assert len(back) == 12
        assert back.class_names == ds.class_names
        assert vocab2.serialize() == vocab.serialize()
        assert pcfg2.to_dict() == pcfg.to_dict()
        assert np.array_equal(back.train_idx, ds.train_idx)
        assert np.array_equal(back.test_idx, ds.test_idx)
        for d1, d2 in zip(ds.documents, back.documents):
            assert np.array_equal(d1.indices, d2.indices)
            assert d1.label == d2.label
            assert d1.original_length == d2.original_length

    def test_round_trip_without_split(self, tmp_path):
        ds, vocab, pcfg = make_synthetic_corpus(8, 2, seed=5)
        path = tmp_path / "data.sqt"
        save_dataset(path, ds, vocab, pcfg)
        back, _, _ = load_dataset(path)
        assert back.train_idx is None and back.test_idx is None

    def test_identical_bytes_across_writes(self, tmp_path):
        ds, vocab, pcfg = make_synthetic_corpus(8, 2, seed=5)
        p1, p2 = tmp_path / "a.sqt", tmp_path / "b.sqt"
        save_dataset(p1, ds, vocab, pcfg)
        save_dataset(p2, ds, vocab, pcfg)
        assert p1.read_bytes() == p2.read_bytes()


class TestEvaluate:
    def test_split_selection_and_errors(self):
        ds, vocab, _, cfg = _toy_setup(epochs=1)
        ds = split(ds, train_fraction=0.5, seed=0)
        model, _ = train(cfg, ds, vocab)
        for which in ("train", "test", "all"):
            rep = evaluate(model, ds, which=which)
            assert 0.0 <= rep.accuracy <= 100.0
        assert evaluate(model, ds, which="all").confusion.sum() == len(ds)
        with pytest.raises(ConfigError, match="split must be"):
            evaluate(model, ds, which="validation")

    def test_empty_split_rejected(self):
        ds, vocab, _, cfg = _toy_setup(epochs=0)
        model, _ = train(cfg, ds, vocab)
        with pytest.raises(ConfigError, match="test split is empty"):
            evaluate(model, ds, which="test")

    def test_vocabulary_mismatch_rejected(self):
        ds, vocab, _, cfg = _toy_setup(epochs=0)
        model, _ = train(cfg, ds, vocab)
        other, _, _ = make_synthetic_corpus(16, 2, seed=99, signal_rate=0.5,
                                            filler_tokens=21)
        assert other.vocab_sha != ds.vocab_sha
        with pytest.raises(VocabularyMismatchError, match="re-encode"):
            evaluate(model, other, which="all")

    def test_class_count_mismatch_rejected(self):
        ds, vocab, _, cfg = _toy_setup(epochs=0)
        model, _ = train(cfg, ds, vocab)
        tri, _, _ = make_synthetic_corpus(15, 3, seed=1)
        tri = Dataset(documents=tri.documents, class_names=tri.class_names,
                      vocab_sha=None)
        with pytest.raises(ConfigError, match="classes"):
            evaluate(model, tri, which="all")
