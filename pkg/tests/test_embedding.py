import io

import numpy as np
import pytest

from dante.embedding import (
    CorpusError,
    EmbeddingTable,
    SequenceVector,
    TableFormatError,
    TrainConfig,
    embed_sequence,
    nearest_ports,
    train,
)
from dante.windows import PortSequence


def seq(ports, key="1.1.1.1", window=0):
    return PortSequence(key=key, window_index=window, ports=tuple(ports))


def table_from(entries, rare=None, dim=2):
    return EmbeddingTable(dim=dim, vectors={p: np.array(v, float) for p, v in entries.items()}, rare=rare)


class TestEmbedSequence:
    def test_single_port_is_identity(self):
        t = table_from({23: [1.0, 2.0]})
        out = embed_sequence(seq([23]), t)
        assert np.array_equal(out.vector, [1.0, 2.0])

    def test_repeated_port_is_identity(self):
        t = table_from({23: [1.0, 2.0]})
        out = embed_sequence(seq([23, 23, 23]), t)
        assert np.allclose(out.vector, [1.0, 2.0])

    def test_two_port_mean(self):
        t = table_from({1: [1.0, 0.0], 2: [0.0, 1.0]})
        out = embed_sequence(seq([1, 2]), t)
        assert np.allclose(out.vector, [0.5, 0.5])

    def test_unseen_port_uses_rare_vector(self):
        t = table_from({1: [1.0, 0.0]}, rare=np.array([3.0, 3.0]))
        out = embed_sequence(seq([1, 40000]), t)
        assert np.allclose(out.vector, [2.0, 1.5])

    def test_order_free(self):
        rng = np.random.default_rng(0)
        t = table_from({p: rng.normal(size=2) for p in range(10)})
        a = embed_sequence(seq([1, 2, 3, 4, 4]), t)
        b = embed_sequence(seq([4, 3, 4, 2, 1]), t)
        assert np.allclose(a.vector, b.vector)

    def test_direct_summation_oracle(self):
        rng = np.random.default_rng(7)
        t = table_from({p: rng.normal(size=8) for p in range(100)}, dim=8)
        for _ in range(200):
            ports = rng.integers(0, 100, size=rng.integers(1, 30))
            got = embed_sequence(seq(list(ports)), t).vector
            acc = np.zeros(8)
            for p in ports:
                acc = acc + t.vector_for(int(p))
            assert np.max(np.abs(got - acc / len(ports))) < 1e-9

    def test_concatenation_is_length_weighted_mean(self):
        rng = np.random.default_rng(1)
        t = table_from({p: rng.normal(size=4) for p in range(20)}, dim=4)
        a, b = [1, 2, 3], [4, 5]
        va = embed_sequence(seq(a), t).vector
        vb = embed_sequence(seq(b), t).vector
        vab = embed_sequence(seq(a + b), t).vector
        assert np.allclose(vab, (len(a) * va + len(b) * vb) / (len(a) + len(b)))


class TestTraining:
    def test_empty_corpus_raises(self):
        with pytest.raises(CorpusError):
            train([], TrainConfig(dim=4))

    def test_single_distinct_port_raises(self):
        with pytest.raises(CorpusError):
            train([[445, 445, 445]] * 20, TrainConfig(dim=4, min_count=1))

    def test_min_count_maps_to_rare(self):
        corpus = [[80, 8080]] * 20 + [[40000, 80]]
        table = train(corpus, TrainConfig(dim=4, min_count=5, epochs=1))
        assert 40000 not in table
        assert np.array_equal(table.vector_for(40000), table.rare)

    def test_cooccurring_pair_becomes_nearest(self):
        rng = np.random.default_rng(5)
        corpus = [[80, 8080]] * 10_000
        table = train(corpus, TrainConfig(dim=8, epochs=1, seed=11, min_count=5))
        assert nearest_ports(80, table, k=1)[0][0] == 8080

    def test_deterministic_given_seed(self):
        corpus = [[23, 2323, 23]] * 50 + [[80, 443]] * 50
        cfg = TrainConfig(dim=4, epochs=2, seed=99, min_count=1)
        t1 = train(corpus, cfg)
        t2 = train(corpus, cfg)
        assert t1.entries_equal(t2)
        assert t1.trained_on == t2.trained_on

    def test_accepts_port_sequences(self):
        corpus = [seq([23, 2323]), seq([23, 2323], key="2.2.2.2")] * 30
        table = train(corpus, TrainConfig(dim=4, epochs=1, min_count=1))
        assert 23 in table and 2323 in table

    def test_table_size_bounded(self):
        corpus = [[1, 2, 3]] * 10
        table = train(corpus, TrainConfig(dim=4, epochs=1, min_count=1))
        assert len(table) <= 65536


class TestTableIO:
    def test_round_trip_three_entries(self):
        rng = np.random.default_rng(2)
        t = table_from({p: rng.normal(size=3) for p in (23, 80, 2323)}, rare=rng.normal(size=3), dim=3)
        buf = io.StringIO()
        t.save(buf)
        buf.seek(0)
        loaded = EmbeddingTable.load(buf)
        assert loaded.entries_equal(t)

    def test_round_trip_after_training_is_bit_exact(self):
        table = train([[80, 8080]] * 100, TrainConfig(dim=4, epochs=1, min_count=1))
        buf = io.StringIO()
        table.save(buf)
        buf.seek(0)
        loaded = EmbeddingTable.load(buf)
        assert loaded.entries_equal(table)
        assert loaded.trained_on == table.trained_on

    def test_empty_table_round_trip(self):
        t = EmbeddingTable(dim=5, vectors={}, rare=None)
        buf = io.StringIO()
        t.save(buf)
        assert buf.getvalue() == "dante-embeddings v1 dim=5\n"
        buf.seek(0)
        loaded = EmbeddingTable.load(buf)
        assert len(loaded) == 0 and loaded.rare is None

    def test_dim_mismatch_names_line(self):
        text = "dante-embeddings v1 dim=3\n23 0.1 0.2 0.3\n80 0.1 0.2\n"
        with pytest.raises(TableFormatError, match="line 3"):
            EmbeddingTable.load(io.StringIO(text))

    def test_bad_header(self):
        with pytest.raises(TableFormatError):
            EmbeddingTable.load(io.StringIO("something else\n"))

    def test_duplicate_port_rejected(self):
        text = "dante-embeddings v1 dim=1\n23 0.5\n23 0.7\n"
        with pytest.raises(TableFormatError, match="duplicate"):
            EmbeddingTable.load(io.StringIO(text))


class TestNearestPorts:
    def test_only_other_port_returned(self):
        t = table_from({1: [1.0, 0.0], 2: [0.9, 0.1]})
        assert nearest_ports(1, t, k=3)[0][0] == 2

    def test_k_larger_than_table(self):
        t = table_from({1: [1.0, 0.0], 2: [0.9, 0.1], 3: [0.0, 1.0]})
        assert len(nearest_ports(1, t, k=50)) == 2

    def test_unknown_port_raises(self):
        t = table_from({1: [1.0, 0.0]})
        with pytest.raises(KeyError):
            nearest_ports(9999, t, k=1)

    def test_ties_break_toward_lower_port(self):
        t = table_from({5: [1.0, 0.0], 10: [2.0, 0.0], 7: [3.0, 0.0]})
        out = nearest_ports(5, t, k=2)
        assert [p for p, _ in out] == [7, 10]
