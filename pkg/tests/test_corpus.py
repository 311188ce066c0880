"""Corpus preparation: stratified splits, leakage guards, content hashes."""

import json

import numpy as np
import pytest

from lexigan.audio import write_wav
from lexigan.corpus import (
    CorpusError,
    load_prepared,
    prepare_corpus,
    prepare_from_arrays,
    save_prepared,
    scan_wav_tree,
    split_indices,
    token_hash,
    verify_no_leakage,
)


def toy_arrays(n_per=10, n_classes=3, length=64, seed=0):
    rng = np.random.default_rng(seed)
    clips, labels = [], []
    for c in range(n_classes):
        for _ in range(n_per):
            clips.append(rng.uniform(-0.5, 0.5, size=length).astype(np.float32))
            labels.append(f"word{c}")
    return clips, labels


def test_split_is_stratified_and_disjoint():
    labels = [f"w{i // 10}" for i in range(100)]  # 10 classes x 10 tokens
    train, test = split_indices(labels, test_fraction=0.2, seed=0)
    assert len(set(train) & set(test)) == 0
    assert len(train) + len(test) == 100
    for c in range(10):
        members = set(range(c * 10, (c + 1) * 10))
        assert len(members & set(test)) == 2


def test_split_deterministic_and_seed_sensitive():
    labels = ["a"] * 20 + ["b"] * 20
    t1 = [list(part) for part in split_indices(labels, 0.25, seed=5)]
    t2 = [list(part) for part in split_indices(labels, 0.25, seed=5)]
    t3 = [list(part) for part in split_indices(labels, 0.25, seed=6)]
    assert t1 == t2
    assert t1 != t3


def test_split_warns_on_singleton_class():
    labels = ["a"] * 10 + ["lonely"]
    with pytest.warns(UserWarning):
        train, test = split_indices(labels, 0.3, seed=0)
    # the singleton stays in training rather than vanishing from it
    assert 10 in train


def test_prepare_from_arrays_slices_and_splits():
    clips, labels = toy_arrays(length=50)
    pc = prepare_from_arrays(clips, labels, slice_len=64, rate=16000,
                             test_fraction=0.2, seed=0)
    assert pc.train_x.shape[1] == 64
    assert pc.test_x.shape[1] == 64
    assert pc.train_x.shape[0] + pc.test_x.shape[0] == 30
    assert pc.slice_len == 64
    np.testing.assert_array_equal(pc.train_x[:, 50:], 0.0)
    verify_no_leakage(pc)


def test_duplicate_tokens_never_straddle_the_split():
    rng = np.random.default_rng(1)
    base = rng.uniform(-0.5, 0.5, 64).astype(np.float32)
    clips = [base.copy() for _ in range(10)] + [
        rng.uniform(-0.5, 0.5, 64).astype(np.float32) for _ in range(10)
    ]
    labels = ["dup"] * 10 + ["uniq"] * 10
    with pytest.warns(UserWarning):
        pc = prepare_from_arrays(clips, labels, slice_len=64, rate=16000,
                                 test_fraction=0.3, seed=0)
    verify_no_leakage(pc)
    train_hashes = {token_hash(x) for x in pc.train_x}
    test_hashes = {token_hash(x) for x in pc.test_x}
    assert not train_hashes & test_hashes


def test_verify_no_leakage_catches_contamination():
    clips, labels = toy_arrays()
    pc = prepare_from_arrays(clips, labels, slice_len=64, rate=16000,
                             test_fraction=0.2, seed=0)
    pc.test_x[0] = pc.train_x[0]
    with pytest.raises(CorpusError):
        verify_no_leakage(pc)


def test_content_hash_tracks_content():
    clips, labels = toy_arrays()
    a = prepare_from_arrays(clips, labels, slice_len=64, rate=16000, test_fraction=0.2, seed=0)
    b = prepare_from_arrays(clips, labels, slice_len=64, rate=16000, test_fraction=0.2, seed=0)
    assert a.content_hash() == b.content_hash()
    c = prepare_from_arrays(clips, labels, slice_len=64, rate=16000, test_fraction=0.2, seed=1)
    assert a.content_hash() != c.content_hash()


def test_label_counts():
    clips, labels = toy_arrays(n_per=10, n_classes=3)
    pc = prepare_from_arrays(clips, labels, slice_len=64, rate=16000, test_fraction=0.2, seed=0)
    counts = pc.label_counts()
    for w in ("word0", "word1", "word2"):
        assert counts[w]["train"] + counts[w]["test"] == 10


def test_save_load_roundtrip(tmp_path):
    clips, labels = toy_arrays()
    pc = prepare_from_arrays(clips, labels, slice_len=64, rate=16000, test_fraction=0.2, seed=0)
    out = save_prepared(tmp_path / "corpus", pc)
    back = load_prepared(out)
    np.testing.assert_array_equal(back.train_x, pc.train_x)
    np.testing.assert_array_equal(back.test_x, pc.test_x)
    assert back.train_y == pc.train_y
    assert back.test_y == pc.test_y
    assert back.rate == pc.rate
    assert back.content_hash() == pc.content_hash()


def test_load_rejects_tampered_arrays(tmp_path):
    clips, labels = toy_arrays()
    pc = prepare_from_arrays(clips, labels, slice_len=64, rate=16000, test_fraction=0.2, seed=0)
    out = save_prepared(tmp_path / "corpus", pc)
    data = dict(np.load(out / "arrays.npz", allow_pickle=False))
    data["train_x"] = data["train_x"] + 0.25
    np.savez(out / "arrays.npz", **data)
    with pytest.raises(CorpusError):
        load_prepared(out)


def test_load_rejects_unknown_format_version(tmp_path):
    clips, labels = toy_arrays()
    pc = prepare_from_arrays(clips, labels, slice_len=64, rate=16000, test_fraction=0.2, seed=0)
    out = save_prepared(tmp_path / "corpus", pc)
    doc = json.loads((out / "manifest.json").read_text())
    doc["format_version"] = 999
    (out / "manifest.json").write_text(json.dumps(doc))
    with pytest.raises(CorpusError):
        load_prepared(out)


def wav_tree(root, rate=16000, length=64):
    rng = np.random.default_rng(7)
    for word in ("bird", "cat"):
        for i in range(6):
            write_wav(root / word / f"{word}_{i:02d}.wav",
                      rng.uniform(-0.4, 0.4, length).astype(np.float32), rate)


def test_scan_wav_tree_labels_by_directory(tmp_path):
    wav_tree(tmp_path)
    found = scan_wav_tree(tmp_path)
    assert len(found) == 12
    assert [lab for _, lab in found] == ["bird"] * 6 + ["cat"] * 6
    paths = [p for p, _ in found]
    assert paths == sorted(paths)


def test_prepare_corpus_from_tree(tmp_path):
    wav_tree(tmp_path)
    pc = prepare_corpus(tmp_path, slice_len=64, test_fraction=0.25, seed=0)
    assert pc.rate == 16000
    assert sorted(set(pc.train_y + pc.test_y)) == ["bird", "cat"]
    assert pc.test_x.shape[0] == 4  # 25% of 6, x2 classes, stratified
    verify_no_leakage(pc)


def test_prepare_corpus_rejects_mixed_rates(tmp_path):
    wav_tree(tmp_path)
    write_wav(tmp_path / "bird" / "odd.wav", np.zeros(64, dtype=np.float32), 8000)
    with pytest.raises(CorpusError):
        prepare_corpus(tmp_path, slice_len=64, test_fraction=0.25, seed=0)


def test_prepare_corpus_empty_tree(tmp_path):
    with pytest.raises(CorpusError):
        prepare_corpus(tmp_path, slice_len=64, test_fraction=0.25, seed=0)
