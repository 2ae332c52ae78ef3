"""
Synthetic images, PNG boundary, random crops and corpus construction.
"""
import filecmp

import numpy as np
import pandas as pd
import pytest
from PIL import Image

from corpus.builder import (
    MANIFEST_COLUMNS,
    Corpus,
    SplitDef,
    build_corpus,
    check_disjoint,
    split_defs,
)
from corpus.png_io import load_png, load_png_uint8, quantize, random_crop, save_png
from corpus.synth import render_content, sample_rng, synth_fake, synth_real, upsample_nearest
from utils.config.run_config import CorpusSpec


@pytest.mark.parametrize("synth", [synth_real, synth_fake])
def test_same_seed_gives_bit_identical_images(synth):
    a, b = synth(1234, 32, 32), synth(1234, 32, 32)
    assert np.array_equal(a.pixels, b.pixels)
    assert a.pixels.shape == (3, 32, 32)


@pytest.mark.parametrize("synth", [synth_real, synth_fake])
def test_pixels_stay_in_unit_range(synth):
    for seed in range(10):
        px = synth(seed, 24, 24).pixels
        assert px.min() >= 0.0 and px.max() <= 1.0


def test_different_seeds_give_different_images():
    for seed in range(0, 40, 2):
        a, b = synth_real(seed, 32, 32).pixels, synth_real(seed + 1, 32, 32).pixels
        assert np.mean(np.abs(a - b)) > 0.01


def test_sample_labels_and_sources():
    real, fake = synth_real(1, 8, 8), synth_fake(1, 8, 8)
    assert (real.label, real.source) == ("real", "native")
    assert (fake.label, fake.source) == ("fake", "upsampled")


@pytest.mark.parametrize("h,w", [(7, 8), (8, 9), (1, 2), (0, 0)])
def test_fake_needs_even_extents(h, w):
    with pytest.raises(ValueError):
        synth_fake(0, h, w)


def test_upsampled_field_is_constant_on_2x2_blocks():
    field = render_content(sample_rng(5), 8, 8)
    up = upsample_nearest(field)
    assert up.shape == (3, 16, 16)
    for dy in (0, 1):
        for dx in (0, 1):
            assert np.array_equal(up[:, dy::2, dx::2], field)


def test_fake_trace_is_periodic():
    # adjacent-pixel differences inside the replicated blocks are smaller than across them
    inner, across = [], []
    for seed in range(10):
        px = synth_fake(seed, 64, 64).pixels
        d = np.abs(np.diff(px, axis=2))
        inner.append(d[:, :, 0::2].mean())
        across.append(d[:, :, 1::2].mean())
    assert np.mean(inner) < np.mean(across)


def test_quantize_rounds_half_up_and_clamps():
    px = np.zeros((3, 1, 4))
    px[0, 0] = [0.5, 1.3, -0.2, 1.0]
    raw = quantize(px)
    assert raw.shape == (1, 4, 3) and raw.dtype == np.uint8
    assert raw[0, :, 0].tolist() == [128, 255, 0, 255]


def test_png_round_trip_is_idempotent(tmp_path):
    px = synth_real(3, 20, 12).pixels
    first = save_png(px, tmp_path / "a.png")
    loaded = load_png(first)
    assert loaded.shape == (3, 20, 12)
    assert np.max(np.abs(loaded - px)) <= 0.5 / 255 + 1e-12
    second = save_png(loaded, tmp_path / "b.png")
    assert first.read_bytes() == second.read_bytes()


def test_load_png_rejects_non_rgb(tmp_path):
    Image.new("L", (4, 4)).save(tmp_path / "gray.png")
    Image.new("RGBA", (4, 4)).save(tmp_path / "rgba.png")
    Image.fromarray(np.zeros((4, 4), dtype=np.uint16)).save(tmp_path / "deep.png")
    (tmp_path / "junk.png").write_bytes(b"not an image at all, just text")
    for name in ("gray.png", "rgba.png", "deep.png", "junk.png"):
        with pytest.raises(ValueError):
            load_png_uint8(tmp_path / name)


def test_load_png_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_png(tmp_path / "nope.png")


def test_random_crop_full_size_is_identity():
    img = np.random.default_rng(0).random((3, 16, 16))
    crop, offset = random_crop(img, 16, np.random.default_rng(1))
    assert offset == (0, 0) and np.array_equal(crop, img)


def test_random_crop_matches_source_window():
    img = np.random.default_rng(0).random((3, 40, 30))
    rng = np.random.default_rng(2)
    for _ in range(20):
        crop, (top, left) = random_crop(img, 12, rng)
        assert np.array_equal(crop, img[:, top:top + 12, left:left + 12])


def test_random_crop_offsets_cover_valid_positions():
    rng = np.random.default_rng(3)
    img = np.zeros((3, 128, 128))
    tops, lefts = set(), set()
    for _ in range(10_000):
        _, (top, left) = random_crop(img, 64, rng)
        assert 0 <= top <= 64 and 0 <= left <= 64
        tops.add(top)
        lefts.add(left)
    assert len(tops) >= 0.9 * 65 and len(lefts) >= 0.9 * 65


def test_random_crop_too_large():
    with pytest.raises(ValueError):
        random_crop(np.zeros((3, 10, 20)), 11, np.random.default_rng(0))


def test_default_desk_spec_sizes():
    defs = {d.name: d for d in split_defs(CorpusSpec())}
    assert {k: (d.count, d.size) for k, d in defs.items()} == {
        "d_real": (4000, 64), "d_fake": (4000, 64), "a_fake": (4000, 64),
        "eval_real": (500, 64), "eval_fake": (500, 64), "probe_fake": (200, 128),
    }


def test_corpus_spec_rejects_odd_sizes():
    with pytest.raises(ValueError):
        CorpusSpec(image_size=63)


def test_overlapping_splits_are_rejected():
    with pytest.raises(ValueError, match="overlap"):
        check_disjoint([SplitDef("a", "real", 10, 8, 0), SplitDef("b", "fake", 10, 8, 5)])
    with pytest.raises(ValueError, match="duplicate"):
        check_disjoint([SplitDef("a", "real", 1, 8, 0), SplitDef("a", "fake", 1, 8, 1)])


def test_build_corpus_rejects_overlapping_defs(tmp_path, tiny_spec):
    defs = [SplitDef("d_real", "real", 4, 8, 0), SplitDef("d_fake", "fake", 4, 8, 2)]
    with pytest.raises(ValueError):
        build_corpus(tiny_spec, tmp_path, progress=False, defs=defs)


def test_manifests_list_every_split(tiny_corpus, tiny_spec):
    expected = {"d_real": 12, "d_fake": 12, "a_fake": 6, "eval_real": 6, "eval_fake": 6, "probe_fake": 2}
    seeds = []
    for split, count in expected.items():
        manifest = tiny_corpus.manifest(split)
        assert list(manifest.columns) == MANIFEST_COLUMNS
        assert len(manifest) == count
        assert set(manifest["label"]) == {"real" if split.endswith("real") else "fake"}
        seeds.extend(manifest["seed"].tolist())
    assert len(set(seeds)) == len(seeds)
    assert tiny_corpus.images("probe_fake").shape == (2, 3, 128, 128)


def test_a_set_is_fake_only_and_disjoint_from_eval(tiny_corpus):
    a_seeds = set(tiny_corpus.manifest("a_fake")["seed"])
    eval_seeds = set(tiny_corpus.manifest("eval_fake")["seed"])
    assert a_seeds.isdisjoint(eval_seeds)
    assert set(tiny_corpus.manifest("a_fake")["source"]) == {"upsampled"}


def test_stored_images_match_regenerated_samples(tiny_corpus):
    row = tiny_corpus.manifest("eval_real").iloc[2]
    regenerated = quantize(synth_real(int(row["seed"]), 64, 64).pixels)
    assert np.array_equal(load_png_uint8(tiny_corpus.root / row["path"]), regenerated)


def test_rebuild_is_byte_identical(tmp_path, tiny_spec, tiny_corpus):
    again = build_corpus(tiny_spec, tmp_path / "again", progress=False)
    for split in tiny_corpus.splits:
        pd.testing.assert_frame_equal(tiny_corpus.manifest(split), again.manifest(split))
        for a, b in zip(tiny_corpus.paths(split), again.paths(split)):
            assert filecmp.cmp(a, b, shallow=False)
        assert filecmp.cmp(tiny_corpus.root / f"{split}.csv", again.root / f"{split}.csv", shallow=False)


def test_parallel_build_matches_serial(tmp_path):
    spec = CorpusSpec(master_seed=3, image_size=16, d_real=4, d_fake=4, a_fake=2, eval_real=2, eval_fake=2,
                      probe_count=0, probe_size=32)
    serial = build_corpus(spec, tmp_path / "serial", workers=1, progress=False)
    parallel = build_corpus(spec, tmp_path / "parallel", workers=2, progress=False)
    for split in serial.splits:
        for a, b in zip(serial.paths(split), parallel.paths(split)):
            assert a.read_bytes() == b.read_bytes()


def test_smaller_rebuild_leaves_no_stale_images(tmp_path):
    sizes = dict(master_seed=4, image_size=16, a_fake=2, eval_real=2, eval_fake=2, probe_size=32)
    build_corpus(CorpusSpec(d_real=5, d_fake=5, probe_count=2, **sizes), tmp_path, progress=False)
    (tmp_path / "d_real" / "notes.txt").write_text("left over")
    smaller = build_corpus(CorpusSpec(d_real=2, d_fake=3, probe_count=0, **sizes), tmp_path, progress=False)
    for split, count in [("d_real", 2), ("d_fake", 3), ("a_fake", 2)]:
        assert sorted(p.name for p in (tmp_path / split).iterdir()) == [f"{i:05d}.png" for i in range(count)]
        assert len(smaller.manifest(split)) == count
    assert not (tmp_path / "probe_fake").exists()
    assert smaller.images("probe_fake").shape[0] == 0


def test_labeled_stacks_real_as_one(tiny_corpus):
    images, labels = tiny_corpus.labeled(["d_real", "d_fake"])
    assert images.shape == (24, 3, 64, 64)
    assert labels.tolist() == [1] * 12 + [0] * 12
    assert tiny_corpus.images("d_real", np.float32).dtype == np.float32


def test_corpus_errors(tmp_path, tiny_corpus):
    with pytest.raises(FileNotFoundError):
        Corpus(tmp_path / "missing")
    with pytest.raises(KeyError):
        tiny_corpus.manifest("test_set")
