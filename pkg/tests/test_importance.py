from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqlens import (
    BackendDescriptor,
    PairRecord,
    ReferenceEmbedder,
    SpatialImage,
    build_partition,
    explain_pair,
    explain_pairs,
    forward_dft,
    normalize,
    raw_importance,
    reconstruct_without_band,
)
from freqlens.embedder import pixel_hash
from freqlens.errors import InvalidInputError, PairProcessingError

from conftest import random_image, save_png, write_pairs_file
from oracles import naive_pair_importance


class HashTableBackend:
    """Maps exact pixel tensors to preset embeddings; unknowns get a default."""

    def __init__(self, table: dict[str, np.ndarray], default: np.ndarray):
        self.table = table
        self.default = default

    def embed(self, image: SpatialImage) -> np.ndarray:
        return self.table.get(pixel_hash(image), self.default)


class TestRawImportance:
    def test_band_without_energy_has_zero_importance(self, rng):
        # band-limit both images by removing band 2, then ask about band 2
        partition = build_partition(16, 16, 2.0)
        probe = reconstruct_without_band(forward_dft(random_image(rng, 16, 16, 3)), partition, 2)
        reference = reconstruct_without_band(
            forward_dft(random_image(rng, 16, 16, 3)), partition, 2
        )
        _, deltas = raw_importance(probe, reference, partition, ReferenceEmbedder(block_size=4))
        assert deltas[2] <= 1e-6

    def test_delta_is_base_minus_masked(self, rng):
        # stub the model: base pair scores 0.9, the band-1-masked pair 0.7
        partition = build_partition(8, 8, 2.0)
        probe = random_image(rng, 8, 8, 1)
        reference = random_image(rng, 8, 8, 1)
        masked_probe = reconstruct_without_band(forward_dft(probe), partition, 1)
        masked_reference = reconstruct_without_band(forward_dft(reference), partition, 1)
        angle_base = np.arccos(0.9)
        angle_masked = np.arccos(0.7)
        table = {
            pixel_hash(probe): np.array([1.0, 0.0]),
            pixel_hash(reference): np.array([np.cos(angle_base), np.sin(angle_base)]),
            pixel_hash(masked_probe): np.array([1.0, 0.0]),
            pixel_hash(masked_reference): np.array(
                [np.cos(angle_masked), np.sin(angle_masked)]
            ),
        }
        backend = HashTableBackend(table, default=np.array([1.0, 0.0]))
        base, deltas = raw_importance(probe, reference, partition, backend)
        assert base == pytest.approx(0.9, abs=1e-12)
        assert deltas[1] == pytest.approx(0.2, abs=1e-12)

    def test_matches_end_to_end_brute_force_oracle(self, rng):
        probe = random_image(rng, 16, 16, 3)
        reference = random_image(rng, 16, 16, 3)
        partition = build_partition(16, 16, 2.0)
        base, deltas = raw_importance(probe, reference, partition, ReferenceEmbedder(block_size=8))
        oracle_base, oracle_deltas = naive_pair_importance(
            probe.pixels, reference.pixels, 2.0, 8
        )
        assert base == pytest.approx(oracle_base, abs=1e-6)
        assert np.abs(deltas - oracle_deltas).max() < 1e-6

    def test_non_negative_by_construction(self, rng):
        partition = build_partition(16, 16, 2.0)
        _, deltas = raw_importance(
            random_image(rng, 16, 16, 3),
            random_image(rng, 16, 16, 3),
            partition,
            ReferenceEmbedder(block_size=4),
        )
        assert (deltas >= 0).all()

    def test_dimension_mismatch(self, rng):
        partition = build_partition(8, 8, 2.0)
        with pytest.raises(InvalidInputError):
            raw_importance(
                random_image(rng, 16, 16, 3),
                random_image(rng, 16, 16, 3),
                partition,
                ReferenceEmbedder(),
            )


class TestNormalize:
    def test_uniform_input(self):
        assert np.allclose(normalize(np.full(4, 0.2)), 0.25)

    def test_sum_normalization(self):
        assert np.allclose(normalize(np.array([1.0, 3.0])), [0.25, 0.75])

    def test_zero_entry_passes_through(self):
        # limit of the min-division composition as min -> 0
        assert np.allclose(normalize(np.array([0.0, 1.0, 3.0])), [0.0, 0.25, 0.75])

    def test_min_division_identity(self, rng):
        # (h/m) / sum(h/m) == h / sum(h) for any positive divisor m
        h = rng.uniform(0.1, 2.0, size=12)
        divided = h / h.min()
        assert np.allclose(divided / divided.sum(), normalize(h), atol=1e-12)

    def test_all_zero_gives_uniform(self):
        assert np.allclose(normalize(np.zeros(8)), 1 / 8)

    def test_sums_to_one(self, rng):
        result = normalize(rng.uniform(0, 5, size=20))
        assert result.sum() == pytest.approx(1.0, abs=1e-9)
        assert (result >= 0).all()

    @given(st.floats(min_value=1e-6, max_value=1e6), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_scale_equivariance(self, scale, seed):
        h = np.random.default_rng(seed).uniform(0, 1, size=10)
        assert np.abs(normalize(scale * h) - normalize(h)).max() <= 1e-9

    def test_rejects_negative(self):
        with pytest.raises(InvalidInputError):
            normalize(np.array([0.1, -0.2]))

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            normalize(np.array([0.1, np.inf]))


def make_pair_fixture(tmp_path, rng, *, num_pairs=2, size=16):
    """Write PNG pairs plus a CSV; returns (records, images_root, partition)."""
    images = tmp_path / "images"
    images.mkdir(exist_ok=True)
    rows = []
    for i in range(num_pairs):
        for side in ("p", "r"):
            array = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
            save_png(images / f"{side}{i}.png", array)
        label = "genuine" if i % 2 == 0 else "imposter"
        group = "alpha" if i % 2 == 0 else "beta"
        rows.append(f"p{i}.png,r{i}.png,{label},{group}")
    csv_path = tmp_path / "pairs.csv"
    write_pairs_file(csv_path, rows)
    from freqlens import load_pairs

    records = load_pairs(csv_path).records
    partition = build_partition(size, size, 2.0)
    return records, images, partition


class TestExplainPair:
    def test_identical_images_have_base_similarity_one(self, tmp_path, rng):
        images = tmp_path
        array = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
        save_png(images / "same.png", array)
        record = PairRecord(0, "same.png", "same.png", "genuine", "alpha")
        partition = build_partition(16, 16, 2.0)
        explanation = explain_pair(record, partition, ReferenceEmbedder(block_size=4), images)
        assert explanation.base_similarity == 1.0

    def test_constant_pair_is_degenerate_uniform(self, tmp_path):
        save_png(tmp_path / "const.png", np.full((16, 16, 3), 77, dtype=np.uint8))
        record = PairRecord(0, "const.png", "const.png", "genuine", "alpha")
        partition = build_partition(16, 16, 2.0)
        explanation = explain_pair(record, partition, ReferenceEmbedder(block_size=4), tmp_path)
        assert explanation.base_similarity == 0.0
        assert np.all(explanation.importance.raw == 0)
        assert np.allclose(explanation.importance.normalized, 1 / partition.num_bands)

    def test_normalized_sums_to_one(self, tmp_path, rng):
        records, images, partition = make_pair_fixture(tmp_path, rng)
        explanation = explain_pair(records[0], partition, ReferenceEmbedder(block_size=4), images)
        assert explanation.importance.normalized.sum() == pytest.approx(1.0, abs=1e-9)

    def test_missing_image_tagged_with_pair_id(self, tmp_path):
        record = PairRecord(7, "nope.png", "nope.png", "genuine", "alpha")
        partition = build_partition(16, 16, 2.0)
        with pytest.raises(PairProcessingError, match="pair 7") as info:
            explain_pair(record, partition, ReferenceEmbedder(block_size=4), tmp_path)
        assert info.value.pair_id == 7
        assert "nope.png" in str(info.value)

    def test_deterministic(self, tmp_path, rng):
        records, images, partition = make_pair_fixture(tmp_path, rng)
        backend = ReferenceEmbedder(block_size=4)
        first = explain_pair(records[0], partition, backend, images)
        second = explain_pair(records[0], partition, backend, images)
        assert np.array_equal(first.importance.raw, second.importance.raw)


class TestExplainPairs:
    def test_parallel_matches_serial_bitwise(self, tmp_path, rng):
        records, images, partition = make_pair_fixture(tmp_path, rng, num_pairs=6)
        descriptor = BackendDescriptor("reference")
        serial = explain_pairs(records, partition, descriptor, images, workers=1)
        parallel = explain_pairs(records, partition, descriptor, images, workers=2)
        assert [e.pair_id for e in serial] == [e.pair_id for e in parallel]
        for a, b in zip(serial, parallel):
            assert np.array_equal(a.importance.raw, b.importance.raw)
            assert a.base_similarity == b.base_similarity

    def test_results_in_pair_id_order_even_if_input_shuffled(self, tmp_path, rng):
        records, images, partition = make_pair_fixture(tmp_path, rng, num_pairs=4)
        shuffled = [records[2], records[0], records[3], records[1]]
        result = explain_pairs(shuffled, partition, BackendDescriptor("reference"), images)
        assert [e.pair_id for e in result] == [0, 1, 2, 3]

    def test_progress_callback_sees_total(self, tmp_path, rng):
        records, images, partition = make_pair_fixture(tmp_path, rng, num_pairs=3)
        seen = []
        explain_pairs(
            records,
            partition,
            BackendDescriptor("reference"),
            images,
            progress=lambda done, total: seen.append((done, total)),
        )
        assert seen == [(1, 3), (2, 3), (3, 3)]

    def test_subprocess_backend_thread_pool(self, tmp_path, rng):
        import shlex
        import sys
        from pathlib import Path

        records, images, partition = make_pair_fixture(tmp_path, rng, num_pairs=4)
        child = Path(__file__).parent / "child_backend.py"
        # no --scramble: explain_pair interleaves sends and waits, so the
        # child must answer each request without waiting for the next one
        command = f"{shlex.quote(sys.executable)} {shlex.quote(str(child))} --dim 4"
        descriptor = BackendDescriptor("subprocess", command)
        threaded = explain_pairs(records, partition, descriptor, images, workers=3)
        serial = explain_pairs(records, partition, descriptor, images, workers=1)
        assert [e.pair_id for e in threaded] == [0, 1, 2, 3]
        for a, b in zip(serial, threaded):
            assert a.base_similarity == b.base_similarity
            assert np.array_equal(a.importance.raw, b.importance.raw)
