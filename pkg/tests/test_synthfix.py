from __future__ import annotations

import numpy as np
import pytest

from freqlens import (
    SpatialImage,
    SplitMix64,
    SyntheticSpec,
    band_energy,
    build_partition,
    forward_dft,
    generate_fixture,
    load_image,
    load_pairs,
    merge_fixtures,
)
from freqlens.errors import InvalidConfigError


def scalar_splitmix64(seed: int, count: int) -> list[int]:
    """Independent reference: the textbook sequential form with Python ints."""
    mask = (1 << 64) - 1
    state = seed & mask
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out


def profile(num_bands, active):
    weights = [0.0] * num_bands
    for band in active:
        weights[band] = 1.0
    return tuple(weights)


class TestSplitMix64:
    def test_matches_scalar_reference(self):
        rng = SplitMix64(42)
        vectorized = rng._block(10).tolist()
        assert vectorized == scalar_splitmix64(42, 10)

    def test_stream_is_continuous_across_calls(self):
        one = SplitMix64(7)
        chunks = np.concatenate([one._block(3), one._block(5)])
        other = SplitMix64(7)
        assert np.array_equal(chunks, other._block(8))

    def test_doubles_in_unit_interval(self):
        values = SplitMix64(3).doubles(1000)
        assert (values >= 0).all() and (values < 1).all()

    def test_signed_in_range(self):
        values = SplitMix64(3).signed((8, 8, 3))
        assert values.shape == (8, 8, 3)
        assert (np.abs(values) <= 1).all()


class TestGenerateFixture:
    def test_energy_concentrates_in_profiled_band(self, tmp_path):
        partition = build_partition(112, 112, 4.0)
        spec = SyntheticSpec(
            seed=11,
            group_name="narrow",
            band_profile=profile(partition.num_bands, [1]),
            num_identities=2,
            pairs_per_label=1,
        )
        pairs = generate_fixture(spec, tmp_path)
        for record in pairs.records:
            image = load_image(tmp_path / record.probe_path)
            energy = band_energy(forward_dft(image), partition)
            assert energy[1] / energy.sum() >= 0.95

    def test_same_seed_gives_identical_bytes(self, tmp_path):
        spec = SyntheticSpec(
            seed=5,
            group_name="g",
            band_profile=profile(20, [2, 3]),
            num_identities=2,
            pairs_per_label=2,
        )
        first_dir = tmp_path / "first"
        second_dir = tmp_path / "second"
        generate_fixture(spec, first_dir)
        generate_fixture(spec, second_dir)
        first_files = sorted(p.relative_to(first_dir) for p in first_dir.rglob("*") if p.is_file())
        second_files = sorted(p.relative_to(second_dir) for p in second_dir.rglob("*") if p.is_file())
        assert first_files == second_files
        for rel in first_files:
            assert (first_dir / rel).read_bytes() == (second_dir / rel).read_bytes()

    def test_images_are_canonical_shape_and_range(self, tmp_path):
        spec = SyntheticSpec(
            seed=9,
            group_name="g",
            band_profile=profile(20, [1, 2]),
            num_identities=2,
            pairs_per_label=1,
        )
        pairs = generate_fixture(spec, tmp_path)
        record = pairs.records[0]
        image = load_image(tmp_path / record.probe_path, expected=(112, 112))
        assert image.pixels.shape == (112, 112, 3)
        assert image.pixels.min() >= -1.0 and image.pixels.max() <= 1.0

    def test_pair_structure(self, tmp_path):
        spec = SyntheticSpec(
            seed=3,
            group_name="g",
            band_profile=profile(20, [1]),
            num_identities=3,
            pairs_per_label=4,
        )
        pairs = generate_fixture(spec, tmp_path)
        assert len(pairs.records) == 8
        labels = [r.label for r in pairs.records]
        assert labels == ["genuine"] * 4 + ["imposter"] * 4
        assert pairs.groups == ("g",)
        # genuine pairs use two distinct variants, never the same file
        for record in pairs.records[:4]:
            assert record.probe_path != record.reference_path

    def test_csv_loads_back(self, tmp_path):
        spec = SyntheticSpec(
            seed=4,
            group_name="g",
            band_profile=profile(20, [1]),
            num_identities=2,
            pairs_per_label=2,
        )
        generated = generate_fixture(spec, tmp_path)
        loaded = load_pairs(tmp_path / "g.csv")
        assert loaded == generated

    def test_profile_validation(self, tmp_path):
        with pytest.raises(InvalidConfigError):
            generate_fixture(
                SyntheticSpec(seed=1, group_name="g", band_profile=(0.0,) * 20), tmp_path
            )
        with pytest.raises(InvalidConfigError):
            generate_fixture(
                SyntheticSpec(seed=1, group_name="g", band_profile=(1.0,) * 3), tmp_path
            )

    def test_genuine_pairs_score_higher_than_imposters(self, tmp_path):
        from freqlens import ReferenceEmbedder, similarity

        spec = SyntheticSpec(
            seed=21,
            group_name="g",
            band_profile=profile(20, [1, 2]),
            num_identities=3,
            pairs_per_label=6,
        )
        pairs = generate_fixture(spec, tmp_path)
        backend = ReferenceEmbedder()
        scores = {"genuine": [], "imposter": []}
        for record in pairs.records:
            probe = load_image(tmp_path / record.probe_path)
            reference = load_image(tmp_path / record.reference_path)
            scores[record.label].append(similarity(backend.embed(probe), backend.embed(reference)))
        assert min(scores["genuine"]) > max(scores["imposter"])


class TestMergeFixtures:
    def test_merged_csv_has_all_groups(self, tmp_path):
        lists = []
        for index, name in enumerate(("low", "high")):
            lists.append(
                generate_fixture(
                    SyntheticSpec(
                        seed=index + 1,
                        group_name=name,
                        band_profile=profile(20, [1 + index * 7]),
                        num_identities=2,
                        pairs_per_label=2,
                    ),
                    tmp_path,
                )
            )
        merged = merge_fixtures(lists, tmp_path)
        assert merged.groups == ("low", "high")
        assert len(merged.records) == 8
        assert [r.pair_id for r in merged.records] == list(range(8))
        reloaded = load_pairs(tmp_path / "pairs.csv")
        assert reloaded == merged
