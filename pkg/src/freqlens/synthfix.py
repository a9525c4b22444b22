"""Deterministic synthetic fixtures with controlled spectral content.

Images are built in the frequency domain: seeded real noise is transformed,
each radial band is rescaled so band energies match a target profile, and
the result is transformed back and stretched to [-1, 1]. Identities share a
base spectrum; variants add profile-shaped noise on top, so genuine pairs
score high and imposter pairs near zero under any reasonable embedder.

Randomness comes from a fixed 64-bit generator (see :class:`SplitMix64`)
rather than a platform RNG, so the same seed yields the same fixture bytes
everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import PairList, PairRecord, _build_pair_list, write_pairs_csv
from .errors import InvalidConfigError
from .spectral import BandPartition, build_partition

IMAGE_SIZE = 112
CHANNELS = 3
VARIANT_NOISE = 0.35

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class SplitMix64:
    """Counter-based SplitMix64 stream.

    Output i is ``mix(seed + (i+1) * 0x9E3779B97F4A7C15)`` where ``mix(z)``
    is ``z ^= z>>30; z *= 0xBF58476D1CE4E5B9; z ^= z>>27;
    z *= 0x94D049BB133111EB; z ^= z>>31`` in wrapping 64-bit arithmetic.
    Doubles take the top 53 bits, giving values in [0, 1).
    """

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self._counter = 0

    def _block(self, count: int) -> np.ndarray:
        start = self._counter + 1
        self._counter += count
        index = np.arange(start, start + count, dtype=np.uint64)
        z = self._seed + index * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))

    def doubles(self, count: int) -> np.ndarray:
        return (self._block(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def signed(self, shape: tuple[int, ...]) -> np.ndarray:
        return (self.doubles(int(np.prod(shape))) * 2.0 - 1.0).reshape(shape)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one group's synthetic images and pairs."""

    seed: int
    group_name: str
    band_profile: tuple[float, ...]
    num_identities: int = 4
    pairs_per_label: int = 8
    band_size: float = 4.0


def _validate(spec: SyntheticSpec, partition: BandPartition) -> np.ndarray:
    profile = np.asarray(spec.band_profile, dtype=np.float64)
    if profile.size != partition.num_bands:
        raise InvalidConfigError(
            f"band_profile has {profile.size} entries but the partition has "
            f"{partition.num_bands} bands"
        )
    if not np.isfinite(profile).all() or (profile < 0).any():
        raise InvalidConfigError("band_profile entries must be finite and non-negative")
    if not (profile > 0).any():
        raise InvalidConfigError("band_profile needs at least one positive entry")
    if spec.num_identities < 2:
        raise InvalidConfigError("need at least 2 identities to form imposter pairs")
    if spec.pairs_per_label < 1:
        raise InvalidConfigError("pairs_per_label must be at least 1")
    return profile


def _shaped_spectrum(
    rng: SplitMix64, partition: BandPartition, profile: np.ndarray
) -> np.ndarray:
    """Spectrum of fresh real noise, rescaled so band energies match the profile."""
    noise = rng.signed((partition.height, partition.width, CHANNELS))
    spectrum = np.fft.fftshift(np.fft.fft2(noise, axes=(0, 1)), axes=(0, 1))
    power = (spectrum.real**2 + spectrum.imag**2).sum(axis=2)
    energy = np.bincount(
        partition.band_index_map.ravel(), weights=power.ravel(), minlength=partition.num_bands
    )
    factor = np.zeros(partition.num_bands)
    positive = (profile > 0) & (energy > 0)
    factor[positive] = np.sqrt(profile[positive] / energy[positive])
    return spectrum * factor[partition.band_index_map][:, :, np.newaxis]


def _to_png_array(spectrum: np.ndarray) -> np.ndarray:
    image = np.fft.ifft2(np.fft.ifftshift(spectrum, axes=(0, 1)), axes=(0, 1)).real
    peak = np.abs(image).max()
    if peak > 0:
        image = image / peak
    quantized = np.clip(np.round((image + 1.0) * 127.5), 0, 255)
    return quantized.astype(np.uint8)


def generate_fixture(spec: SyntheticSpec, out_dir: str | Path) -> PairList:
    """Synthesize one group's images and pair list under ``out_dir``.

    Images land in ``out_dir/<group>/`` as 8-bit PNGs; a conforming pair CSV
    is written to ``out_dir/<group>.csv`` with paths relative to ``out_dir``.
    Identical specs produce identical bytes.
    """
    out_dir = Path(out_dir)
    partition = build_partition(IMAGE_SIZE, IMAGE_SIZE, spec.band_size)
    profile = _validate(spec, partition)
    image_dir = out_dir / spec.group_name
    image_dir.mkdir(parents=True, exist_ok=True)

    rng = SplitMix64(spec.seed)
    identity_spectra = [
        _shaped_spectrum(rng, partition, profile) for _ in range(spec.num_identities)
    ]
    variant_counts = [0] * spec.num_identities

    def new_variant(identity: int) -> str:
        spectrum = identity_spectra[identity] + VARIANT_NOISE * _shaped_spectrum(
            rng, partition, profile
        )
        name = f"{spec.group_name}_{identity:02d}_{variant_counts[identity]:03d}.png"
        variant_counts[identity] += 1
        Image.fromarray(_to_png_array(spectrum), mode="RGB").save(image_dir / name)
        return f"{spec.group_name}/{name}"

    records = []
    for k in range(spec.pairs_per_label):
        identity = k % spec.num_identities
        records.append(
            PairRecord(
                pair_id=len(records),
                probe_path=new_variant(identity),
                reference_path=new_variant(identity),
                label="genuine",
                group=spec.group_name,
            )
        )
    for k in range(spec.pairs_per_label):
        first = k % spec.num_identities
        second = (k + 1) % spec.num_identities
        records.append(
            PairRecord(
                pair_id=len(records),
                probe_path=new_variant(first),
                reference_path=new_variant(second),
                label="imposter",
                group=spec.group_name,
            )
        )
    pair_list = _build_pair_list(records)
    write_pairs_csv(pair_list.records, out_dir / f"{spec.group_name}.csv")
    return pair_list


def merge_fixtures(pair_lists: list[PairList], out_dir: str | Path) -> PairList:
    """Concatenate several group fixtures into ``out_dir/pairs.csv``."""
    records = []
    for pair_list in pair_lists:
        for record in pair_list.records:
            records.append(
                PairRecord(
                    pair_id=len(records),
                    probe_path=record.probe_path,
                    reference_path=record.reference_path,
                    label=record.label,
                    group=record.group,
                )
            )
    merged = _build_pair_list(records)
    write_pairs_csv(merged.records, Path(out_dir) / "pairs.csv")
    return merged
