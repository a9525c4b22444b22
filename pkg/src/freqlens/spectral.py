"""2-D spectra, radial band partitions, and band masking of images.

All spectral math runs in 64-bit floats/complex. Spectra are stored
center-shifted: the DC coefficient sits at index ``(H//2, W//2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError, SymmetryViolationError

_SHIFT_AXES = (0, 1)


@dataclass(frozen=True)
class SpatialImage:
    """A real-valued H×W×C image tensor.

    Canonical pipeline images are 112×112×3 with values in [-1, 1], but any
    finite values are accepted: masked reconstructions may leave that range
    and are deliberately not clamped (clamping would leak energy back into
    the masked band).
    """

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim == 2:
            pixels = pixels[:, :, np.newaxis]
        if pixels.ndim != 3:
            raise InvalidInputError(f"image must be H×W×C, got shape {pixels.shape}")
        h, w, c = pixels.shape
        if h < 2 or w < 2:
            raise InvalidInputError(f"image must be at least 2×2, got {h}×{w}")
        if c not in (1, 3):
            raise InvalidInputError(f"image must have 1 or 3 channels, got {c}")
        if not np.isfinite(pixels).all():
            raise InvalidInputError("image contains non-finite pixel values")
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class Spectrum:
    """Center-shifted complex coefficients of a per-channel 2-D DFT."""

    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=np.complex128)
        if coeffs.ndim == 2:
            coeffs = coeffs[:, :, np.newaxis]
        if coeffs.ndim != 3:
            raise InvalidInputError(f"spectrum must be H×W×C, got shape {coeffs.shape}")
        if coeffs.shape[0] < 2 or coeffs.shape[1] < 2:
            raise InvalidInputError("spectrum must be at least 2×2")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def height(self) -> int:
        return self.coefficients.shape[0]

    @property
    def width(self) -> int:
        return self.coefficients.shape[1]

    @property
    def channels(self) -> int:
        return self.coefficients.shape[2]


@dataclass(frozen=True)
class BandPartition:
    """Disjoint radial bands of width ``band_size`` over a shifted H×W grid.

    Coordinate (u, v) belongs to band ``floor(r / band_size)`` where r is its
    Euclidean distance from the DC index. Bands jointly cover the grid,
    including the corners beyond the inscribed circle. Immutable and safe to
    share across workers.
    """

    height: int
    width: int
    band_size: float
    num_bands: int
    band_index_map: np.ndarray

    def __post_init__(self):
        self.band_index_map.setflags(write=False)


@dataclass(frozen=True)
class BandMask:
    """Selects one band of a partition for removal."""

    partition: BandPartition
    band: int

    def __post_init__(self):
        if not 0 <= self.band < self.partition.num_bands:
            raise InvalidInputError(
                f"band {self.band} out of range [0, {self.partition.num_bands})"
            )


def forward_dft(image: SpatialImage) -> Spectrum:
    """Per-channel 2-D DFT of an image, center-shifted."""
    coeffs = np.fft.fft2(image.pixels, axes=_SHIFT_AXES)
    return Spectrum(np.fft.fftshift(coeffs, axes=_SHIFT_AXES))


def inverse_dft(spectrum: Spectrum) -> SpatialImage:
    """Per-channel inverse DFT of a center-shifted spectrum.

    The imaginary residue is discarded after checking it is negligible;
    a spectrum that is not conjugate-symmetric (up to tolerance) raises
    :class:`SymmetryViolationError`.
    """
    coeffs = np.fft.ifftshift(spectrum.coefficients, axes=_SHIFT_AXES)
    recon = np.fft.ifft2(coeffs, axes=_SHIFT_AXES)
    real = recon.real
    residue = np.abs(recon.imag).max()
    tolerance = 1e-6 * max(1.0, float(np.abs(real).max()))
    if residue > tolerance:
        raise SymmetryViolationError(
            f"imaginary residue {residue:.3e} exceeds tolerance {tolerance:.3e}; "
            "spectrum is not conjugate-symmetric"
        )
    return SpatialImage(real.copy())


def build_partition(height: int, width: int, band_size: float) -> BandPartition:
    """Partition the shifted H×W frequency grid into radial bands of width s."""
    if band_size <= 0:
        raise InvalidConfigError(f"band_size must be positive, got {band_size}")
    if height < 2 or width < 2:
        raise InvalidConfigError(f"grid must be at least 2×2, got {height}×{width}")
    cy, cx = height // 2, width // 2
    du = np.arange(height, dtype=np.float64) - cy
    dv = np.arange(width, dtype=np.float64) - cx
    radius = np.hypot(du[:, np.newaxis], dv[np.newaxis, :])
    band_map = np.floor(radius / band_size).astype(np.int64)
    return BandPartition(
        height=height,
        width=width,
        band_size=float(band_size),
        num_bands=int(band_map.max()) + 1,
        band_index_map=band_map,
    )


def reconstruct_without_band(
    spectrum: Spectrum, partition: BandPartition, band: int
) -> SpatialImage:
    """Inverse-transform a spectrum with one band zeroed across all channels.

    This is the spectrum-reuse form of :func:`mask_band`: callers that mask
    the same image at many bands can transform once and reconstruct per band.
    """
    if (spectrum.height, spectrum.width) != (partition.height, partition.width):
        raise InvalidInputError(
            f"spectrum is {spectrum.height}×{spectrum.width} but partition covers "
            f"{partition.height}×{partition.width}"
        )
    if not 0 <= band < partition.num_bands:
        raise InvalidInputError(f"band {band} out of range [0, {partition.num_bands})")
    masked = spectrum.coefficients.copy()
    masked[partition.band_index_map == band, :] = 0.0
    return inverse_dft(Spectrum(masked))


def mask_band(image: SpatialImage, mask: BandMask) -> SpatialImage:
    """Remove one frequency band from an image.

    The image is transformed, the band's coefficients are zeroed jointly for
    all channels, and the result is transformed back. Output energy in the
    masked band is zero; all other bands are untouched.
    """
    partition = mask.partition
    if (image.height, image.width) != (partition.height, partition.width):
        raise InvalidInputError(
            f"image is {image.height}×{image.width} but partition covers "
            f"{partition.height}×{partition.width}"
        )
    return reconstruct_without_band(forward_dft(image), partition, mask.band)


def band_energy(spectrum: Spectrum, partition: BandPartition) -> np.ndarray:
    """Spectral energy per band, summed over channels.

    Entry b is the sum of |coefficient|² over the band's coordinates; the
    vector totals the full spectral energy because bands cover the grid.
    """
    if (spectrum.height, spectrum.width) != (partition.height, partition.width):
        raise InvalidInputError(
            f"spectrum is {spectrum.height}×{spectrum.width} but partition covers "
            f"{partition.height}×{partition.width}"
        )
    power = (spectrum.coefficients.real**2 + spectrum.coefficients.imag**2).sum(axis=2)
    return np.bincount(
        partition.band_index_map.ravel(),
        weights=power.ravel(),
        minlength=partition.num_bands,
    )
