"""Mixing augmentations: Beta-drawn mixing ratios, CutMix boxes, Fourier
masks, and saliency-guided boxes, plus the pixel/label blend itself.

Masks are uint8 arrays of shape (H, W) where 1 keeps the pixel from the
first image and 0 takes it from the second.  Whatever the method, the
effective mixing ratio is recomputed from the realized mask (fraction of
ones) and that value, not the drawn lambda, weights the labels.  All
randomness flows through an explicit SeedStream, so a seed fully
determines a mix.
"""

import io
import math
from dataclasses import dataclass

import numpy as np

from ._util import atomic_write_bytes
from .errors import ValidationError

DEFAULT_ALPHA = 0.2
DEFAULT_DECAY = 3.0

METHOD_CUTMIX = "cutmix"
METHOD_FMIX = "fmix"
METHOD_SALIENCYMIX = "saliencymix"
METHODS = (METHOD_CUTMIX, METHOD_FMIX, METHOD_SALIENCYMIX)


@dataclass(frozen=True)
class MixResult:
    """One realized mix: blended image, mixed label, and provenance."""

    image: np.ndarray
    label: np.ndarray
    mask: np.ndarray
    method: str
    lam: float
    lam_eff: float
    box: tuple = None


def check_image(image, name="image"):
    """Validate an (H, W, C) float image in [0, 1] and return it as float64."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValidationError(
            f"{name} must have shape (H, W, C) with C in (1, 3), got {arr.shape}"
        )
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"{name} has empty spatial extent: {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name} contains NaN or Inf")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValidationError(f"{name} values must lie in [0, 1]")
    return arr


def check_label(label, name="label"):
    """Validate a probability vector and return it as float64."""
    vec = np.asarray(label, dtype=np.float64).reshape(-1)
    if vec.shape[0] == 0:
        raise ValidationError(f"{name} is empty")
    if not np.isfinite(vec).all():
        raise ValidationError(f"{name} contains NaN or Inf")
    if (vec < 0.0).any():
        raise ValidationError(f"{name} has negative entries")
    total = float(vec.sum())
    if abs(total - 1.0) > 1e-6:
        raise ValidationError(f"{name} sums to {total!r}, not 1")
    return vec


def sample_lambda(alpha, stream):
    """Draw a mixing ratio from Beta(alpha, alpha)."""
    if not alpha > 0.0:
        raise ValidationError(f"alpha must be positive, got {alpha!r}")
    return stream.beta(float(alpha), float(alpha))


def cutmix_box_at(height, width, lam, center_y, center_x):
    """CutMix box of area ratio (1 - lam) centered at a given pixel.

    The side lengths are ``round(side * sqrt(1 - lam))`` with half-even
    rounding; the box is then clipped to the image, so the realized area
    can be smaller than requested near the border.  Returns
    ``(x0, y0, x1, y1)`` with half-open extents.
    """
    if height < 1 or width < 1:
        raise ValidationError(f"image extent must be positive, got {height}x{width}")
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must lie in [0, 1], got {lam!r}")
    if not (0 <= center_y < height and 0 <= center_x < width):
        raise ValidationError(
            f"center ({center_y}, {center_x}) outside {height}x{width} image"
        )
    ratio = math.sqrt(1.0 - lam)
    cut_h = int(round(height * ratio))
    cut_w = int(round(width * ratio))
    y0 = center_y - cut_h // 2
    x0 = center_x - cut_w // 2
    y1 = min(height, y0 + cut_h)
    x1 = min(width, x0 + cut_w)
    return (max(0, x0), max(0, y0), x1, y1)


def cutmix_box(height, width, lam, stream):
    """CutMix box around a uniformly drawn center (row drawn first)."""
    center_y = stream.randbelow(height)
    center_x = stream.randbelow(width)
    return cutmix_box_at(height, width, lam, center_y, center_x)


def mask_from_box(height, width, box):
    """Mask that is 0 inside the box and 1 elsewhere."""
    x0, y0, x1, y1 = box
    if not (0 <= x0 <= x1 <= width and 0 <= y0 <= y1 <= height):
        raise ValidationError(f"box {box} does not fit a {height}x{width} image")
    mask = np.ones((height, width), dtype=np.uint8)
    mask[y0:y1, x0:x1] = 0
    return mask


def fmix_mask(height, width, lam, stream, decay=DEFAULT_DECAY):
    """Low-frequency Fourier mask with exactly round(lam * H * W) ones.

    A complex Gaussian spectrum (real/imaginary pairs drawn row-major
    from the stream) is attenuated by ``1 / max(f, f_floor) ** decay``
    with ``f_floor = 1 / max(H, W)``, inverted, and thresholded by rank:
    the top-k field values become ones, ties resolving to the lowest
    flat index.  The ones count is exact, so ``lam_eff`` differs from
    ``lam`` only by quantization.
    """
    if height < 1 or width < 1:
        raise ValidationError(f"image extent must be positive, got {height}x{width}")
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must lie in [0, 1], got {lam!r}")
    if not decay > 0.0:
        raise ValidationError(f"decay must be positive, got {decay!r}")
    area = height * width
    ones = int(np.rint(lam * area))
    mask = np.zeros((height, width), dtype=np.uint8)
    if ones <= 0:
        return mask
    if ones >= area:
        mask[:] = 1
        return mask
    noise = stream.normals(2 * area)
    spectrum = noise[0::2].reshape(height, width) + 1j * noise[1::2].reshape(height, width)
    freq_y = np.fft.fftfreq(height)[:, None]
    freq_x = np.fft.fftfreq(width)[None, :]
    freq = np.sqrt(freq_x * freq_x + freq_y * freq_y)
    attenuation = 1.0 / np.maximum(freq, 1.0 / max(height, width)) ** float(decay)
    field = np.fft.ifft2(spectrum * attenuation).real
    order = np.argsort(-field.ravel(), kind="stable")
    flat = mask.ravel()
    flat[order[:ones]] = 1
    return mask


def _box_mean(values, radius):
    """Mean over a (2r+1)^2 window clipped to the array bounds."""
    h, w = values.shape
    summed = np.zeros((h + 1, w + 1), dtype=np.float64)
    summed[1:, 1:] = np.cumsum(np.cumsum(values, axis=0), axis=1)
    row_lo = np.clip(np.arange(h) - radius, 0, h)
    row_hi = np.clip(np.arange(h) + radius + 1, 0, h)
    col_lo = np.clip(np.arange(w) - radius, 0, w)
    col_hi = np.clip(np.arange(w) + radius + 1, 0, w)
    totals = (
        summed[row_hi][:, col_hi]
        - summed[row_lo][:, col_hi]
        - summed[row_hi][:, col_lo]
        + summed[row_lo][:, col_lo]
    )
    counts = (row_hi - row_lo)[:, None] * (col_hi - col_lo)[None, :]
    return totals / counts


def saliency_peak(image):
    """Most salient pixel of an image by the spectral-residual method.

    Channels are averaged to gray; the residual of the log-amplitude
    spectrum against its 3x3 local mean is recombined with the original
    phase, inverted, squared, and smoothed with a radius-3 box filter.
    Returns the (row, col) of the first maximum in row-major order, so a
    constant image yields (0, 0).
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3:
        gray = arr.mean(axis=2)
    elif arr.ndim == 2:
        gray = arr
    else:
        raise ValidationError(f"saliency input must be 2-D or 3-D, got shape {arr.shape}")
    if gray.shape[0] < 1 or gray.shape[1] < 1:
        raise ValidationError(f"saliency input has empty extent: {gray.shape}")
    if not np.isfinite(gray).all():
        raise ValidationError("saliency input contains NaN or Inf")
    spectrum = np.fft.fft2(gray)
    amplitude = np.abs(spectrum)
    log_amplitude = np.log(amplitude + 1e-12)
    residual = log_amplitude - _box_mean(log_amplitude, 1)
    recombined = np.exp(residual) * np.exp(1j * np.angle(spectrum))
    saliency = np.abs(np.fft.ifft2(recombined)) ** 2
    smoothed = _box_mean(saliency, 3)
    peak = int(np.argmax(smoothed))
    width = gray.shape[1]
    return (peak // width, peak % width)


def make_mix(method, image_a, image_b, label_a, label_b, stream,
             alpha=DEFAULT_ALPHA, decay=DEFAULT_DECAY):
    """Mix two images and their labels with the chosen mask method.

    The mask keeps ``image_a`` where it is 1 and takes ``image_b`` where
    it is 0 (for box methods the patch comes from ``image_b``, whose
    saliency also guides the saliencymix box).  Labels are combined with
    the realized ratio: ``lam_eff * label_a + (1 - lam_eff) * label_b``
    where ``lam_eff`` is the fraction of ones in the mask; the two
    coefficients sum to 1 exactly.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; choose from {METHODS}")
    x_a = check_image(image_a, "image_a")
    x_b = check_image(image_b, "image_b")
    if x_a.shape != x_b.shape:
        raise ValidationError(f"image shapes differ: {x_a.shape} vs {x_b.shape}")
    y_a = check_label(label_a, "label_a")
    y_b = check_label(label_b, "label_b")
    if y_a.shape != y_b.shape:
        raise ValidationError(f"label lengths differ: {y_a.shape[0]} vs {y_b.shape[0]}")
    height, width = x_a.shape[0], x_a.shape[1]
    lam = sample_lambda(alpha, stream)
    box = None
    if method == METHOD_CUTMIX:
        box = cutmix_box(height, width, lam, stream)
        mask = mask_from_box(height, width, box)
    elif method == METHOD_SALIENCYMIX:
        center_y, center_x = saliency_peak(x_b)
        box = cutmix_box_at(height, width, lam, center_y, center_x)
        mask = mask_from_box(height, width, box)
    else:
        mask = fmix_mask(height, width, lam, stream, decay)
    lam_eff = int(mask.sum()) / (height * width)
    keep = mask.astype(bool)[:, :, None]
    mixed = np.where(keep, x_a, x_b)
    label = lam_eff * y_a + (1.0 - lam_eff) * y_b
    return MixResult(
        image=mixed, label=label, mask=mask,
        method=method, lam=float(lam), lam_eff=lam_eff, box=box,
    )


def make_pairs(count, stream, offset=None):
    """Pair up a drawn batch: shuffle, then pair k with (k + offset) mod count.

    ``offset`` defaults to ``count // 2``.  Returns ``count`` index pairs
    into the original batch order; every element appears once as the
    first member and once as the second.
    """
    if count < 2:
        raise ValidationError("pairing needs a batch of at least 2")
    if offset is None:
        offset = count // 2
    if not 1 <= offset < count:
        raise ValidationError(f"pair offset must lie in [1, {count - 1}], got {offset}")
    order = stream.shuffle(list(range(count)))
    return [(order[k], order[(k + offset) % count]) for k in range(count)]


def load_image(path):
    """Read a PNG or PPM file as float64 in [0, 1], shape (H, W, C).

    Grayscale files keep one channel; anything else becomes RGB.
    """
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            if img.mode == "L":
                arr = np.asarray(img, dtype=np.float64)[:, :, None]
            else:
                arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    except UnidentifiedImageError as exc:
        raise ValidationError(f"{path}: not a readable image ({exc})") from exc
    return arr / 255.0


def save_image(image, path):
    """Write a float image to PNG or PPM, quantizing by floor(x*255 + 0.5)."""
    from PIL import Image

    arr = check_image(image, "image")
    quantized = np.clip(np.floor(arr * 255.0 + 0.5), 0.0, 255.0).astype(np.uint8)
    if quantized.shape[2] == 1:
        img = Image.fromarray(quantized[:, :, 0], mode="L")
    else:
        img = Image.fromarray(quantized, mode="RGB")
    suffix = str(path).rsplit(".", 1)[-1].lower()
    fmt = {"png": "PNG", "ppm": "PPM"}.get(suffix)
    if fmt is None:
        raise ValidationError(f"unsupported image suffix {suffix!r} (use png or ppm)")
    buffer = io.BytesIO()
    img.save(buffer, format=fmt)
    atomic_write_bytes(path, buffer.getvalue())
