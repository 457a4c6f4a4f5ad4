"""Dataset-shift transforms: rotation, rolling translation and parametric corruptions."""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from ._accel import hot

CORRUPTIONS = ("gaussian_noise", "impulse_noise", "gaussian_blur", "brightness", "contrast", "pixelate")

# Severity 1..5. Tool defaults chosen to be monotone; overridable from config.
DEFAULT_SEVERITY_TABLES = {
    "gaussian_noise": (0.04, 0.08, 0.12, 0.18, 0.26),
    "impulse_noise": (0.01, 0.03, 0.06, 0.10, 0.17),
    "gaussian_blur": (0.5, 0.8, 1.2, 1.8, 2.5),
    "brightness": (0.1, 0.2, 0.3, 0.4, 0.5),
    "contrast": (0.75, 0.6, 0.45, 0.3, 0.2),
    "pixelate": (2, 3, 4, 5, 7),
}

ROTATION_DEGREES = tuple(range(15, 181, 15))


@dataclass(frozen=True)
class ShiftSpec:
    kind: str
    parameter: object

    def __post_init__(self):
        if self.kind == "rotation":
            if self.parameter not in ROTATION_DEGREES:
                raise ValueError(f"rotation must be one of {ROTATION_DEGREES}, got {self.parameter}")
        elif self.kind == "roll_translation":
            if not (isinstance(self.parameter, (int, np.integer)) and self.parameter >= 0 and self.parameter % 2 == 0):
                raise ValueError(f"roll must be a non-negative even pixel count, got {self.parameter}")
        elif self.kind == "corruption":
            name, severity = self.parameter
            if name not in CORRUPTIONS:
                raise ValueError(f"unknown corruption {name!r}")
            if severity not in (1, 2, 3, 4, 5):
                raise ValueError(f"severity must be in 1..5, got {severity}")
        else:
            raise ValueError(f"unknown shift kind {self.kind!r}")

    @property
    def label(self):
        if self.kind == "corruption":
            return self.parameter[0]
        return self.kind

    @property
    def level(self):
        if self.kind == "corruption":
            return self.parameter[1]
        return self.parameter


def roll_step(width):
    return 2 if width <= 28 else 4


def roll_schedule(width, include_zero=False):
    step = roll_step(width)
    start = 0 if include_zero else step
    return list(range(start, width + 1, step))


def roll_distance(pixels, width):
    """Circular distance of a roll from the identity, maximal at width / 2."""
    s = pixels % width
    return min(s, width - s)


# --------------------------------------------------------------------------
# rotation


def _rotate_numpy(images, cos_t, sin_t):
    n, h, w = images.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rr, cc = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    # inverse map: output (x, y) rotated clockwise lands on its source
    x = cc - cx
    y = cy - rr
    sx = cos_t * x + sin_t * y
    sy = -sin_t * x + cos_t * y
    src_c = sx + cx
    src_r = cy - sy
    r0 = np.floor(src_r).astype(np.int64)
    c0 = np.floor(src_c).astype(np.int64)
    fr = src_r - r0
    fc = src_c - c0
    out = np.zeros_like(images)
    for dr, dc, wgt in ((0, 0, (1 - fr) * (1 - fc)), (0, 1, (1 - fr) * fc), (1, 0, fr * (1 - fc)), (1, 1, fr * fc)):
        rs = r0 + dr
        cs = c0 + dc
        ok = (rs >= 0) & (rs < h) & (cs >= 0) & (cs < w)
        vals = images[:, np.clip(rs, 0, h - 1), np.clip(cs, 0, w - 1)]
        out += np.where(ok, wgt, 0.0)[None] * vals
    return np.clip(out, 0.0, 1.0)


@hot(fallback=_rotate_numpy)
def _rotate_batch(images, cos_t, sin_t):
    n, h, w = images.shape
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    out = np.zeros_like(images)
    for r in range(h):
        for c in range(w):
            x = c - cx
            y = cy - r
            src_c = cos_t * x + sin_t * y + cx
            src_r = cy - (-sin_t * x + cos_t * y)
            r0 = int(math.floor(src_r))
            c0 = int(math.floor(src_c))
            fr = src_r - r0
            fc = src_c - c0
            for dr in range(2):
                rs = r0 + dr
                if rs < 0 or rs >= h:
                    continue
                wr = fr if dr == 1 else 1.0 - fr
                for dc in range(2):
                    cs = c0 + dc
                    if cs < 0 or cs >= w:
                        continue
                    wgt = wr * (fc if dc == 1 else 1.0 - fc)
                    if wgt == 0.0:
                        continue
                    for i in range(n):
                        out[i, r, c] += wgt * images[i, rs, cs]
    for i in range(n):
        for r in range(h):
            for c in range(w):
                v = out[i, r, c]
                out[i, r, c] = 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)
    return out


def _as_planes(images):
    """(n, h, w[, c]) -> contiguous (n*c, h, w) plus a function undoing it."""
    if images.ndim == 3:
        return np.ascontiguousarray(images, dtype=np.float64), lambda p: p
    n, h, w, c = images.shape
    planes = np.ascontiguousarray(np.moveaxis(images, 3, 1).reshape(n * c, h, w), dtype=np.float64)
    return planes, lambda p: np.moveaxis(p.reshape(n, c, h, w), 1, 3)


def _trig(degrees):
    rad = math.radians(degrees)
    cos_t, sin_t = math.cos(rad), math.sin(rad)
    # snap the exact quarter turns so they map pixels onto pixels
    if degrees % 90 == 0:
        cos_t, sin_t = float(round(cos_t)), float(round(sin_t))
    return cos_t, sin_t


def rotate_batch(images, degrees):
    """Rotate every image counter-clockwise about its centre (bilinear, zero fill)."""
    if not 0 <= degrees < 360:
        raise ValueError(f"degrees must lie in [0, 360), got {degrees}")
    images = np.asarray(images, dtype=np.float64)
    if degrees == 0:
        return images.copy()
    planes, restore = _as_planes(images)
    cos_t, sin_t = _trig(degrees)
    return restore(_rotate_batch(planes, cos_t, sin_t))


def rotate(image, degrees):
    """Rotate a single (h, w) or (h, w, c) image counter-clockwise by ``degrees``."""
    return rotate_batch(np.asarray(image, dtype=np.float64)[None], degrees)[0]


# --------------------------------------------------------------------------
# rolling translation


def roll(image, pixels):
    """Circular shift to the right: the right-most column wraps to the left."""
    image = np.asarray(image)
    width = image.shape[1]
    if not 0 <= pixels <= width:
        raise ValueError(f"pixels must lie in [0, {width}], got {pixels}")
    return np.roll(image, pixels, axis=1)


def roll_batch(images, pixels):
    images = np.asarray(images)
    width = images.shape[2]
    if not 0 <= pixels <= width:
        raise ValueError(f"pixels must lie in [0, {width}], got {pixels}")
    return np.roll(images, pixels, axis=2)


# --------------------------------------------------------------------------
# corruptions


def _pixelate(image, block):
    h, w = image.shape[:2]
    out = np.empty_like(image)
    for r in range(0, h, block):
        for c in range(0, w, block):
            patch = image[r : r + block, c : c + block]
            out[r : r + block, c : c + block] = patch.mean(axis=(0, 1))
    return out


def corrupt(image, kind, severity, seed=0, tables=None):
    """Apply one parametric corruption at severity 1..5; output clamped to [0, 1].

    Noise kinds draw from ``numpy.random.default_rng(seed)`` so a fixed seed
    gives bit-identical output.
    """
    tables = DEFAULT_SEVERITY_TABLES if tables is None else tables
    if kind not in CORRUPTIONS:
        raise ValueError(f"unknown corruption {kind!r}; expected one of {CORRUPTIONS}")
    if severity not in (1, 2, 3, 4, 5):
        raise ValueError(f"severity must be in 1..5, got {severity}")
    level = tables[kind][severity - 1]
    image = np.asarray(image, dtype=np.float64)

    if kind == "gaussian_noise":
        rng = np.random.default_rng(seed)
        out = image + rng.normal(0.0, level, size=image.shape)
    elif kind == "impulse_noise":
        rng = np.random.default_rng(seed)
        out = image.copy()
        hit = rng.random(image.shape) < level
        salt = rng.random(image.shape) < 0.5
        out[hit & salt] = 1.0
        out[hit & ~salt] = 0.0
    elif kind == "gaussian_blur":
        sigma = (level, level) + (0,) * (image.ndim - 2)
        out = ndimage.gaussian_filter(image, sigma=sigma, mode="reflect")
    elif kind == "brightness":
        out = image + level
    elif kind == "contrast":
        mean = image.mean(axis=(0, 1), keepdims=True)
        out = (image - mean) * level + mean
    else:
        out = _pixelate(image, int(level))
    return np.clip(out, 0.0, 1.0)


# --------------------------------------------------------------------------
# sweeps


def apply_shift(dataset, spec, seed=0, tables=None):
    images = dataset.images
    if spec.kind == "rotation":
        shifted = rotate_batch(images, spec.parameter)
    elif spec.kind == "roll_translation":
        shifted = roll_batch(images, spec.parameter)
    else:
        name, severity = spec.parameter
        shifted = np.stack(
            [corrupt(img, name, severity, seed=seed + i, tables=tables) for i, img in enumerate(images)]
        )
    return replace(dataset, images=shifted)


def shift_sweep(dataset, kind, schedule, seed=0, tables=None):
    """One shifted copy of ``dataset`` per schedule point, in schedule order.

    For ``kind="corruption"`` the schedule holds ``(name, severity)`` pairs;
    noise corruptions use per-image seed ``seed + index``.
    """
    return [
        (spec, apply_shift(dataset, spec, seed=seed, tables=tables))
        for spec in (ShiftSpec(kind, p) for p in schedule)
    ]
