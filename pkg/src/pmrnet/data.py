"""Dataset ingestion, splitting, augmentation and the synthetic generator.

Conventions: images are float32 (C, H, W) arrays scaled to [0, 1]; masks
are float32 (1, H, W) arrays with values in {0, 1}. Directory layout is
``<root>/images/<id>.png`` and ``<root>/masks/<id>.png`` with name-matched
8-bit files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv
from PIL import Image

from .errors import DecodeError, DivisibilityError, MissingMaskError

# ---------------------------------------------------------------------------
# dataset handles


class ArrayDataset:
    """In-memory dataset of aligned (image, mask) pairs."""

    def __init__(self, images: np.ndarray, masks: np.ndarray, ids: list[str]):
        assert images.ndim == 4 and masks.ndim == 4 and masks.shape[1] == 1
        assert len(images) == len(masks) == len(ids)
        self.images = images.astype(np.float32)
        self.masks = masks.astype(np.float32)
        self.ids = list(ids)

    def __len__(self) -> int:
        return len(self.ids)

    def get(self, index: int) -> tuple[np.ndarray, np.ndarray, str]:
        return self.images[index], self.masks[index], self.ids[index]

    def subset(self, ids: list[str]) -> "ArrayDataset":
        index = {s: i for i, s in enumerate(self.ids)}
        rows = [index[s] for s in ids]
        return ArrayDataset(self.images[rows], self.masks[rows], list(ids))


class ImageFolderDataset:
    """Folder-backed dataset; pairing is validated eagerly, pixels decode lazily."""

    def __init__(self, root):
        self.root = Path(root)
        image_dir = self.root / "images"
        mask_dir = self.root / "masks"
        if not image_dir.is_dir():
            raise DecodeError(f"no images/ directory under {self.root}")
        self.ids: list[str] = []
        self._image_paths: dict[str, Path] = {}
        self._mask_paths: dict[str, Path] = {}
        for img_path in sorted(image_dir.glob("*.png")):
            stem = img_path.stem
            mask_path = mask_dir / img_path.name
            if not mask_path.is_file():
                raise MissingMaskError(f"image {img_path.name} has no mask in {mask_dir}")
            self.ids.append(stem)
            self._image_paths[stem] = img_path
            self._mask_paths[stem] = mask_path
        self._cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def __len__(self) -> int:
        return len(self.ids)

    def get(self, index: int) -> tuple[np.ndarray, np.ndarray, str]:
        stem = self.ids[index]
        if stem not in self._cache:
            self._cache[stem] = (
                _decode_image(self._image_paths[stem]),
                _decode_mask(self._mask_paths[stem]),
            )
        image, mask = self._cache[stem]
        return image, mask, stem


def _decode_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float32) / 255.0
    except (OSError, ValueError) as e:
        raise DecodeError(f"cannot decode {path}: {e}") from e
    if arr.ndim == 2:
        arr = arr[None]
    else:
        arr = arr.transpose(2, 0, 1)
    return arr


def _decode_mask(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"), dtype=np.float32) / 255.0
    except (OSError, ValueError) as e:
        raise DecodeError(f"cannot decode {path}: {e}") from e
    return (arr >= 0.5).astype(np.float32)[None]


def load_dataset(root) -> ImageFolderDataset:
    return ImageFolderDataset(root)


def materialize(ds) -> ArrayDataset:
    """Decode every sample of a handle into an in-memory dataset."""
    if isinstance(ds, ArrayDataset):
        return ds
    images, masks, ids = [], [], []
    for i in range(len(ds)):
        img, mask, stem = ds.get(i)
        images.append(img)
        masks.append(mask)
        ids.append(stem)
    return ArrayDataset(np.stack(images), np.stack(masks), ids)


# ---------------------------------------------------------------------------
# splits


@dataclass(frozen=True)
class SplitSpec:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int
    ratio: float


def split(ds, ratio: float, seed: int) -> SplitSpec:
    """Deterministic shuffled split; train gets floor(n * ratio) samples."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    ids = list(ds.ids)
    order = np.random.default_rng(seed).permutation(len(ids))
    n_train = int(len(ids) * ratio)
    train = tuple(ids[i] for i in order[:n_train])
    test = tuple(ids[i] for i in order[n_train:])
    return SplitSpec(train_ids=train, test_ids=test, seed=seed, ratio=ratio)


def save_ids(path, ids) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.writelines(f"{s}\n" for s in ids)


def load_ids(path) -> list[str]:
    with open(path, "r", encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


# ---------------------------------------------------------------------------
# augmentation


def hflip(arr: np.ndarray) -> np.ndarray:
    return arr[..., ::-1].copy()


def vflip(arr: np.ndarray) -> np.ndarray:
    return arr[..., ::-1, :].copy()


def diagonal_flip(arr: np.ndarray) -> np.ndarray:
    """Transpose height and width (main-diagonal flip)."""
    return arr.swapaxes(-1, -2).copy()


def shift(arr: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Translate by (dy, dx) with zero fill outside the original support."""
    out = np.zeros_like(arr)
    h, w = arr.shape[-2:]
    ys = slice(max(dy, 0), min(h + dy, h))
    xs = slice(max(dx, 0), min(w + dx, w))
    ys_src = slice(max(-dy, 0), min(h - dy, h))
    xs_src = slice(max(-dx, 0), min(w - dx, w))
    out[..., ys, xs] = arr[..., ys_src, xs_src]
    return out


def hsv_jitter(image: np.ndarray, dh: float, ds: float, dv: float) -> np.ndarray:
    """Jitter hue/saturation/value of an RGB image; identity on grayscale."""
    if image.shape[0] != 3:
        return image.copy()
    hsv = rgb_to_hsv(image.transpose(1, 2, 0))
    hsv[..., 0] = (hsv[..., 0] + dh) % 1.0
    hsv[..., 1] = np.clip(hsv[..., 1] + ds, 0.0, 1.0)
    hsv[..., 2] = np.clip(hsv[..., 2] + dv, 0.0, 1.0)
    return hsv_to_rgb(hsv).transpose(2, 0, 1).astype(np.float32)


def augment_x8(
    image: np.ndarray, mask: np.ndarray, rng: np.random.Generator | None = None
) -> list[tuple[np.ndarray, np.ndarray]]:
    """The eight training variants of one sample, in fixed order.

    [original, hflip, vflip, diagonal flip, hflip+vflip, HSV jitter,
    shift, HSV jitter of the shifted sample]. Geometric ops hit image and
    mask identically; HSV never touches the mask.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    h, w = image.shape[-2:]
    dh = rng.uniform(-0.05, 0.05)
    dsat = rng.uniform(-0.2, 0.2)
    dval = rng.uniform(-0.2, 0.2)
    dy = int(rng.integers(-h // 10, h // 10 + 1))
    dx = int(rng.integers(-w // 10, w // 10 + 1))
    dh2 = rng.uniform(-0.05, 0.05)
    dsat2 = rng.uniform(-0.2, 0.2)
    dval2 = rng.uniform(-0.2, 0.2)
    shifted_img, shifted_mask = shift(image, dy, dx), shift(mask, dy, dx)
    return [
        (image.copy(), mask.copy()),
        (hflip(image), hflip(mask)),
        (vflip(image), vflip(mask)),
        (diagonal_flip(image), diagonal_flip(mask)),
        (hflip(vflip(image)), hflip(vflip(mask))),
        (hsv_jitter(image, dh, dsat, dval), mask.copy()),
        (shifted_img, shifted_mask),
        (hsv_jitter(shifted_img, dh2, dsat2, dval2), shifted_mask),
    ]


def augment_dataset(ds, seed: int = 0) -> ArrayDataset:
    """Expand a dataset eightfold; per-sample draws are seeded stably."""
    base = materialize(ds)
    images, masks, ids = [], [], []
    for i in range(len(base)):
        img, mask, stem = base.get(i)
        rng = np.random.default_rng((seed, i))
        for k, (ai, am) in enumerate(augment_x8(img, mask, rng)):
            images.append(ai)
            masks.append(am)
            ids.append(f"{stem}_aug{k}")
    return ArrayDataset(np.stack(images), np.stack(masks), ids)


# ---------------------------------------------------------------------------
# resizing


def resize_sample(
    image: np.ndarray, mask: np.ndarray, target_hw: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear for the image, nearest-neighbor for the mask (stays binary)."""
    h, w = int(target_hw[0]), int(target_hw[1])
    if image.shape[-2:] == (h, w):
        return image.copy(), mask.copy()
    img_t = torch.from_numpy(np.ascontiguousarray(image))[None]
    mask_t = torch.from_numpy(np.ascontiguousarray(mask))[None]
    img_r = F.interpolate(img_t, size=(h, w), mode="bilinear", align_corners=False)
    mask_r = F.interpolate(mask_t, size=(h, w), mode="nearest")
    return img_r[0].numpy(), mask_r[0].numpy()


def resize_dataset(ds, target_hw: tuple[int, int]) -> ArrayDataset:
    base = materialize(ds)
    images, masks = [], []
    for i in range(len(base)):
        img, mask, _ = base.get(i)
        ri, rm = resize_sample(img, mask, target_hw)
        images.append(ri)
        masks.append(rm)
    return ArrayDataset(np.stack(images), np.stack(masks), base.ids)


# ---------------------------------------------------------------------------
# synthetic shapes


@dataclass(frozen=True)
class ShapeParams:
    kind: str  # "ellipse" | "rect"
    cy: float
    cx: float
    ry: float
    rx: float


def shape_interior(params: ShapeParams, hw: tuple[int, int]) -> np.ndarray:
    """Exact binary interior of an analytic shape on the pixel grid."""
    ys, xs = np.mgrid[0 : hw[0], 0 : hw[1]].astype(np.float64)
    if params.kind == "ellipse":
        inside = ((ys - params.cy) / params.ry) ** 2 + (
            (xs - params.cx) / params.rx
        ) ** 2 <= 1.0
    else:
        inside = (np.abs(ys - params.cy) <= params.ry) & (
            np.abs(xs - params.cx) <= params.rx
        )
    return inside.astype(np.float32)


class SynthDataset(ArrayDataset):
    def __init__(self, images, masks, ids, shapes: list[ShapeParams]):
        super().__init__(images, masks, ids)
        self.shapes = shapes


def synth_dataset(
    n: int,
    hw: tuple[int, int],
    seed: int,
    channels: int = 3,
    divisor: int | None = None,
) -> SynthDataset:
    """n bright shapes on noisy dark backgrounds, with exact masks.

    Deterministic per seed. Pass the model's required divisor to reject
    incompatible sizes up front.
    """
    h, w = hw
    if divisor is not None and (h % divisor != 0 or w % divisor != 0):
        raise DivisibilityError(f"size {h}x{w} not divisible by {divisor}")
    rng = np.random.default_rng(seed)
    images = np.empty((n, channels, h, w), dtype=np.float32)
    masks = np.empty((n, 1, h, w), dtype=np.float32)
    shapes: list[ShapeParams] = []
    for i in range(n):
        params = ShapeParams(
            kind="ellipse" if rng.random() < 0.5 else "rect",
            cy=rng.uniform(0.3, 0.7) * h,
            cx=rng.uniform(0.3, 0.7) * w,
            ry=rng.uniform(0.16, 0.3) * h,
            rx=rng.uniform(0.16, 0.3) * w,
        )
        interior = shape_interior(params, hw)
        bg = rng.uniform(0.08, 0.22)
        fg = rng.uniform(0.72, 0.95)
        base = bg + rng.normal(0.0, 0.04, size=(h, w))
        base = np.where(interior > 0, fg + rng.normal(0.0, 0.03, size=(h, w)), base)
        for c in range(channels):
            tint = rng.uniform(0.9, 1.0)
            images[i, c] = np.clip(base * tint, 0.0, 1.0)
        masks[i, 0] = interior
        shapes.append(params)
    ids = [f"synth_{i:04d}" for i in range(n)]
    return SynthDataset(images, masks, ids, shapes)


# ---------------------------------------------------------------------------
# disk round trip


def write_dataset(ds, root) -> None:
    """Write a dataset to ``root/images`` and ``root/masks`` as 8-bit PNGs."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    base = materialize(ds)
    for i in range(len(base)):
        img, mask, stem = base.get(i)
        arr = np.round(img * 255.0).astype(np.uint8)
        if arr.shape[0] == 1:
            pil = Image.fromarray(arr[0], mode="L")
        else:
            pil = Image.fromarray(arr.transpose(1, 2, 0), mode="RGB")
        pil.save(root / "images" / f"{stem}.png")
        Image.fromarray((mask[0] * 255).astype(np.uint8), mode="L").save(
            root / "masks" / f"{stem}.png"
        )
