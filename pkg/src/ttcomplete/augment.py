"""Order-increasing tensor augmentation.

Three schemes map an image-like tensor ``(rows, cols[, channels])`` to a
higher-order tensor before completion and back afterwards:

* vanilla reshape, a relabelling of the flat buffer;
* ket augmentation (KA), recursive non-overlapping 2x2 block addressing,
  only defined for ``2^n x 2^n`` frontal slices;
* overlapping ket augmentation (OKA), where each division cuts the current
  frontal slice into four blocks that share 2 (even extent) or 3 (odd
  extent) rows/columns, so any size can be augmented.

Block addressing layout
-----------------------
At every division the four blocks are taken at the origins
``(1, 1), (1, y_start), (x_start, 1), (x_start, y_start)`` (row-major over the
2x2 grid, 1-based) and stacked along a new extent-4 mode placed directly after
the two spatial modes.  After ``L`` divisions the dims are::

    (x_final, y_final, q_L, ..., q_2, q_1[, channels])

so the modes run from the finest scale to the coarsest, then the channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, UnsupportedShape

__all__ = [
    "AugmentationPlan",
    "ReshapePlan",
    "AugmentedPair",
    "plan_oka",
    "plan_ka",
    "apply_oka",
    "invert_oka",
    "augment_mask",
    "apply_ka",
    "invert_ka",
    "apply_reshape",
    "invert_reshape",
    "default_reshape_dims",
    "make_plan",
]


def _shrink_with_overlap(size: int) -> int:
    # overlap 2 for even extents, 3 for odd ones
    if size % 2:
        return (size + 1) // 2 + 1
    return size // 2 + 1


@dataclass(frozen=True)
class AugmentationPlan:
    """Division schedule for (overlapping) ket augmentation.

    ``sizes[t]`` is the frontal slice shape after ``t`` divisions, with
    ``sizes[0]`` the input ``(rows, cols)``.  ``starts[t]`` holds the 1-based
    origin of the lower/right blocks used at division ``t``; ``starts[0]`` is
    ``(1, 1)`` by convention.  With ``merge_final`` the last frontal slice
    is folded into a single mode (used by KA, whose last slice is 2x2).
    """

    sizes: tuple
    starts: tuple
    channel_extent: int | None = None
    merge_final: bool = False
    scheme: str = "oka"

    def __post_init__(self):
        sizes = tuple((int(x), int(y)) for x, y in self.sizes)
        starts = tuple((int(x), int(y)) for x, y in self.starts)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "starts", starts)
        if len(sizes) < 1 or len(starts) != len(sizes):
            raise InvalidArgument("sizes and starts must have levels + 1 entries")
        for t in range(1, len(sizes)):
            for prev, cur, start in zip(sizes[t - 1], sizes[t], starts[t]):
                if not (1 <= cur <= prev and start + cur - 1 == prev):
                    raise InvalidArgument(
                        f"level {t}: block {sizes[t]} at {starts[t]} does not end "
                        f"on the border of {sizes[t - 1]}")
                if start > cur + 1:
                    raise InvalidArgument(f"level {t}: blocks leave a gap")
        if self.channel_extent is not None and self.channel_extent < 1:
            raise InvalidArgument("channel extent must be positive")

    @property
    def levels(self) -> int:
        return len(self.sizes) - 1

    @property
    def input_dims(self) -> tuple:
        dims = self.sizes[0]
        if self.channel_extent is not None:
            dims = dims + (self.channel_extent,)
        return dims

    @property
    def output_dims(self) -> tuple:
        x, y = self.sizes[-1]
        dims = (x * y,) if self.merge_final else (x, y)
        dims = dims + (4,) * self.levels
        if self.channel_extent is not None:
            dims = dims + (self.channel_extent,)
        return dims

    def overlaps(self) -> list:
        """Shared rows/columns per division, ``2 * size[t] - size[t-1]``."""
        return [(2 * x - px, 2 * y - py)
                for (px, py), (x, y) in zip(self.sizes[:-1], self.sizes[1:])]

    # uniform interface with ReshapePlan
    def apply(self, t):
        return apply_oka(t, self)

    def invert(self, aug):
        return invert_oka(aug, self)

    def apply_mask(self, mask):
        return augment_mask(mask, self)


def plan_oka(rows: int, cols: int, channels: int | None = None) -> AugmentationPlan:
    """Plan overlapping divisions until either frontal extent is at most 4."""
    if rows < 2 or cols < 2:
        raise InvalidArgument(f"OKA needs at least a 2x2 frontal slice, got {rows}x{cols}")
    r, c = int(rows), int(cols)
    sizes = [(r, c)]
    starts = [(1, 1)]
    while r > 4 and c > 4:
        pr, pc = r, c
        r = _shrink_with_overlap(r)
        c = _shrink_with_overlap(c)
        sizes.append((r, c))
        starts.append((pr - r + 1, pc - c + 1))
    return AugmentationPlan(tuple(sizes), tuple(starts), channels, False, "oka")


def plan_ka(rows: int, cols: int, channels: int | None = None) -> AugmentationPlan:
    """Non-overlapping 2x2 block addressing; needs ``rows == cols == 2^n``."""
    n = int(rows).bit_length() - 1
    if rows != cols or rows < 2 or rows != 1 << n:
        raise UnsupportedShape(
            f"KA is defined only for 2^n x 2^n frontal slices, got {rows}x{cols}; "
            "use OKA for arbitrary sizes")
    sizes = [(rows, cols)]
    starts = [(1, 1)]
    s = rows
    while s > 2:
        s //= 2
        sizes.append((s, s))
        starts.append((s + 1, s + 1))
    return AugmentationPlan(tuple(sizes), tuple(starts), channels, True, "ka")


def _check_input(t, plan):
    if tuple(t.shape) != plan.input_dims:
        raise InvalidArgument(
            f"tensor dims {tuple(t.shape)} do not match plan input {plan.input_dims}")


def _relocate(t: np.ndarray, plan: AugmentationPlan) -> np.ndarray:
    # t has the two spatial modes first; any trailing modes ride along
    cur = t
    for (sx, sy), (x0, y0) in zip(plan.sizes[1:], plan.starts[1:]):
        x0 -= 1
        y0 -= 1
        blocks = [cur[:sx, :sy], cur[:sx, y0:y0 + sy],
                  cur[x0:x0 + sx, :sy], cur[x0:x0 + sx, y0:y0 + sy]]
        cur = np.stack(blocks, axis=2)
    if plan.merge_final:
        x, y = plan.sizes[-1]
        cur = cur.reshape((x * y,) + cur.shape[2:], order="F")
    return np.asfortranarray(cur)


def apply_oka(t, plan: AugmentationPlan) -> np.ndarray:
    """Cast ``t`` into the augmented order described by ``plan``."""
    t = np.asarray(t)
    _check_input(t, plan)
    return _relocate(t, plan)


def _preimage(plan: AugmentationPlan) -> np.ndarray:
    rows, cols = plan.sizes[0]
    idx = np.arange(rows * cols).reshape((rows, cols), order="F")
    return _relocate(idx, plan)


def invert_oka(aug, plan: AugmentationPlan) -> np.ndarray:
    """Map an augmented tensor back, averaging the copies of each position.

    The mean is taken as ``first copy + mean deviation`` so that positions
    whose copies agree are restored bit-exactly.
    """
    aug = np.asarray(aug, dtype=np.float64)
    if tuple(aug.shape) != plan.output_dims:
        raise InvalidArgument(
            f"augmented dims {tuple(aug.shape)} do not match plan output {plan.output_dims}")
    rows, cols = plan.sizes[0]
    npix = rows * cols
    idx = _preimage(plan).ravel(order="F")
    chans = plan.channel_extent or 1
    flat = aug.reshape((idx.size, chans), order="F")

    counts = np.bincount(idx, minlength=npix)
    first = np.empty(npix, dtype=np.intp)
    first[idx[::-1]] = np.arange(idx.size)[::-1]
    out = np.empty((npix, chans))
    for j in range(chans):
        ref = flat[first, j]
        dev = flat[:, j] - ref[idx]
        out[:, j] = ref + np.bincount(idx, weights=dev, minlength=npix) / counts
    return out.reshape(plan.input_dims, order="F")


def augment_mask(mask, plan: AugmentationPlan) -> np.ndarray:
    """Every copy of an observed position is observed."""
    mask = np.asarray(mask, dtype=bool)
    _check_input(mask, plan)
    return _relocate(mask, plan)


def apply_ka(t) -> np.ndarray:
    """KA of an order-2 or order-3 tensor; invert with ``invert_ka(aug, plan_ka(...))``."""
    t = np.asarray(t)
    chans = t.shape[2] if t.ndim == 3 else None
    return apply_oka(t, plan_ka(t.shape[0], t.shape[1], chans))


def invert_ka(aug, plan: AugmentationPlan) -> np.ndarray:
    if plan.scheme != "ka":
        raise InvalidArgument("invert_ka needs a KA plan")
    return invert_oka(aug, plan)


@dataclass(frozen=True)
class ReshapePlan:
    """Plain relabelling of the flat buffer; also serves as the identity."""

    input_dims: tuple
    output_dims: tuple
    scheme: str = "reshape"

    def __post_init__(self):
        object.__setattr__(self, "input_dims", tuple(int(d) for d in self.input_dims))
        object.__setattr__(self, "output_dims", tuple(int(d) for d in self.output_dims))
        if math.prod(self.input_dims) != math.prod(self.output_dims):
            raise InvalidArgument(
                f"cannot reshape {self.input_dims} into {self.output_dims}: "
                "element counts differ")

    def apply(self, t):
        return apply_reshape(t, self.output_dims)

    def invert(self, aug):
        return invert_reshape(aug, self.input_dims)

    def apply_mask(self, mask):
        return np.asarray(mask, dtype=bool).reshape(self.output_dims, order="F")


def apply_reshape(t, target_dims) -> np.ndarray:
    t = np.asarray(t)
    target_dims = tuple(int(d) for d in target_dims)
    if math.prod(target_dims) != t.size:
        raise InvalidArgument(f"cannot reshape {t.shape} into {target_dims}")
    return t.reshape(target_dims, order="F")


def invert_reshape(aug, original_dims) -> np.ndarray:
    return apply_reshape(aug, original_dims)


def _split_extent(n: int) -> list:
    if n > 1 and n & (n - 1) == 0:
        e = n.bit_length() - 1
        return [4] * (e // 2) + ([2] if e % 2 else [])
    # most balanced two-factor split, smaller factor first
    a = max(d for d in range(1, math.isqrt(n) + 1) if n % d == 0)
    return [a, n // a] if a > 1 else [n]


def default_reshape_dims(dims) -> tuple:
    """Reshape target for an image-like tensor.

    Power-of-two extents are cut into 4s (as KA would); other extents are
    split into their most balanced factor pair, e.g. 48 -> 6 x 8.  The channel
    mode is kept.
    """
    dims = tuple(int(d) for d in dims)
    out = []
    for d in dims[:2]:
        out.extend(_split_extent(d))
    return tuple(out) + dims[2:]


@dataclass
class AugmentedPair:
    tensor: np.ndarray
    mask: np.ndarray
    plan: object = field(repr=False)

    def __post_init__(self):
        if not (tuple(self.tensor.shape) == tuple(self.mask.shape)
                == tuple(self.plan.output_dims)):
            raise InvalidArgument("tensor, mask and plan disagree on dims")


def make_plan(scheme: str, dims, reshape_dims=None):
    """Build the plan for ``scheme`` in {none, reshape, ka, oka}."""
    dims = tuple(int(d) for d in dims)
    if scheme == "none":
        return ReshapePlan(dims, dims, "none")
    if scheme == "reshape":
        return ReshapePlan(dims, reshape_dims or default_reshape_dims(dims))
    if len(dims) not in (2, 3):
        raise UnsupportedShape(f"{scheme.upper()} needs an order-2 or order-3 input, got {dims}")
    chans = dims[2] if len(dims) == 3 else None
    if scheme == "oka":
        return plan_oka(dims[0], dims[1], chans)
    if scheme == "ka":
        return plan_ka(dims[0], dims[1], chans)
    raise InvalidArgument(f"unknown augmentation {scheme!r}")
