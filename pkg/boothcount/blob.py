from __future__ import annotations

import logging
from typing import Optional, List, Tuple

import numpy as np
from scipy import ndimage

from .enums import ShadowPolicy
from .mixins import ShapeMixin
from .utils import CacheDict
from .exceptions import ParameterError
from .mog2 import MaskFrame, BACKGROUND, FOREGROUND


__all__ = [
    "BinaryMask",
    "Blob",
    "MorphParams",
    "binarize",
    "clean_mask",
    "connected_components",
    "extract_blobs",
]
logger = logging.getLogger(__package__)
# relative to the frame area
DEFAULT_MIN_BLOB_FRACTION = 0.005
# row and column halves of the square structuring elements, keyed by radius
_ELEMENTS: CacheDict[int, Tuple[np.ndarray, np.ndarray]] = CacheDict(
    lambda radius: (
        np.ones((1, 2 * radius + 1), dtype=bool), np.ones((2 * radius + 1, 1), dtype=bool)
    )
)
# 8-connectivity
_CONNECTIVITY = np.ones((3, 3), dtype=bool)


class BinaryMask(ShapeMixin):
    """
    A boolean foreground mask.

    Parameters
    ----------
    bits : numpy.ndarray
        Boolean foreground flags, shaped ``(height, width)``.
    index : int
        The index of the frame this mask belongs to.\n
        Defaults to ``0``.
    """
    def __init__(self, bits: np.ndarray, index: int = 0):
        if bits.ndim != 2:
            raise ParameterError("bits", bits.shape, "expected a 2D array")
        super().__init__(width=bits.shape[1], height=bits.shape[0], channels=1)
        self.bits: np.ndarray = bits.astype(bool, copy=False)
        self.index: int = index

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.index}: {self.width}x{self.height})"

    def __eq__(self, other: object) -> bool:
        if isinstance(other, BinaryMask):
            return np.array_equal(self.bits, other.bits)
        return NotImplemented

    @property
    def count(self) -> int:
        """
        The amount of foreground pixels.

        :type: int
        """
        return int(np.count_nonzero(self.bits))

    def to_mask(self) -> MaskFrame:
        """
        Converts this mask into a `MaskFrame`, with foreground pixels labeled ``255``.
        Useful for exporting cleaned masks through `write_pgm`.
        """
        labels = np.where(self.bits, FOREGROUND, BACKGROUND).astype(np.uint8)
        return MaskFrame(labels, index=self.index, validate=False)


class Blob:
    """
    A connected foreground region.

    Attributes
    ----------
    label : int
        The component label this blob was extracted from.
    area : int
        The amount of pixels in the blob.
    centroid : Tuple[float, float]
        The sub-pixel ``(x, y)`` mean of the member pixel coordinates.
    bbox : Tuple[int, int, int, int]
        The inclusive ``(min_x, min_y, max_x, max_y)`` bounding box.
    """
    def __init__(
        self,
        label: int,
        area: int,
        centroid: Tuple[float, float],
        bbox: Tuple[int, int, int, int],
    ):
        self.label = label
        self.area = area
        self.centroid = centroid
        self.bbox = bbox

    def __repr__(self) -> str:
        x, y = self.centroid
        return f"{self.__class__.__name__}({self.label}: area={self.area}, at=({x:.2f}, {y:.2f}))"


class MorphParams:
    """
    Mask refinement and blob filtering parameters. The attribute names are the canonical
    ``[blob]`` configuration keys.

    Attributes
    ----------
    open_radius : int
        Radius of the opening element. ``0`` disables opening.\n
        Defaults to ``1``.
    close_radius : int
        Radius of the closing element. ``0`` disables closing.\n
        Defaults to ``2``.
    min_blob_area : Optional[int]
        The smallest blob area kept, in pixels. `None` means 0.5% of the frame area,
        resolved through `resolve`.
    shadow_policy : ShadowPolicy
        How shadow pixels are binarized.\n
        Defaults to `ShadowPolicy.Treat_As_Background`.
    """
    FIELDS = ("open_radius", "close_radius", "min_blob_area", "shadow_policy")

    def __init__(
        self,
        *,
        open_radius: int = 1,
        close_radius: int = 2,
        min_blob_area: Optional[int] = None,
        shadow_policy: ShadowPolicy = ShadowPolicy.Treat_As_Background,
    ):
        self.open_radius = open_radius
        self.close_radius = close_radius
        self.min_blob_area = min_blob_area
        self.shadow_policy = shadow_policy
        self.validate()

    def __repr__(self) -> str:
        args = ", ".join(f"{name}={getattr(self, name)!r}" for name in self.FIELDS)
        return f"{self.__class__.__name__}({args})"

    def validate(self):
        for name in ("open_radius", "close_radius"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise ParameterError(name, value, "has to be an integer >= 0")
        if self.min_blob_area is not None and self.min_blob_area < 1:
            raise ParameterError("min_blob_area", self.min_blob_area, "has to be >= 1")
        if not isinstance(self.shadow_policy, ShadowPolicy):
            raise ParameterError("shadow_policy", self.shadow_policy, "unknown policy")

    def resolve(self, width: int, height: int) -> MorphParams:
        """
        Returns a copy with the size-relative `min_blob_area` default filled in.
        """
        area = self.min_blob_area
        if area is None:
            area = max(1, round(DEFAULT_MIN_BLOB_FRACTION * width * height))
        return MorphParams(
            open_radius=self.open_radius,
            close_radius=self.close_radius,
            min_blob_area=area,
            shadow_policy=self.shadow_policy,
        )


def binarize(
    mask: MaskFrame, policy: ShadowPolicy = ShadowPolicy.Treat_As_Background
) -> BinaryMask:
    """
    Turns a classification mask into a boolean foreground mask.

    Parameters
    ----------
    mask : MaskFrame
        The mask to binarize.
    policy : ShadowPolicy
        Decides if shadow pixels end up as foreground.\n
        Defaults to `ShadowPolicy.Treat_As_Background`.

    Returns
    -------
    BinaryMask
        The foreground mask.
    """
    bits = mask.labels == FOREGROUND
    if policy == ShadowPolicy.Treat_As_Foreground:
        bits |= mask.labels == mask.shadow_value
    return BinaryMask(bits, mask.index)


def _erode(bits: np.ndarray, radius: int) -> np.ndarray:
    row, column = _ELEMENTS[radius]
    bits = ndimage.binary_erosion(bits, row, border_value=1)
    return ndimage.binary_erosion(bits, column, border_value=1)


def _dilate(bits: np.ndarray, radius: int) -> np.ndarray:
    row, column = _ELEMENTS[radius]
    bits = ndimage.binary_dilation(bits, row, border_value=0)
    return ndimage.binary_dilation(bits, column, border_value=0)


def clean_mask(mask: BinaryMask, params: MorphParams) -> BinaryMask:
    """
    Refines a foreground mask: an opening with ``open_radius``, followed by a closing
    with ``close_radius``. Zero radii skip the respective step.

    Both use a square ``(2r + 1) x (2r + 1)`` element, applied as a row pass followed by
    a column pass. Erosion treats pixels outside of the frame as foreground and dilation
    treats them as background, so blobs touching the frame edge aren't eaten away, and
    applying the filter twice changes nothing.
    """
    bits = mask.bits
    if params.open_radius > 0:
        bits = _dilate(_erode(bits, params.open_radius), params.open_radius)
    if params.close_radius > 0:
        bits = _erode(_dilate(bits, params.close_radius), params.close_radius)
    return BinaryMask(bits, mask.index)


def connected_components(mask: BinaryMask) -> Tuple[np.ndarray, int]:
    """
    Labels the 8-connected foreground regions of the mask.

    Parameters
    ----------
    mask : BinaryMask
        The mask to label.

    Returns
    -------
    Tuple[numpy.ndarray, int]
        The ``int32`` label image (``0`` for background, ``1..count`` assigned in raster
        order of each region's first pixel), and the region count.
    """
    labels, count = ndimage.label(mask.bits, structure=_CONNECTIVITY)
    if count > 1:
        flat = labels.ravel()
        members = flat[np.flatnonzero(flat)]
        found, first = np.unique(members, return_index=True)
        # order regions by their first pixel
        remap = np.zeros(count + 1, dtype=np.int32)
        remap[found[np.argsort(first)]] = np.arange(1, count + 1, dtype=np.int32)
        labels = remap[labels]
    return labels.astype(np.int32, copy=False), int(count)


def extract_blobs(labels: np.ndarray, min_blob_area: int) -> List[Blob]:
    """
    Measures each labeled region and keeps those large enough.

    Parameters
    ----------
    labels : numpy.ndarray
        A label image, as returned by `connected_components`.
    min_blob_area : int
        The smallest area kept.

    Returns
    -------
    List[Blob]
        The blobs, in label order.
    """
    count = int(labels.max()) if labels.size else 0
    if count == 0:
        return []
    flat = labels.ravel()
    pixels = np.flatnonzero(flat)
    members = flat[pixels]
    ys, xs = np.divmod(pixels, labels.shape[1])
    areas = np.bincount(members, minlength=count + 1)
    sum_x = np.bincount(members, weights=xs.astype(np.float64), minlength=count + 1)
    sum_y = np.bincount(members, weights=ys.astype(np.float64), minlength=count + 1)
    blobs: List[Blob] = []
    for label, region in enumerate(ndimage.find_objects(labels), start=1):
        area = int(areas[label])
        if region is None or area < min_blob_area:
            continue
        rows, cols = region
        blobs.append(Blob(
            label,
            area,
            (float(sum_x[label] / area), float(sum_y[label] / area)),
            (cols.start, rows.start, cols.stop - 1, rows.stop - 1),
        ))
    logger.debug(f"blob.extract_blobs(count={count}, min_area={min_blob_area}) -> {len(blobs)}")
    return blobs
