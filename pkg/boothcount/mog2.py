from __future__ import annotations

import logging
from typing import Any, Optional, List, Dict, Sequence, Tuple

import numpy as np

from .video_io import Frame
from .mixins import ShapeMixin
from .exceptions import ParameterError, EmptyModel


__all__ = [
    "Mog2Params",
    "GaussianComponent",
    "MaskFrame",
    "BackgroundModel",
    "BACKGROUND",
    "FOREGROUND",
    "bg_new",
    "bg_apply",
    "bg_background_image",
]
logger = logging.getLogger(__package__)
BACKGROUND = 0
FOREGROUND = 255
# birth stamp of empty component slots, sorts them after every live component
_EMPTY = np.iinfo(np.int64).max


class Mog2Params:
    """
    Background subtractor parameters. The attribute names are the canonical ``[mog2]``
    configuration keys.

    Attributes
    ----------
    history : int
        Learning rate horizon, in frames. At steady state the learning rate is ``1 / history``.\n
        Defaults to ``500``.
    var_threshold : float
        Squared Mahalanobis distance under which a sample matches a component.\n
        Defaults to ``16``.
    max_components : int
        The maximum amount of Gaussian components per pixel.\n
        Defaults to ``5``.
    background_ratio : float
        Cumulative weight fraction defining the background components, in ``(0, 1)``.\n
        Defaults to ``0.9``.
    var_init : float
        Variance of newly created components.\n
        Defaults to ``15``.
    var_min : float
    var_max : float
        Variance clamp bounds.\n
        Default to ``4`` and ``75``.
    weight_prune : float
        Complexity reduction constant, subtracted (scaled by the learning rate) from every
        weight on each update. Components whose weight drops to zero are removed.\n
        Defaults to ``0.05 / max_components``.
    detect_shadows : bool
        Enables shadow labeling. Requires 3-channel input.\n
        Defaults to `False`.
    shadow_value : int
        The mask label used for shadow pixels.\n
        Defaults to ``127``.
    shadow_threshold : float
        Lower bound of the brightness ratio for a pixel to count as a shadow, in ``(0, 1)``.\n
        Defaults to ``0.5``.
    """
    FIELDS: Tuple[str, ...] = (
        "history",
        "var_threshold",
        "max_components",
        "background_ratio",
        "var_init",
        "var_min",
        "var_max",
        "weight_prune",
        "detect_shadows",
        "shadow_value",
        "shadow_threshold",
    )

    def __init__(
        self,
        *,
        history: int = 500,
        var_threshold: float = 16.0,
        max_components: int = 5,
        background_ratio: float = 0.9,
        var_init: float = 15.0,
        var_min: float = 4.0,
        var_max: float = 75.0,
        weight_prune: Optional[float] = None,
        detect_shadows: bool = False,
        shadow_value: int = 127,
        shadow_threshold: float = 0.5,
    ):
        self.history = history
        self.var_threshold = float(var_threshold)
        self.max_components = max_components
        self.background_ratio = float(background_ratio)
        self.var_init = float(var_init)
        self.var_min = float(var_min)
        self.var_max = float(var_max)
        if weight_prune is None:
            weight_prune = 0.05 / max_components if max_components > 0 else 0.0
        self.weight_prune = float(weight_prune)
        self.detect_shadows = detect_shadows
        self.shadow_value = shadow_value
        self.shadow_threshold = float(shadow_threshold)
        self.validate()

    def __repr__(self) -> str:
        args = ", ".join(f"{name}={getattr(self, name)!r}" for name in self.FIELDS)
        return f"{self.__class__.__name__}({args})"

    def validate(self):
        """
        Checks the parameter invariants.

        Raises
        ------
        ParameterError
            A field holds an invalid value. The offending field is named.
        """
        if not isinstance(self.history, int) or self.history < 1:
            raise ParameterError("history", self.history, "has to be an integer >= 1")
        if not isinstance(self.max_components, int) or self.max_components < 1:
            raise ParameterError(
                "max_components", self.max_components, "has to be an integer >= 1"
            )
        if not 0 < self.background_ratio < 1:
            raise ParameterError("background_ratio", self.background_ratio, "has to be in (0, 1)")
        if self.var_threshold <= 0:
            raise ParameterError("var_threshold", self.var_threshold, "has to be positive")
        if not 0 < self.var_min <= self.var_init:
            raise ParameterError("var_min", self.var_min, "has to be in (0, var_init]")
        if not self.var_init <= self.var_max:
            raise ParameterError("var_max", self.var_max, "has to be >= var_init")
        if self.weight_prune < 0:
            raise ParameterError("weight_prune", self.weight_prune, "has to be >= 0")
        if not 0 < self.shadow_threshold < 1:
            raise ParameterError("shadow_threshold", self.shadow_threshold, "has to be in (0, 1)")
        if self.shadow_value in (BACKGROUND, FOREGROUND) or not 0 < self.shadow_value < 255:
            raise ParameterError(
                "shadow_value", self.shadow_value, "has to be in 1-254, distinct from 0 and 255"
            )

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in self.FIELDS}


class GaussianComponent:
    """
    A single Gaussian of a pixel's mixture.

    Attributes
    ----------
    weight : float
        The mixing weight.
    mean : Tuple[float, ...]
        The per-channel mean intensity.
    variance : float
        The variance, shared across channels.
    """
    def __init__(self, weight: float, mean: Sequence[float], variance: float):
        self.weight = float(weight)
        self.mean: Tuple[float, ...] = tuple(float(m) for m in mean)
        self.variance = float(variance)

    def __repr__(self) -> str:
        return (
            f"{self.__class__.__name__}(weight={self.weight!r}, "
            f"mean={self.mean!r}, variance={self.variance!r})"
        )

    def __eq__(self, other: object) -> bool:
        if isinstance(other, GaussianComponent):
            return (self.weight, self.mean, self.variance) == (
                other.weight, other.mean, other.variance
            )
        return NotImplemented


class MaskFrame(ShapeMixin):
    """
    A per-pixel classification mask produced by the background subtractor.

    Labels are ``0`` for background, ``255`` for foreground and ``shadow_value`` for shadows.

    Parameters
    ----------
    labels : numpy.ndarray
        ``uint8`` labels, shaped ``(height, width)``.
    shadow_value : int
        The shadow label.\n
        Defaults to ``127``.
    index : int
        The index of the frame this mask was computed for.\n
        Defaults to ``0``.

    Raises
    ------
    ParameterError
        The labels aren't a 2D ``uint8`` array, or contain a value outside of
        ``{0, 255, shadow_value}``.
    """
    def __init__(
        self, labels: np.ndarray, shadow_value: int = 127, index: int = 0, *, validate: bool = True
    ):
        if validate:
            if labels.ndim != 2 or labels.dtype != np.uint8:
                raise ParameterError("labels", labels.shape, "expected a 2D uint8 array")
            valid = (labels == BACKGROUND) | (labels == FOREGROUND) | (labels == shadow_value)
            if not valid.all():
                raise ParameterError(
                    "labels", sorted(set(np.unique(labels[~valid]).tolist())), "unknown labels"
                )
        super().__init__(width=labels.shape[1], height=labels.shape[0], channels=1)
        self.labels: np.ndarray = labels
        self.shadow_value: int = shadow_value
        self.index: int = index

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.index}: {self.width}x{self.height})"

    @property
    def foreground_fraction(self) -> float:
        """
        The fraction of pixels labeled as foreground. Shadows don't count.

        :type: float
        """
        return float(np.count_nonzero(self.labels == FOREGROUND)) / self.area


class BackgroundModel(ShapeMixin):
    """
    Per-pixel adaptive Gaussian mixture background model.

    Each pixel holds up to ``max_components`` components, kept sorted by descending weight
    (older components first on ties). The state is stored as ``(components, pixels)``
    arrays; empty component slots have a weight of ``0``.

    Parameters
    ----------
    width : int
    height : int
    channels : int
        The dimensions of the frames this model will be fed.
    params : Optional[Mog2Params]
        The model parameters.\n
        Defaults are used if not provided.

    Attributes
    ----------
    params : Mog2Params
        The model parameters.
    frames_seen : int
        The amount of frames applied so far.

    Raises
    ------
    ParameterError
        The dimensions or parameters are invalid, or shadow detection was requested
        for single-channel input.
    """
    def __init__(
        self, width: int, height: int, channels: int = 1, params: Optional[Mog2Params] = None
    ):
        if params is None:
            params = Mog2Params()
        params.validate()
        if width < 1 or height < 1:
            raise ParameterError("size", (width, height), "has to be positive")
        if channels not in (1, 3):
            raise ParameterError("channels", channels, "has to be 1 or 3")
        if params.detect_shadows and channels != 3:
            raise ParameterError(
                "detect_shadows", True, "shadow detection needs 3-channel input"
            )
        super().__init__(width=width, height=height, channels=channels)
        self.params: Mog2Params = params
        self.frames_seen: int = 0
        k, p = params.max_components, width * height
        self._weights = np.zeros((k, p), dtype=np.float64)
        self._means = np.zeros((k, channels, p), dtype=np.float64)
        self._variances = np.zeros((k, p), dtype=np.float64)
        self._births = np.full((k, p), _EMPTY, dtype=np.int64)

    def __repr__(self) -> str:
        return (
            f"{self.__class__.__name__}({self.width}x{self.height}x{self.channels}, "
            f"frames_seen={self.frames_seen})"
        )

    def learning_rate(self, override: Optional[float] = None) -> float:
        """
        The learning rate the next `apply` call will use.

        During warmup the rate is ``1 / t`` for the ``t``-th frame, settling to
        ``1 / history`` afterwards.
        """
        if override is not None:
            return float(override)
        return max(1.0 / (self.frames_seen + 1), 1.0 / self.params.history)

    def _pixel(self, x: int, y: int) -> int:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise IndexError(f"Pixel ({x}, {y}) is outside of the model")
        return y * self.width + x

    def component_counts(self) -> np.ndarray:
        """
        The amount of live components per pixel, shaped ``(height, width)``.
        """
        return np.count_nonzero(self._weights > 0, axis=0).reshape(self.height, self.width)

    def components(self, x: int, y: int) -> List[GaussianComponent]:
        """
        Returns the live components of a single pixel, in descending weight order.

        Parameters
        ----------
        x : int
        y : int
            The pixel coordinates.

        Returns
        -------
        List[GaussianComponent]
            The pixel's components.
        """
        i = self._pixel(x, y)
        return [
            GaussianComponent(
                self._weights[k, i], self._means[k, :, i].tolist(), self._variances[k, i]
            )
            for k in range(self.params.max_components)
            if self._weights[k, i] > 0
        ]

    def set_pixel(self, x: int, y: int, components: Sequence[GaussianComponent]):
        """
        Replaces the components of a single pixel. The components are sorted by weight,
        and considered older than anything the model learns afterwards.

        Parameters
        ----------
        x : int
        y : int
            The pixel coordinates.
        components : Sequence[GaussianComponent]
            The new components. Weights have to be positive and variances within
            the clamp bounds.

        Raises
        ------
        ParameterError
            Too many components, or a component violates the model invariants.
        """
        p = self.params
        if len(components) > p.max_components:
            raise ParameterError("components", len(components), "exceeds max_components")
        for comp in components:
            if comp.weight <= 0:
                raise ParameterError("weight", comp.weight, "has to be positive")
            if not p.var_min <= comp.variance <= p.var_max:
                raise ParameterError("variance", comp.variance, "outside of the clamp bounds")
            if len(comp.mean) != self.channels:
                raise ParameterError("mean", comp.mean, f"needs {self.channels} channels")
        i = self._pixel(x, y)
        ordered = sorted(components, key=lambda c: -c.weight)
        self._weights[:, i] = 0.0
        self._means[:, :, i] = 0.0
        self._variances[:, i] = 0.0
        self._births[:, i] = _EMPTY
        for k, comp in enumerate(ordered):
            self._weights[k, i] = comp.weight
            self._means[k, :, i] = comp.mean
            self._variances[k, i] = comp.variance
            self._births[k, i] = k - len(ordered)

    def apply(self, frame: Frame, learning_rate_override: Optional[float] = None) -> MaskFrame:
        """
        Classifies the frame against the model, and updates the model with it.

        A learning rate of ``0`` freezes the model: nothing is updated and no components
        are created, but the frame is still classified.

        Parameters
        ----------
        frame : Frame
            The next frame. Its dimensions have to match the model.
        learning_rate_override : Optional[float]
            A fixed learning rate in ``[0, 1]`` to use instead of the automatic one.

        Returns
        -------
        MaskFrame
            The classification mask for this frame.

        Raises
        ------
        DimensionMismatch
            The frame doesn't match the model.
        ParameterError
            The learning rate override is outside of ``[0, 1]``.
        """
        self._check_shape(frame, "bg_apply")
        if learning_rate_override is not None and not 0 <= learning_rate_override <= 1:
            raise ParameterError(
                "learning_rate_override", learning_rate_override, "has to be in [0, 1]"
            )
        p = self.params
        alpha = self.learning_rate(learning_rate_override)
        self.frames_seen += 1
        channels, n_pix = self.channels, self.area
        x = frame.pixels.reshape(n_pix, channels).T.astype(np.float64)
        # rows past the deepest live component are empty everywhere,
        # one spare row leaves room for new components
        depth = min(self._depth() + 1, p.max_components)
        w = self._weights[:depth]
        mu, var, birth = self._means[:depth], self._variances[:depth], self._births[:depth]
        alive = w > 0

        # a fit on the dominant component is always background
        diff0 = x - mu[0]
        d2_0 = diff0[0] * diff0[0]
        for c in range(1, channels):
            d2_0 += diff0[c] * diff0[c]
        fit0 = alive[0] & (d2_0 <= p.var_threshold * var[0])

        # the remaining pixels are matched against every component, the first fit wins
        rest = np.flatnonzero(~fit0)
        diff = x[:, rest][np.newaxis] - mu[:, :, rest]
        d2 = diff[:, 0] * diff[:, 0]
        for c in range(1, channels):
            d2 += diff[:, c] * diff[:, c]
        fits = alive[:, rest] & (d2 <= p.var_threshold * var[:, rest])
        matched = fits.any(axis=0)
        m = fits.argmax(axis=0)

        # background prefix, judged on the weights the pixel had coming into this frame
        w_rest = w[:, rest]
        before = np.zeros_like(w_rest)
        for k in range(1, depth):
            before[k] = before[k - 1] + w_rest[k - 1]
        rest_background = matched & (before[m, np.arange(rest.size)] <= p.background_ratio)

        # decay every weight, reward the match, drop what reached zero
        w_new = np.where(alive, w - alpha * (w + p.weight_prune), 0.0)
        np.add(w_new[0], alpha, out=w_new[0], where=fit0)
        mi, ri = m[matched], rest[matched]
        w_new[mi, ri] += alpha
        dying = alive & (w_new <= 0)
        if dying.any():
            ki, pi = np.nonzero(dying)
            w_new[ki, pi] = 0.0
            mu[ki, :, pi] = 0.0
            var[ki, pi] = 0.0
            birth[ki, pi] = _EMPTY

        # move the matched component towards the sample
        w0 = w_new[0]
        update0 = fit0 & (w0 > 0)
        rho0 = np.divide(alpha, w0, out=np.zeros(n_pix), where=update0)
        for c in range(channels):
            np.add(mu[0, c], rho0 * diff0[c], out=mu[0, c], where=update0)
        v = var[0]
        np.copyto(
            v,
            np.minimum(np.maximum(v + rho0 * (d2_0 / channels - v), p.var_min), p.var_max),
            where=update0,
        )
        keep = w_new[mi, ri] > 0
        mi, ri, ji = mi[keep], ri[keep], np.flatnonzero(matched)[keep]
        rho = alpha / w_new[mi, ri]
        for c in range(channels):
            mu[mi, c, ri] = mu[mi, c, ri] + rho * diff[mi, c, ji]
        v = var[mi, ri]
        var[mi, ri] = np.minimum(
            np.maximum(v + rho * (d2[mi, ji] / channels - v), p.var_min), p.var_max
        )

        # unmatched samples spawn a component in the first free slot,
        # or replace the last (lowest weight) one when the pixel is full
        if alpha > 0:
            ui = rest[~matched]
            if ui.size:
                free = w_new[:, ui] <= 0
                slot = np.where(free.any(axis=0), free.argmax(axis=0), depth - 1)
                w_new[slot, ui] = alpha
                for c in range(channels):
                    mu[slot, c, ui] = x[c, ui]
                var[slot, ui] = p.var_init
                birth[slot, ui] = self.frames_seen

        # renormalize, summing in slot order
        total = w_new[0].copy()
        for k in range(1, depth):
            total += w_new[k]
        np.divide(w_new, total, out=w_new, where=total > 0)
        w[...] = w_new
        self._sort(depth)

        labels = np.where(fit0, BACKGROUND, FOREGROUND).astype(np.uint8)
        labels[rest[rest_background]] = BACKGROUND
        if p.detect_shadows:
            self._label_shadows(x, labels)
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(
                f"mog2.apply(frame={frame.index}, alpha={alpha:.5f}) -> "
                f"{np.count_nonzero(labels == FOREGROUND)} foreground"
            )
        return MaskFrame(
            labels.reshape(self.height, self.width), p.shadow_value, frame.index, validate=False
        )

    def _depth(self) -> int:
        # live components form a prefix of every pixel's slots
        depth = 0
        for row in self._weights:
            if not row.any():
                break
            depth += 1
        return depth

    def _sort(self, depth: int):
        if depth < 2:
            return
        w, birth = self._weights[:depth], self._births[:depth]
        # only pixels with a live component at least as heavy as the one before it can be
        # out of order, sorting an ordered pixel leaves it unchanged
        ahead = ((w[1:] >= w[:-1]) & (w[1:] > 0)).any(axis=0)
        if not ahead.any():
            return
        idx = np.flatnonzero(ahead)
        order = np.lexsort((birth[:, idx], -w[:, idx]), axis=0)
        w[:, idx] = np.take_along_axis(w[:, idx], order, axis=0)
        variances = self._variances[:depth]
        variances[:, idx] = np.take_along_axis(variances[:, idx], order, axis=0)
        birth[:, idx] = np.take_along_axis(birth[:, idx], order, axis=0)
        means = self._means[:depth, :, idx]
        self._means[:depth, :, idx] = np.take_along_axis(
            means, np.broadcast_to(order[:, np.newaxis, :], means.shape), axis=0
        )

    def _label_shadows(self, x: np.ndarray, labels: np.ndarray):
        p = self.params
        mu1, var1 = self._means[0], self._variances[0]
        dot = x[0] * mu1[0]
        norm = mu1[0] * mu1[0]
        for c in range(1, self.channels):
            dot += x[c] * mu1[c]
            norm += mu1[c] * mu1[c]
        ratio = np.divide(dot, norm, out=np.zeros_like(dot), where=norm > 0)
        dist = (x[0] - ratio * mu1[0]) * (x[0] - ratio * mu1[0])
        for c in range(1, self.channels):
            dist += (x[c] - ratio * mu1[c]) * (x[c] - ratio * mu1[c])
        shadow = (
            (labels == FOREGROUND)
            & (norm > 0)
            & (ratio >= p.shadow_threshold)
            & (ratio <= 1)
            & (dist <= p.var_threshold * var1)
        )
        labels[shadow] = p.shadow_value

    def background_image(self) -> Frame:
        """
        Renders the model's current background: the rounded mean of each pixel's
        highest-weight component.

        Returns
        -------
        Frame
            The background image, with the same channel count as the model.

        Raises
        ------
        EmptyModel
            No frame has been applied yet.
        """
        if self.frames_seen < 1:
            raise EmptyModel
        means = np.clip(np.rint(self._means[0]), 0, 255).astype(np.uint8)
        if self.channels == 1:
            pixels = means[0].reshape(self.height, self.width)
        else:
            pixels = means.T.reshape(self.height, self.width, self.channels)
        return Frame(np.ascontiguousarray(pixels), self.frames_seen - 1)


def bg_new(
    width: int, height: int, channels: int = 1, params: Optional[Mog2Params] = None
) -> BackgroundModel:
    """
    Creates an empty background model. See `BackgroundModel`.
    """
    return BackgroundModel(width, height, channels, params)


def bg_apply(
    model: BackgroundModel, frame: Frame, learning_rate_override: Optional[float] = None
) -> MaskFrame:
    """
    Classifies a frame and advances the model. See `BackgroundModel.apply`.
    """
    return model.apply(frame, learning_rate_override)


def bg_background_image(model: BackgroundModel) -> Frame:
    """
    Renders the model's background. See `BackgroundModel.background_image`.
    """
    return model.background_image()
