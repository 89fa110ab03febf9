from __future__ import annotations

import logging
import configparser
from pathlib import Path
from typing import Any, Optional, Union, List, Dict, Tuple, Callable, Iterable

from .enums import InputSource, ShadowPolicy
from .mog2 import Mog2Params
from .blob import MorphParams
from .tracker import TrackerParams
from .counter import CountingLine
from .utils import parse_floats
from .evaluation import DEFAULT_TOLERANCE, DEFAULT_P0
from .exceptions import ConfigError, ParameterError


__all__ = [
    "DEFAULTS",
    "PipelineConfig",
    "load_config",
    "default_config",
]
logger = logging.getLogger(__package__)
PathLike = Union[str, Path]

# Every recognized key, with its default in configuration file spelling.
# An empty value means "derive it" (size-relative defaults, line hints).
DEFAULTS: Dict[str, Dict[str, str]] = {
    "input": {
        "source": "synth",
        "path": "",
        "pattern": "*.pgm",
        "preset": "single_cross",
        "seed": "0",
        "width": "320",
        "height": "240",
        "grayscale": "true",
    },
    "mog2": {
        "history": "500",
        "var_threshold": "16",
        "max_components": "5",
        "background_ratio": "0.9",
        "var_init": "15",
        "var_min": "4",
        "var_max": "75",
        "weight_prune": "",
        "detect_shadows": "false",
        "shadow_value": "127",
        "shadow_threshold": "0.5",
    },
    "blob": {
        "open_radius": "1",
        "close_radius": "2",
        "min_blob_area": "",
        "shadow_policy": "treat_as_background",
    },
    "tracker": {
        "max_match_distance": "",
        "min_hits": "3",
        "max_missed": "10",
    },
    "counter": {
        "line": "",
        "enter_sign": "-1",
        "hysteresis": "8",
        "debounce": "15",
    },
    "eval": {
        "ground_truth": "",
        "tolerance_frames": str(DEFAULT_TOLERANCE),
        "p0": str(DEFAULT_P0),
    },
    "output": {
        "directory": "output",
        "mask_every": "0",
        "track_csv": "false",
        "dump_background": "false",
    },
}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in configparser.ConfigParser.BOOLEAN_STATES:
        return configparser.ConfigParser.BOOLEAN_STATES[lowered]
    raise ValueError(f"not a boolean: {text!r}")


def _parse_enum(enum: Any) -> Callable[[str], Any]:
    def parse(text: str) -> Any:
        member = enum(text)
        if member is None:
            valid = ", ".join(m.slug for m in enum)
            raise ValueError(f"unknown value {text!r}, valid values are: {valid}")
        return member
    return parse


class _Reader:
    """
    Typed access to a parser, reporting failures as `ConfigError` with the dotted key.
    """
    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser

    def get(
        self, section: str, key: str, convert: Callable[[str], Any] = str, *, optional: bool = False
    ) -> Any:
        text = self.parser.get(section, key).strip()
        if optional and not text:
            return None
        try:
            return convert(text)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}", str(exc)) from exc

    def block(self, section: str, factory: Callable[..., Any], **kwargs) -> Any:
        try:
            return factory(**kwargs)
        except ParameterError as exc:
            raise ConfigError(f"{section}.{exc.field}", exc.reason) from exc


class PipelineConfig:
    """
    The effective configuration of a pipeline run.

    Use `load_config` to build one out of defaults, an optional configuration file
    and command-line overrides.

    Attributes
    ----------
    source : InputSource
        The input kind.
    input_path : Optional[Path]
        The PGM directory or Y4M file. `None` for synthetic input.
    pattern : str
        The file pattern for PGM directories.
    preset : str
        The synthetic scene preset name.
    seed : int
        The synthetic scene seed.
    width : int
    height : int
        The synthetic frame size.
    grayscale : bool
        Whether color input is converted to luma before background subtraction.
        Shadow detection needs this turned off.
    mog2 : Mog2Params
        Background subtractor parameters.
    morph : MorphParams
        Mask refinement and blob filtering parameters.
    tracker : TrackerParams
        Tracker parameters.
    line_points : Optional[Tuple[Tuple[float, float], Tuple[float, float]]]
        The counting line endpoints. `None` uses the synthetic scene's line.
    enter_sign : int
    hysteresis : float
    debounce : int
        Counting line parameters, see `CountingLine`.
    ground_truth : Optional[Path]
        Ground truth CSV to evaluate against.
    tolerance_frames : int
        The event matching tolerance.
    p0 : float
        The significance test null hypothesis error probability.
    output_dir : Path
        Where run artifacts are written.
    mask_every : int
        Dump every N-th cleaned mask. ``0`` disables mask dumps.
    track_csv : bool
        Whether to write ``tracks.csv``.
    dump_background : bool
        Whether to write the final background image.
    parser : configparser.ConfigParser
        The merged configuration, echoed into the output directory.
    """
    def __init__(self, parser: configparser.ConfigParser):
        r = _Reader(parser)
        self.parser = parser
        self.source: InputSource = r.get("input", "source", _parse_enum(InputSource))
        self.input_path: Optional[Path] = r.get("input", "path", Path, optional=True)
        self.pattern: str = r.get("input", "pattern")
        self.preset: str = r.get("input", "preset")
        self.seed: int = r.get("input", "seed", int)
        self.width: int = r.get("input", "width", int)
        self.height: int = r.get("input", "height", int)
        self.grayscale: bool = r.get("input", "grayscale", _parse_bool)

        self.mog2: Mog2Params = r.block(
            "mog2",
            Mog2Params,
            history=r.get("mog2", "history", int),
            var_threshold=r.get("mog2", "var_threshold", float),
            max_components=r.get("mog2", "max_components", int),
            background_ratio=r.get("mog2", "background_ratio", float),
            var_init=r.get("mog2", "var_init", float),
            var_min=r.get("mog2", "var_min", float),
            var_max=r.get("mog2", "var_max", float),
            weight_prune=r.get("mog2", "weight_prune", float, optional=True),
            detect_shadows=r.get("mog2", "detect_shadows", _parse_bool),
            shadow_value=r.get("mog2", "shadow_value", int),
            shadow_threshold=r.get("mog2", "shadow_threshold", float),
        )
        self.morph: MorphParams = r.block(
            "blob",
            MorphParams,
            open_radius=r.get("blob", "open_radius", int),
            close_radius=r.get("blob", "close_radius", int),
            min_blob_area=r.get("blob", "min_blob_area", int, optional=True),
            shadow_policy=r.get("blob", "shadow_policy", _parse_enum(ShadowPolicy)),
        )
        self.tracker: TrackerParams = r.block(
            "tracker",
            TrackerParams,
            max_match_distance=r.get("tracker", "max_match_distance", float, optional=True),
            min_hits=r.get("tracker", "min_hits", int),
            max_missed=r.get("tracker", "max_missed", int),
        )

        line = r.get("counter", "line", lambda text: parse_floats(text, 4), optional=True)
        self.line_points: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = (
            None if line is None else ((line[0], line[1]), (line[2], line[3]))
        )
        self.enter_sign: int = r.get("counter", "enter_sign", int)
        self.hysteresis: float = r.get("counter", "hysteresis", float)
        self.debounce: int = r.get("counter", "debounce", int)

        self.ground_truth: Optional[Path] = r.get("eval", "ground_truth", Path, optional=True)
        self.tolerance_frames: int = r.get("eval", "tolerance_frames", int)
        self.p0: float = r.get("eval", "p0", float)

        self.output_dir: Path = r.get("output", "directory", Path)
        self.mask_every: int = r.get("output", "mask_every", int)
        self.track_csv: bool = r.get("output", "track_csv", _parse_bool)
        self.dump_background: bool = r.get("output", "dump_background", _parse_bool)
        self.validate()

    def __repr__(self) -> str:
        where = self.preset if self.source == InputSource.Synth else self.input_path
        return f"{self.__class__.__name__}({self.source.slug}: {where})"

    def validate(self):
        """
        Checks the cross-field invariants and the referenced paths.

        Raises
        ------
        ConfigError
            The configuration is invalid. The offending ``section.key`` is named.
        """
        if self.source == InputSource.Synth:
            if self.input_path is not None:
                raise ConfigError("input.path", "synthetic input doesn't read any files")
        else:
            if self.input_path is None:
                raise ConfigError("input.path", f"required for {self.source.slug} input")
            if not self.input_path.exists():
                raise ConfigError("input.path", f"{self.input_path} does not exist")
            if self.line_points is None:
                raise ConfigError("counter.line", f"required for {self.source.slug} input")
        if self.mog2.detect_shadows and self.grayscale:
            raise ConfigError(
                "mog2.detect_shadows",
                "shadow detection needs color input, set input.grayscale = false",
            )
        if self.line_points is not None:
            # validates the counter block
            self.counting_line()
        else:
            _Reader(self.parser).block(
                "counter",
                CountingLine,
                p1=(0.0, 0.0),
                p2=(1.0, 0.0),
                enter_sign=self.enter_sign,
                hysteresis=self.hysteresis,
                debounce=self.debounce,
            )
        if self.ground_truth is not None and not self.ground_truth.is_file():
            raise ConfigError("eval.ground_truth", f"{self.ground_truth} does not exist")
        if self.tolerance_frames < 0:
            raise ConfigError("eval.tolerance_frames", "has to be >= 0")
        if not 0 < self.p0 < 1:
            raise ConfigError("eval.p0", "has to be in (0, 1)")
        if self.mask_every < 0:
            raise ConfigError("output.mask_every", "has to be >= 0")

    def counting_line(
        self, hint: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = None
    ) -> CountingLine:
        """
        Builds the counting line, falling back to the given hint when no line is configured.

        Raises
        ------
        ConfigError
            No line is configured and no hint was given, or the line is invalid.
        """
        points = self.line_points if self.line_points is not None else hint
        if points is None:
            raise ConfigError("counter.line", "no counting line configured")
        return _Reader(self.parser).block(
            "counter",
            CountingLine,
            p1=points[0],
            p2=points[1],
            enter_sign=self.enter_sign,
            hysteresis=self.hysteresis,
            debounce=self.debounce,
        )

    def write(self, path: PathLike):
        """
        Writes the effective configuration in configuration file format.
        """
        with open(path, "w") as file:
            self.parser.write(file)


def _apply_override(parser: configparser.ConfigParser, override: str):
    name, sep, value = override.partition("=")
    section, dot, key = name.strip().partition(".")
    if not sep or not dot:
        raise ConfigError(name.strip() or override, "overrides have to look like section.key=value")
    _set(parser, section, key, value.strip())


def _set(parser: configparser.ConfigParser, section: str, key: str, value: str):
    if section not in DEFAULTS:
        raise ConfigError(f"{section}.{key}", f"unknown section {section!r}")
    if key not in DEFAULTS[section]:
        raise ConfigError(f"{section}.{key}", "unknown key")
    parser.set(section, key, value)


def load_config(
    path: Optional[PathLike] = None,
    overrides: Iterable[str] = (),
    values: Optional[Dict[str, Any]] = None,
) -> PipelineConfig:
    """
    Builds the effective configuration: built-in defaults, overridden by the configuration
    file, overridden by ``section.key=value`` overrides, overridden by ``values``.

    Parameters
    ----------
    path : Optional[Union[str, Path]]
        The configuration file to read.
    overrides : Iterable[str]
        ``section.key=value`` strings, applied in order.
    values : Optional[Dict[str, Any]]
        A ``{"section.key": value}`` mapping, applied last. `None` values are skipped.

    Returns
    -------
    PipelineConfig
        The validated configuration.

    Raises
    ------
    ConfigError
        The file contains an unknown section or key, a value can't be parsed, or
        validation failed.
    OSError
        The configuration file couldn't be read.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_dict(DEFAULTS)
    if path is not None:
        file_parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path) as file:
                file_parser.read_file(file)
        except configparser.Error as exc:
            raise ConfigError(str(path), str(exc)) from exc
        for section in file_parser.sections():
            for key, value in file_parser.items(section):
                _set(parser, section, key, value)
        logger.info(f"Loaded configuration from {path}")
    for override in overrides:
        _apply_override(parser, override)
    if values:
        for name, value in values.items():
            if value is None:
                continue
            section, _, key = name.partition(".")
            if isinstance(value, bool):
                value = "true" if value else "false"
            _set(parser, section, key, str(value))
    config = PipelineConfig(parser)
    logger.debug(f"config.load_config(path={path}) -> {config!r}")
    return config


def default_config(**values: Any) -> PipelineConfig:
    """
    A configuration built only from defaults. Keyword arguments are ``section_key=value``
    overrides, e.g. ``default_config(input_preset="n_people(4)")``.
    """
    mapped: Dict[str, Any] = {}
    for name, value in values.items():
        section, _, key = name.partition("_")
        mapped[f"{section}.{key}"] = value
    return load_config(values=mapped)

