import os
import copy
from itertools import chain

import toml
import yaml

from . import context
from ..errors import ConfigurationError
from ..log import Logger


ctxt = context.Context()
log = Logger(
    name=__name__,
    level=ctxt["logging"]["level"],
    filename=ctxt["logging"]["filename"],
)

# Keys that a config file may give at top level for the tracker section.
TRACKER_KEYS = (
    "batch_size",
    "tau",
    "min_frames",
    "min_avg_nodes",
    "nms_iou",
    "temporal_joints",
    "constraints",
)


class _HConfig(context._Config):
    """
    Base class for a hierachical configuration which can inherit from other configurations.

    Lookups that miss in this layer fall through to the parent layer.
    """

    def __init__(self):
        raise NotImplementedError(
            "The base object _HConfig is designed to be inherited"
        )

    def __getitem__(self, key):
        if key in self._data or self._parent is None:
            return self._data[key]
        else:
            return self._parent[key]

    def __delitem__(self, key):
        if key not in self._data:
            raise KeyError(f"Key {key} not found in this layer.")
        del self._data[key]

    def __iter__(self):
        if self._parent is None:
            return iter(self._data)
        own = set(self._data)
        return chain(self._data, (key for key in self._parent if key not in own))

    def __len__(self):
        return sum(1 for _ in self)

    def __contains__(self, key):
        if key in self._data:
            return True
        return self._parent is not None and key in self._parent


class Settings(_HConfig):
    """A layered run configuration.

    A ``Settings`` object holds one layer of configuration (explicit command
    line flags, a user config file, or the packaged defaults) and a parent
    layer it falls back to. Sections such as ``tracker`` and ``solver`` are
    merged key by key so that a flag overrides one field of a section
    without hiding the rest of it.
    """

    def __init__(self, data: dict = None, parent=None, source: str = None) -> None:
        """
        Initialise a settings layer.

        :param data: The configuration of this layer.
        :type data: dict or None
        :param parent: The layer to fall back to.
        :type parent: Settings, Context or None
        :param source: Where the layer came from (for messages).
        :type source: str
        """
        if data is None:
            data = {}
        self._data = self._normalise(data)
        self._parent = parent
        self.source = source
        log.debug(f"Initialised settings layer from {source}.")

    @staticmethod
    def _normalise(data):
        """
        Move top level tracker keys into the tracker section and drop unset values.
        """
        data = copy.deepcopy(data)
        tracker = data.get("tracker") or {}
        for key in TRACKER_KEYS:
            if key in data:
                tracker[key] = data.pop(key)
        if tracker:
            data["tracker"] = tracker
        cleaned = {}
        for key, value in data.items():
            if isinstance(value, dict):
                value = {k: v for k, v in value.items() if v is not None}
            if value is None:
                continue
            cleaned[key] = value
        return cleaned

    @classmethod
    def from_file(cls, filename, parent=None):
        """
        Load a settings layer from a TOML or YAML file.

        :param filename: The file to read; the extension selects the parser.
        :type filename: str
        :param parent: The layer to fall back to.
        :return: A new settings layer.
        :rtype: Settings
        :raises ConfigurationError: If the file is missing or cannot be parsed.
        """
        fname = os.path.expandvars(filename)
        if not os.path.exists(fname):
            errmsg = f'Config file "{fname}" not found.'
            log.error(errmsg)
            raise ConfigurationError(errmsg)
        ext = os.path.splitext(fname)[1].lower()
        try:
            with open(fname, "r") as stream:
                if ext == ".toml":
                    data = toml.load(stream)
                elif ext in (".yml", ".yaml"):
                    data = yaml.safe_load(stream) or {}
                else:
                    raise ConfigurationError(f'Unrecognised config file type "{ext}".')
        except (toml.TomlDecodeError, yaml.YAMLError) as exc:
            errmsg = f'Could not parse config file "{fname}": {exc}'
            log.error(errmsg)
            raise ConfigurationError(errmsg)
        if not isinstance(data, dict):
            raise ConfigurationError(f'Config file "{fname}" does not hold a mapping.')
        log.debug(f'Read config file "{fname}".')
        return cls(data, parent=parent, source=fname)

    @classmethod
    def layered(cls, flags=None, config_file=None, defaults=None):
        """
        Build the flag > file > defaults chain.

        :param flags: Explicitly given values, by section; None values are ignored.
        :type flags: dict
        :param config_file: Optional TOML or YAML file.
        :type config_file: str
        :param defaults: The packaged defaults, by default the module context.
        :type defaults: Context
        :return: The top settings layer.
        :rtype: Settings
        """
        if defaults is None:
            defaults = ctxt
        parent = cls(dict(defaults.items()), parent=None, source="defaults")
        if config_file is not None:
            parent = cls.from_file(config_file, parent=parent)
        return cls(flags or {}, parent=parent, source="flags")

    def section(self, key):
        """
        Return a section merged over all layers, nearest layer winning.

        :param key: The section name.
        :type key: str
        :return: The merged section.
        :rtype: dict
        """
        merged = {}
        if isinstance(self._parent, Settings):
            merged = self._parent.section(key)
        elif self._parent is not None and isinstance(self._parent.get(key), dict):
            merged = copy.deepcopy(self._parent[key])
        value = self._data.get(key)
        if isinstance(value, dict):
            merged.update(copy.deepcopy(value))
        return merged
