"""Packaged defaults and machine overrides shared by every module."""
import os
import copy
from collections.abc import MutableMapping

import yaml


class _Config(MutableMapping):
    """
    Dictionary-like base for the context and settings objects.

    Subclasses keep their values in ``self._data``.
    """
    def __init__(self):
        raise NotImplementedError("The base object _Config is designed to be inherited")

    def __getitem__(self, key):
        return self._data[key]

    def __setitem__(self, key, value):
        self._data[key] = value

    def __delitem__(self, key):
        del self._data[key]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __repr__(self):
        return f"{self.__class__.__name__}({dict(self.items())})"


class Context(_Config):
    """
    Load in the packaged defaults and any machine specific overrides.

    The packaged ``defaults.yml`` holds the engine defaults (tracker,
    solver, evaluation, training and synthetic scene settings). A
    ``machine.yml`` next to it, when present, overrides top level
    sections of the defaults.
    """
    def __init__(self, name=None, data=None):
        """
        :param name: The name of the context, used for the default log file.
        :type name: str
        :param data: Configuration to use instead of the files on disk.
        :type data: dict
        :raises ValueError: If no configuration is found.
        """
        here = os.path.dirname(os.path.abspath(__file__))
        self._default_file = os.path.join(here, "defaults.yml")
        self._local_file = os.path.join(here, "machine.yml")
        self._name = name or "jointrack"

        if data is not None:
            self._data = data
        else:
            self._data = {}
            for filename in (self._default_file, self._local_file):
                if os.path.exists(filename):
                    with open(filename) as file:
                        self._data.update(yaml.safe_load(file) or {})

        if not self._data:
            raise ValueError(f"No configuration found in {self._default_file} or {self._local_file}.")
        self._data = {key: _expand(value) for key, value in self._data.items()}
        self._add_logging_defaults()

    def section(self, key):
        """
        Return a copy of a top level section, or an empty dictionary.

        :param key: The section name, e.g. "tracker".
        :type key: str
        :rtype: dict
        """
        value = self._data.get(key)
        return {} if value is None else copy.deepcopy(value)

    def _add_logging_defaults(self):
        log_cfg = self._data.get("logging") or {}
        log_cfg.setdefault("level", 20)
        log_cfg.setdefault("filename", self._name + ".log")
        self._data["logging"] = log_cfg


def _expand(value):
    """Expand $VAR and ${VAR} in strings, recursing through containers."""
    if isinstance(value, str):
        return os.path.expandvars(value)
    if isinstance(value, dict):
        return {k: _expand(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_expand(item) for item in value]
    return value
