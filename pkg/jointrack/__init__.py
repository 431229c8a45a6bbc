# Version is the single source of truth for the package version
# This should match the version in pyproject.toml
__version__ = "0.1.0"
# Revision of the file formats read and written by jointrack.
FORMAT_REVISION = "1"

from . import log
from .config import context
from .config import interface
from .util import files
