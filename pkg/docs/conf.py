import sys
from pathlib import Path

import toml

root_dir = Path(__file__).parent.parent
sys.path.insert(0, str(root_dir))

metadata = toml.load(root_dir / "pyproject.toml")["tool"]["poetry"]

project = metadata["name"]
author = metadata["authors"][0]
copyright = f"2026, {author}"
release = metadata["version"]
version = ".".join(release.split(".")[:2])

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinx.ext.intersphinx",
]

# Types named in the :type: and :rtype: fields.
intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
    "pandas": ("https://pandas.pydata.org/pandas-docs/stable", None),
}

autodoc_member_order = "bysource"
autodoc_typehints = "description"
autodoc_default_options = {"members": True}

exclude_patterns = ["_build"]

html_theme = "sphinx_rtd_theme"
html_title = f"{project} {version}"
