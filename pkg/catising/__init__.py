# https://py-pkgs.org/04-package-structure
from importlib.metadata import version

__version__ = version("CatIsing")  # read version from pyproject.toml
