# Sphinx configuration for the gylab documentation.

import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join("..", "..", "source")))

project = "gylab"
copyright = "2026, gylab developers"
author = "gylab developers"
release = "1.0"

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.mathjax",
    "sphinx_rtd_theme",
]
napoleon_google_docstring = False
napoleon_numpy_docstring = True
autodoc_member_order = "bysource"

templates_path = ["_templates"]
exclude_patterns = []

html_theme = "sphinx_rtd_theme"
html_static_path = ["_static"]
