# Configuration file for the Sphinx documentation builder.
# http://www.sphinx-doc.org/en/master/config

import os
import sys

import django

sys.path.insert(0, os.path.abspath('../src'))
os.environ.setdefault("DJANGO_SETTINGS_MODULE", "besovscale.settings")
django.setup()

# -- Project information -----------------------------------------------------

project = 'besovscale'
copyright = 'CC-BY-SA Julian-Samuel Gebühr'
author = 'Julian-Samuel Gebühr'
version = ''
release = '0.1.0'

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
]
templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'
language = "en"
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'
htmlhelp_basename = 'besovscale'

# -- Options for manual page output ------------------------------------------

man_pages = [
    (master_doc, 'besovscale', 'besovscale Documentation', [author], 1)
]
