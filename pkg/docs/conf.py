# -*- coding: utf-8 -*-
#
# Configuration file for the Sphinx documentation builder.

import os
import sys

import sphinx_bootstrap_theme

sys.path.insert(0, os.path.abspath('..'))


# -- General configuration ------------------------------------------------

extensions = ['sphinx.ext.autosummary',
              'sphinx.ext.autodoc',
              'sphinx.ext.napoleon',
              'sphinx.ext.doctest',
              'sphinx.ext.mathjax',
              'sphinx.ext.viewcode']

autosummary_generate = True

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'latentdg'
copyright = '2026, latentdg developers'
author = 'latentdg developers'

version = '0.1'
release = '0.1'

language = None
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'


# -- Options for HTML output ----------------------------------------------

html_theme = 'bootstrap'

html_theme_options = {
    'navbar_title': "latentdg",
    'navbar_links': [
        ("Getting Started", "installation"),
        ("API", "api"),
    ],
    'globaltoc_depth': 1,
    'globaltoc_includehidden': "true",
    'navbar_class': "navbar",
    'navbar_pagenav': False,
    'navbar_sidebarrel': False,
    'navbar_fixed_top': "true",
    'source_link_position': "footer",
    'bootswatch_theme': "cosmo",
    'bootstrap_version': "3",
}

html_static_path = []
html_theme_path = sphinx_bootstrap_theme.get_html_theme_path()

htmlhelp_basename = 'latentdgdoc'

man_pages = [
    (master_doc, 'latentdg', 'latentdg Documentation', [author], 1)
]
