import tcezsl

project = 'tcezsl'
copyright = '2026, tcezsl contributors'
author = 'tcezsl contributors'

master_doc = 'index'

# The full version, including alpha/beta/rc tags
version = tcezsl.__version__
release = version


# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
]

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
}

templates_path = ['_templates']

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']


# -- Options for HTML output -------------------------------------------------

html_theme = 'shibuya'
html_theme_options = {
    "light_css_variables": {
        "--sy-rc-theme": "46, 125, 110",
    },
    "dark_css_variables": {
        "--sy-rc-theme": "64, 160, 140",
    },
}

html_copy_source = False
html_show_sourcelink = False
