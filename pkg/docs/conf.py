# -*- coding: utf-8 -*-
#
# auec documentation build configuration file.

import sys
import os
import re

sys.path.insert(0, os.path.abspath('..'))

def find_version(path):
    s = open(path, 'rt').read()
    return re.search(r"^__version__ = ['\"]([^'\"]*)['\"]", s, re.M).group(1)

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
    'sphinx.ext.autosummary',
    'numpydoc',
]

numpydoc_show_class_members = False

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'auec'
author = u'the auec developers'
copyright = u'2024, ' + author

release = find_version(os.path.join(os.path.dirname(__file__), '..', 'auec', 'version.py'))
version = '.'.join(release.split('.')[:2])

exclude_patterns = ['_build']
pygments_style = 'sphinx'

html_theme = 'classic'
html_static_path = ['_static']
htmlhelp_basename = 'auecdoc'

man_pages = [
    (master_doc, 'auec', u'auec Documentation', [author], 1)
]
