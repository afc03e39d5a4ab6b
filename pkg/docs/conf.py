#!/usr/bin/env python
# -*- coding: utf-8 -*-
#
# memfold documentation build configuration file.

import os
import sys

# import the package from the source tree
cwd = os.getcwd()
project_root = os.path.dirname(cwd)
sys.path.insert(0, project_root)

import memfold  # noqa: E402

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.viewcode']
source_suffix = '.rst'
master_doc = 'index'

project = u'memfold'
copyright = u"2026, memfold developers"
version = memfold.__version__
release = memfold.__version__

exclude_patterns = ['_build']
pygments_style = 'sphinx'

html_theme = 'default'
htmlhelp_basename = 'memfolddoc'

man_pages = [
    ('index', 'memfold',
     u'memfold Documentation',
     [u'memfold developers'], 1)
]
