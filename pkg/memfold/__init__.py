# -*- coding: utf-8 -*-

__author__ = 'memfold developers'
__email__ = 'memfold@users.noreply.github.com'
__version__ = '0.1.0'
