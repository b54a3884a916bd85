# Sphinx configuration for the qsv documentation.

import doctest
import runpy
import sys
from pathlib import Path

DOCS = Path(__file__).resolve().parent
SRC = DOCS.parent / 'src'

# Read the version metadata without importing qsv, which would pull in cvxpy
_meta = runpy.run_path(str(SRC / 'qsv' / '__version__.py'))

project = 'qsv'
author = _meta['__author__']
copyright = _meta['__copyright__'].removeprefix('Copyright ')
release = _meta['__version__']
version = '.'.join(release.split('.')[:2])

sys.path.insert(0, str(SRC))

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'sphinx.ext.intersphinx',
    'sphinx.ext.doctest',
    'sphinx.ext.mathjax',
]

# Google-style "Args/Returns/Raises" sections
napoleon_google_docstring = True
napoleon_numpy_docstring = False
napoleon_use_rtype = False

autodoc_default_options = {
    'members': True,
    'member-order': 'bysource',
    'undoc-members': True,
    'show-inheritance': True,
}
autodoc_typehints = 'description'
# The solver backend is only needed at call time
autodoc_mock_imports = ['cvxpy']

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'pandas': ('https://pandas.pydata.org/docs/', None),
    'scipy': ('https://docs.scipy.org/doc/scipy/', None),
    'cvxpy': ('https://www.cvxpy.org/', None),
}

# Notation shared by algorithm.rst and the docstrings
mathjax3_config = {
    'tex': {
        'macros': {
            'Tr': r'\operatorname{Tr}',
            'ket': [r'\left|#1\right\rangle', 1],
            'bra': [r'\left\langle#1\right|', 1],
            'dB': r'd_{\mathrm{B}}',
        }
    }
}

# Bare array and Generator annotations do not resolve to documented targets
nitpick_ignore = [
    ('py:class', 'np.ndarray'),
    ('py:class', 'np.random.Generator'),
    ('py:class', 'pd.DataFrame'),
]

html_theme = 'sphinx_rtd_theme'
html_theme_options = {
    'display_version': True,
    'prev_next_buttons_location': 'bottom',
    'collapse_navigation': False,
}
html_static_path = []
html_title = f'qsv {release}: quantum state verification'

source_suffix = {'.rst': 'restructuredtext'}
master_doc = 'index'

# Doctests run against perfect-oracle qubit examples
doctest_global_setup = '''
import numpy as np
from qsv import DensityMatrix, MeasurementOracle, pauli_projector_set
ket0 = DensityMatrix.pure([1, 0])
qubit = pauli_projector_set(1)
'''
doctest_default_flags = doctest.ELLIPSIS | doctest.NORMALIZE_WHITESPACE
