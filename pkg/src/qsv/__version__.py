"""Version information for qsv package."""

__version__ = "0.1.0"
__author__ = "qsv developers"
__license__ = "GPL-3.0-or-later"
__copyright__ = "Copyright 2026 qsv developers"
