"""Cell-role classification and header-region detection for spreadsheet tables."""

__version__ = "0.1.0"
