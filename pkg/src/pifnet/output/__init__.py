"""Output formatters for pifnet."""

from . import files, terminal

__all__ = ['files', 'terminal']
