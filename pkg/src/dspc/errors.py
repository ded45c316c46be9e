"""Shared exception hierarchy.

Every error the pipeline can raise derives from DspcError so the CLI can map
failures onto its exit codes without enumerating modules.
"""

from __future__ import annotations


class DspcError(Exception):
    """Base class for all compiler errors."""


class UsageError(DspcError):
    """Bad command-line invocation (exit code 1)."""
