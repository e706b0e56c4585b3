"""Shared exception root so the CLI can map failures to exit codes."""


class LabgateError(Exception):
    """Base class for all engine errors."""
