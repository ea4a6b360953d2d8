"""Shared execution of SQL query batches for pay-per-byte query services."""

__version__ = "0.1.0"
