"""Shared helpers: logging setup, progress lines, the thread pool and CSV output."""
