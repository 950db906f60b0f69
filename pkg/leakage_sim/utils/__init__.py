"""Command-line and file helpers."""
