"""Data-directory and output-path helpers."""
