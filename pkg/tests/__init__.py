"""Tests for qsv package."""
