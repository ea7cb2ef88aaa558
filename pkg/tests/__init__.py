"""Tests for sphereval."""
