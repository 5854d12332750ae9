"""Tests for compliant-rl."""
