"""Integration tests for LeanIX Survey Creator."""
