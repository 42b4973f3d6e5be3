"""Test suite for gpfield."""
