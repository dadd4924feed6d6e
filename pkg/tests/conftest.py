"""Pytest configuration; having this file here puts tests/ on sys.path so the
test modules can import the shared oracles module directly."""
