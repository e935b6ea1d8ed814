"""Core solver components."""
