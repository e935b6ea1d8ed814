"""Pydantic data schemas."""
