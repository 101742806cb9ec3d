"""Data module initialization."""
