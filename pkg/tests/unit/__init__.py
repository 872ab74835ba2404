"""
Unit tests for individual modules and functions.
"""
