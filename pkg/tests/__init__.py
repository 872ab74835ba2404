"""
Test suite for nsetas.
"""
