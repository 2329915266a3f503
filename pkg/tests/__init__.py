"""
Tests pour caveray.
"""
