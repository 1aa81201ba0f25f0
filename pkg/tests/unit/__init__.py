"""
Unit tests for individual inpaint_core modules.

Each module is tested in isolation on small seeded inputs.
"""
