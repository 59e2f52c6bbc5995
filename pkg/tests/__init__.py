"""Tests for fshapes"""
