"""Nested-fractal lattices, random Schrödinger operators and Lifschitz tails."""
