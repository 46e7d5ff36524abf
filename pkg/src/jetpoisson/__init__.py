"""Jet-space variational calculus and Miura-reciprocal transformations."""
