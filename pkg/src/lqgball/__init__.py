"""Discrete Liouville quantum gravity metric balls."""
