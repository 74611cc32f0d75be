"""Vacuum decay through a single quantised collective coordinate.

Field configurations along a one-parameter family of bubble profiles are
reduced to an effective mass K(R) and potential U(R); the resulting
Schrodinger problem is evolved in real time and its decay rate compared
against the Euclidean bounce action.
"""
__version__ = "0.1.0"
