"""A convex body that is not an intersection body although all its central
hyperplane sections are, built numerically and certified."""

__version__ = "0.1.0"
