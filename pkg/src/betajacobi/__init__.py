"""Jacobi processes on the alcove and their symmetric-function martingales."""
