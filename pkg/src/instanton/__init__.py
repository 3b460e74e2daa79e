"""Numerical workbench for ADHM instantons, Chern-Weil charges and linking anomalies."""
