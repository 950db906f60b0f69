"""Scenario orchestration layer for leakage_sim."""
