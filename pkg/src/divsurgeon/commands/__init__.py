"""CLI commands for divsurgeon."""
