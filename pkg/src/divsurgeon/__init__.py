"""Divsurgeon: conservative pasting of divergence-free fields and volume-preserving maps."""

from divsurgeon.commands.scenario_commands import main

__all__ = ["main"]

if __name__ == "__main__":
    main()
