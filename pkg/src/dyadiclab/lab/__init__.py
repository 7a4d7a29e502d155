"""Config-driven experiment harness and command-line interface."""
