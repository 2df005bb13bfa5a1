"""CLI, configs, run manifests and the acceptance experiments."""
