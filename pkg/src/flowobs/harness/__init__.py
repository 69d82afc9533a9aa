"""Command-line harness: configuration, synthetic twins, CSV artifacts and plots."""
