"""DQBC frame interpolation toolkit."""
