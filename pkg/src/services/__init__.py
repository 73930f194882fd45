"""Service layer (model stages, losses, weight archive, image I/O, config)."""
