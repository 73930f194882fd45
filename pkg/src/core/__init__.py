"""Core foundations.

This package contains the pieces every command and service builds on:
- logging setup and error reporting
- run context (config + settings + logger)
- safe wrappers for commands
- tensor types, numeric kernels and gradient checking
"""
