"""Dependency injection package for the ldpfeat toolkit."""

from .container import DIContainer, container

__all__ = ['DIContainer', 'container']
