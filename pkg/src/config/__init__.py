"""Configuration package for the ldpfeat toolkit."""

from .settings import config, AppConfig

__all__ = ['config', 'AppConfig']
