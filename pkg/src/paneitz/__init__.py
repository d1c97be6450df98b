"""Conformally covariant Yamabe and Paneitz operators on chart metrics,
evaluated with exact derivatives from truncated Taylor jets."""

__version__ = "0.1.0"
