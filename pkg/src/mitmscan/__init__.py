"""TLS interception vulnerability scanner and root-cause toolkit."""

__version__ = "0.1.0"
