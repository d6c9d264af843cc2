"""HTTP service over the calibration library."""

from dpcp.service.app import app, create_app

__all__ = ["app", "create_app"]
