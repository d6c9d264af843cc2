from dpcp.cli import entrypoint

entrypoint()
