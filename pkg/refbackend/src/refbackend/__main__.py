"""Run the reference server: `refbackend --config server.yaml` or flags."""
from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import ServerConfig


def main() -> None:
    parser = argparse.ArgumentParser(description="reference model-backend server")
    parser.add_argument("--config", default=None, help="YAML config path")
    parser.add_argument("--host", default=None)
    parser.add_argument("--port", type=int, default=None)
    args = parser.parse_args()

    config = ServerConfig.from_yaml(args.config) if args.config else ServerConfig()
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")


if __name__ == "__main__":
    main()
